#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elsa {

/// Raised by any operation whose operands disagree in shape.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Flat row-major array of doubles carrying its shape as metadata.
///
/// There is no broadcasting: every binary operation requires equal shapes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);
  /// 1-D tensor holding `values`.
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  /// Extent of the last dimension (0 for an empty shape).
  std::size_t last_dim() const { return shape_.empty() ? 0 : shape_.back(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
  std::size_t l0 = 0;  // exact nonzero count
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// a*x + y.
Tensor axpy(double a, const Tensor& x, const Tensor& y);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double a, const Tensor& x);
Tensor hadamard(const Tensor& a, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
Norms norms(const Tensor& x);

/// Parameters of a model keyed by tensor id; iteration order (sorted by id)
/// defines the concatenation order of the flat parameter vector.
using ParamMap = std::map<std::string, Tensor>;

void require_same_layout(const ParamMap& a, const ParamMap& b, const char* what);
ParamMap zeros_like(const ParamMap& p);
ParamMap axpy(double a, const ParamMap& x, const ParamMap& y);
ParamMap operator+(const ParamMap& a, const ParamMap& b);
ParamMap operator-(const ParamMap& a, const ParamMap& b);
ParamMap operator*(double a, const ParamMap& x);
double dot(const ParamMap& a, const ParamMap& b);
Norms norms(const ParamMap& p);
std::size_t total_size(const ParamMap& p);
bool all_finite(const ParamMap& p);
std::vector<double> flatten(const ParamMap& p);
/// Inverse of flatten using `layout` for ids and shapes.
ParamMap unflatten(std::span<const double> flat, const ParamMap& layout);

/// Deterministic generator: splitmix64-seeded xoshiro256**, Box-Muller normals.
/// The algorithm is fixed so that a seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor rand_gaussian(Rng& rng, const Shape& shape, double mean, double stddev);
Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi);

}  // namespace elsa
