#include "elsa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace elsa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

Tensor axpy(double a, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "axpy");
  Tensor out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double a, const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v *= a;
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

void accumulate(Norms& n, double& sumsq, std::span<const double> values) {
  for (double v : values) {
    const double a = std::abs(v);
    sumsq += v * v;
    n.linf = std::max(n.linf, a);
    if (a > 0.0) ++n.l0;
  }
}

}  // namespace

Norms norms(const Tensor& x) {
  Norms n;
  double sumsq = 0.0;
  accumulate(n, sumsq, x.values());
  n.l2 = std::sqrt(sumsq);
  return n;
}

void require_same_layout(const ParamMap& a, const ParamMap& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": parameter maps differ in size");
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw ShapeError(std::string(what) + ": tensor id mismatch '" + ia->first + "' vs '" + ib->first + "'");
    }
    require_same_shape(ia->second, ib->second, what);
  }
}

ParamMap zeros_like(const ParamMap& p) {
  ParamMap out;
  for (const auto& [id, t] : p) out.emplace(id, Tensor(t.shape()));
  return out;
}

ParamMap axpy(double a, const ParamMap& x, const ParamMap& y) {
  require_same_layout(x, y, "axpy");
  ParamMap out;
  for (const auto& [id, t] : x) out.emplace(id, axpy(a, t, y.at(id)));
  return out;
}

ParamMap operator+(const ParamMap& a, const ParamMap& b) {
  require_same_layout(a, b, "add");
  ParamMap out;
  for (const auto& [id, t] : a) out.emplace(id, t + b.at(id));
  return out;
}

ParamMap operator-(const ParamMap& a, const ParamMap& b) {
  require_same_layout(a, b, "sub");
  ParamMap out;
  for (const auto& [id, t] : a) out.emplace(id, t - b.at(id));
  return out;
}

ParamMap operator*(double a, const ParamMap& x) {
  ParamMap out;
  for (const auto& [id, t] : x) out.emplace(id, a * t);
  return out;
}

double dot(const ParamMap& a, const ParamMap& b) {
  require_same_layout(a, b, "dot");
  double s = 0.0;
  for (const auto& [id, t] : a) s += dot(t, b.at(id));
  return s;
}

Norms norms(const ParamMap& p) {
  Norms n;
  double sumsq = 0.0;
  for (const auto& [id, t] : p) accumulate(n, sumsq, t.values());
  n.l2 = std::sqrt(sumsq);
  return n;
}

std::size_t total_size(const ParamMap& p) {
  std::size_t n = 0;
  for (const auto& [id, t] : p) n += t.size();
  return n;
}

bool all_finite(const ParamMap& p) {
  return std::all_of(p.begin(), p.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

std::vector<double> flatten(const ParamMap& p) {
  std::vector<double> out;
  out.reserve(total_size(p));
  for (const auto& [id, t] : p) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

ParamMap unflatten(std::span<const double> flat, const ParamMap& layout) {
  if (flat.size() != total_size(layout)) throw ShapeError("unflatten: length does not match layout");
  ParamMap out;
  std::size_t off = 0;
  for (const auto& [id, t] : layout) {
    std::vector<double> vals(flat.begin() + off, flat.begin() + off + t.size());
    off += t.size();
    out.emplace(id, Tensor(t.shape(), std::move(vals)));
  }
  return out;
}

// --- Rng -------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

Tensor rand_gaussian(Rng& rng, const Shape& shape, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("rand_gaussian: stddev must be non-negative");
  Tensor t(shape);
  for (double& v : t.values()) v = mean + stddev * rng.normal();
  return t;
}

Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace elsa
