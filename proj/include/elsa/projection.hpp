#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "elsa/tensor.hpp"

namespace elsa {

/// Order used between coordinates whose scores are exactly equal.
enum class TieBreak { kLowestIndex, kHighestIndex };

std::string to_string(TieBreak t);
TieBreak tie_break_from_string(const std::string& s);

/// Keep at most k entries across the concatenation of all tensors.
struct GlobalTopK {
  std::size_t k = 0;
};
/// Keep at most k entries in each tensor; every tensor must be listed.
struct PerTensorTopK {
  std::map<std::string, std::size_t> k;
};
/// At most n nonzeros in each consecutive group of m along the last dimension.
struct NM {
  std::size_t n = 2;
  std::size_t m = 4;
};
/// Externally supplied per-tensor budgets; unlisted tensors stay dense.
struct NonUniform {
  std::map<std::string, std::size_t> k;
};

struct SparsityConstraint {
  std::variant<GlobalTopK, PerTensorTopK, NM, NonUniform> variant;
  TieBreak tie_break = TieBreak::kLowestIndex;

  /// Throws std::invalid_argument when the constraint cannot apply to `layout`.
  void validate(const ParamMap& layout) const;
  /// Exact membership test for the feasible set.
  bool is_satisfied(const ParamMap& p) const;
};

/// Diagonal importance (empirical Fisher) used by the weighted projections.
using ImportanceWeights = ParamMap;

/// Euclidean projection onto {v : ||v||_0 <= k}: keeps the k largest magnitudes.
Tensor project_topk(const Tensor& v, std::size_t k, TieBreak tie = TieBreak::kLowestIndex);

/// Projection in the diagonal norm sum_i w_i (z_i - v_i)^2: keeps the k largest w_i * v_i^2.
/// Negative weights are rejected; all-zero weights fall back to the Euclidean projection.
Tensor project_weighted_topk(const Tensor& v, const Tensor& w, std::size_t k,
                             TieBreak tie = TieBreak::kLowestIndex);

/// N:M projection along the last dimension, optionally scored by w_i * v_i^2.
Tensor project_nm(const Tensor& v, std::size_t n, std::size_t m, const Tensor* w = nullptr,
                  TieBreak tie = TieBreak::kLowestIndex);

/// Dispatches to the variant-specific projection. GlobalTopK ranks scores across
/// all tensors in map order.
ParamMap project_constraint(const ParamMap& vs, const SparsityConstraint& c,
                            const ImportanceWeights* w = nullptr);

}  // namespace elsa
