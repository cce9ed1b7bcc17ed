#include "elsa/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace elsa {

std::string to_string(TieBreak t) {
  return t == TieBreak::kLowestIndex ? "lowest_index" : "highest_index";
}

TieBreak tie_break_from_string(const std::string& s) {
  if (s == "lowest_index") return TieBreak::kLowestIndex;
  if (s == "highest_index") return TieBreak::kHighestIndex;
  throw std::invalid_argument("unknown tie_break '" + s + "'");
}

namespace {

// A coordinate competing for a slot in the support. Magnitude is the
// secondary key so that uniform weights order exactly like the Euclidean case.
struct Candidate {
  double score;
  double magnitude;
  std::size_t index;
};

struct Better {
  TieBreak tie;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score > b.score;
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return tie == TieBreak::kLowestIndex ? a.index < b.index : a.index > b.index;
  }
};

// Indices of the k best candidates (exact order statistic).
std::vector<std::size_t> select_best(std::vector<Candidate> cands, std::size_t k, TieBreak tie) {
  k = std::min(k, cands.size());
  if (k < cands.size()) {
    std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), Better{tie});
  }
  std::vector<std::size_t> idx;
  idx.reserve(k);
  for (std::size_t i = 0; i < k; ++i) idx.push_back(cands[i].index);
  return idx;
}

void check_weights(const Tensor& v, const Tensor& w) {
  require_same_shape(v, w, "weighted projection");
  for (double x : w.values()) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("importance weights must be finite and non-negative");
    }
  }
}

bool all_zero(const Tensor& w) {
  return std::all_of(w.values().begin(), w.values().end(), [](double x) { return x == 0.0; });
}

double score_of(double v, const Tensor* w, std::size_t i) {
  return w ? (*w)[i] * v * v : std::abs(v);
}

Tensor keep_only(const Tensor& v, const std::vector<std::size_t>& keep) {
  Tensor out(v.shape());
  for (std::size_t i : keep) out[i] = v[i];
  return out;
}

Tensor project_scored(const Tensor& v, const Tensor* w, std::size_t k, TieBreak tie) {
  if (k > v.size()) {
    throw std::invalid_argument("projection budget k=" + std::to_string(k) + " exceeds dimension " +
                                std::to_string(v.size()));
  }
  std::vector<Candidate> cands;
  cands.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) cands.push_back({score_of(v[i], w, i), std::abs(v[i]), i});
  return keep_only(v, select_best(std::move(cands), k, tie));
}

}  // namespace

Tensor project_topk(const Tensor& v, std::size_t k, TieBreak tie) { return project_scored(v, nullptr, k, tie); }

Tensor project_weighted_topk(const Tensor& v, const Tensor& w, std::size_t k, TieBreak tie) {
  check_weights(v, w);
  return project_scored(v, all_zero(w) ? nullptr : &w, k, tie);
}

Tensor project_nm(const Tensor& v, std::size_t n, std::size_t m, const Tensor* w, TieBreak tie) {
  if (n == 0 || m == 0 || n > m) throw std::invalid_argument("N:M requires 0 < n <= m");
  if (v.last_dim() % m != 0) {
    throw std::invalid_argument("N:M: last dimension " + std::to_string(v.last_dim()) + " not divisible by m=" +
                                std::to_string(m));
  }
  if (w) {
    check_weights(v, *w);
    if (all_zero(*w)) w = nullptr;
  }
  Tensor out(v.shape());
  // Row-major layout with last_dim % m == 0 puts every group contiguously.
  for (std::size_t start = 0; start < v.size(); start += m) {
    std::vector<Candidate> group;
    group.reserve(m);
    for (std::size_t i = start; i < start + m; ++i) group.push_back({score_of(v[i], w, i), std::abs(v[i]), i});
    for (std::size_t i : select_best(std::move(group), n, tie)) out[i] = v[i];
  }
  return out;
}

void SparsityConstraint::validate(const ParamMap& layout) const {
  auto check_map = [&](const std::map<std::string, std::size_t>& ks, bool require_all) {
    for (const auto& [id, k] : ks) {
      auto it = layout.find(id);
      if (it == layout.end()) throw std::invalid_argument("sparsity budget for unknown tensor '" + id + "'");
      if (k > it->second.size()) {
        throw std::invalid_argument("budget " + std::to_string(k) + " for tensor '" + id + "' exceeds its " +
                                    std::to_string(it->second.size()) + " entries");
      }
    }
    if (require_all) {
      for (const auto& [id, t] : layout) {
        if (!ks.contains(id)) throw std::invalid_argument("no per-tensor budget for tensor '" + id + "'");
      }
    }
  };
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, GlobalTopK>) {
          if (c.k > total_size(layout)) throw std::invalid_argument("global budget k exceeds parameter count");
        } else if constexpr (std::is_same_v<C, PerTensorTopK>) {
          check_map(c.k, true);
        } else if constexpr (std::is_same_v<C, NonUniform>) {
          check_map(c.k, false);
        } else {
          if (c.n == 0 || c.n > c.m) throw std::invalid_argument("N:M requires 0 < n <= m");
          for (const auto& [id, t] : layout) {
            if (t.last_dim() % c.m != 0) {
              throw std::invalid_argument("N:M: tensor '" + id + "' last dimension not divisible by m");
            }
          }
        }
      },
      variant);
}

bool SparsityConstraint::is_satisfied(const ParamMap& p) const {
  auto within = [&](const std::map<std::string, std::size_t>& ks, bool require_all) {
    for (const auto& [id, t] : p) {
      auto it = ks.find(id);
      if (it == ks.end()) {
        if (require_all) return false;
        continue;
      }
      if (norms(t).l0 > it->second) return false;
    }
    return true;
  };
  return std::visit(
      [&](const auto& c) -> bool {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, GlobalTopK>) {
          return norms(p).l0 <= c.k;
        } else if constexpr (std::is_same_v<C, PerTensorTopK>) {
          return within(c.k, true);
        } else if constexpr (std::is_same_v<C, NonUniform>) {
          return within(c.k, false);
        } else {
          for (const auto& [id, t] : p) {
            if (t.last_dim() % c.m != 0) return false;
            for (std::size_t start = 0; start < t.size(); start += c.m) {
              std::size_t nnz = 0;
              for (std::size_t i = start; i < start + c.m; ++i) nnz += t[i] != 0.0;
              if (nnz > c.n) return false;
            }
          }
          return true;
        }
      },
      variant);
}

namespace {

ParamMap project_global(const ParamMap& vs, std::size_t k, const ImportanceWeights* w, TieBreak tie) {
  const bool weighted = w && std::any_of(w->begin(), w->end(), [](const auto& kv) { return !all_zero(kv.second); });
  std::vector<Candidate> cands;
  cands.reserve(total_size(vs));
  std::size_t offset = 0;
  for (const auto& [id, t] : vs) {
    const Tensor* wt = nullptr;
    if (weighted) {
      wt = &w->at(id);
      check_weights(t, *wt);
    }
    for (std::size_t i = 0; i < t.size(); ++i) cands.push_back({score_of(t[i], wt, i), std::abs(t[i]), offset + i});
    offset += t.size();
  }
  if (k > cands.size()) throw std::invalid_argument("global budget k exceeds parameter count");
  std::vector<char> keep(cands.size(), 0);
  for (std::size_t i : select_best(std::move(cands), k, tie)) keep[i] = 1;

  ParamMap out;
  offset = 0;
  for (const auto& [id, t] : vs) {
    Tensor o(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (keep[offset + i]) o[i] = t[i];
    }
    offset += t.size();
    out.emplace(id, std::move(o));
  }
  return out;
}

const Tensor* weight_for(const ImportanceWeights* w, const std::string& id) {
  if (!w) return nullptr;
  auto it = w->find(id);
  if (it == w->end()) throw std::invalid_argument("missing importance weights for tensor '" + id + "'");
  return &it->second;
}

ParamMap project_per_tensor(const ParamMap& vs, const std::map<std::string, std::size_t>& ks, bool require_all,
                            const ImportanceWeights* w, TieBreak tie) {
  for (const auto& [id, k] : ks) {
    if (!vs.contains(id)) throw std::invalid_argument("sparsity budget for unknown tensor '" + id + "'");
  }
  ParamMap out;
  for (const auto& [id, t] : vs) {
    auto it = ks.find(id);
    if (it == ks.end()) {
      if (require_all) throw std::invalid_argument("no per-tensor budget for tensor '" + id + "'");
      out.emplace(id, t);
      continue;
    }
    const Tensor* wt = weight_for(w, id);
    out.emplace(id, wt ? project_weighted_topk(t, *wt, it->second, tie) : project_topk(t, it->second, tie));
  }
  return out;
}

}  // namespace

ParamMap project_constraint(const ParamMap& vs, const SparsityConstraint& c, const ImportanceWeights* w) {
  if (w) require_same_layout(vs, *w, "project_constraint weights");
  return std::visit(
      [&](const auto& v) -> ParamMap {
        using C = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<C, GlobalTopK>) {
          return project_global(vs, v.k, w, c.tie_break);
        } else if constexpr (std::is_same_v<C, PerTensorTopK>) {
          return project_per_tensor(vs, v.k, true, w, c.tie_break);
        } else if constexpr (std::is_same_v<C, NonUniform>) {
          return project_per_tensor(vs, v.k, false, w, c.tie_break);
        } else {
          ParamMap out;
          for (const auto& [id, t] : vs) out.emplace(id, project_nm(t, v.n, v.m, weight_for(w, id), c.tie_break));
          return out;
        }
      },
      c.variant);
}

}  // namespace elsa
