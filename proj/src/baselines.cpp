#include "elsa/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "elsa/optim.hpp"
#include "elsa/oracle.hpp"

namespace elsa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix to_matrix(const Tensor& w) {
  if (w.shape().size() != 2) throw ShapeError("expected a 2-D weight matrix");
  return Eigen::Map<const RowMatrix>(w.raw(), static_cast<Eigen::Index>(w.shape()[0]),
                                     static_cast<Eigen::Index>(w.shape()[1]));
}

Tensor from_matrix(const RowMatrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMatrix>(t.raw(), m.rows(), m.cols()) = m;
  return t;
}

}  // namespace

ParamMap magnitude_prune(const ParamMap& params, const SparsityConstraint& constraint) {
  return project_constraint(params, constraint);
}

IhtResult iht_run(Objective& obj, const SparsityConstraint& constraint, double step_size, std::int64_t steps,
                  const ParamMap& x0, std::uint64_t seed, std::int64_t record_every) {
  if (!(step_size > 0.0)) throw std::invalid_argument("iht_run: step_size must be positive");
  constraint.validate(x0);
  IhtResult res{project_constraint(x0, constraint), false, {}, {}};
  Rng rng(seed);
  const double d = static_cast<double>(total_size(x0));
  auto record = [&](std::int64_t step) {
    RoundRecord r;
    r.round = static_cast<std::int64_t>(res.records.size()) + 1;
    r.inner_step = step;
    r.loss_x = r.loss_z = r.aug_lagrangian = obj.eval_reference(res.x);
    r.sparsity_achieved = d == 0.0 ? 0.0 : 1.0 - static_cast<double>(norms(res.x).l0) / d;
    r.lam = 1.0 / step_size;
    r.lr = step_size;
    res.records.push_back(r);
  };
  for (std::int64_t t = 0; t < steps; ++t) {
    if (obj.stochastic()) obj.resample(rng);
    auto [loss, g] = obj.eval_grad(res.x);
    if (!std::isfinite(loss) || !all_finite(g)) {
      res.aborted = true;
      res.error = "non-finite loss at IHT step " + std::to_string(t);
      break;
    }
    res.x = project_constraint(axpy(-step_size, g, res.x), constraint);
    if (record_every > 0 && ((t + 1) % record_every == 0 || t + 1 == steps)) record(t + 1);
  }
  return res;
}

ParamMap iterative_magnitude_prune(Objective& obj, const ParamMap& x0, std::size_t final_k, std::int64_t stages,
                                   std::int64_t steps_per_stage, double lr, std::uint64_t seed) {
  if (stages < 1) throw std::invalid_argument("iterative_magnitude_prune: stages must be >= 1");
  if (steps_per_stage < 0) throw std::invalid_argument("iterative_magnitude_prune: negative step count");
  const std::size_t d = total_size(x0);
  if (final_k > d) throw std::invalid_argument("iterative_magnitude_prune: final_k exceeds parameter count");
  ParamMap x = x0;
  Rng rng(seed);
  AdamState adam = AdamState::init(x0, lr);
  for (std::int64_t s = 1; s <= stages; ++s) {
    const double frac = static_cast<double>(s) / static_cast<double>(stages);
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(d) - frac * static_cast<double>(d - final_k)));
    x = project_constraint(x, SparsityConstraint{GlobalTopK{k}, TieBreak::kLowestIndex});
    ParamMap mask = x;
    for (auto& [id, t] : mask)
      for (double& v : t.values()) v = v != 0.0 ? 1.0 : 0.0;
    for (std::int64_t i = 0; i < steps_per_stage; ++i) {
      if (obj.stochastic()) obj.resample(rng);
      ParamMap g = obj.grad(x);
      for (auto& [id, t] : g) t = hadamard(t, mask.at(id));
      adam_step(adam, x, g);
      for (auto& [id, t] : x) t = hadamard(t, mask.at(id));
    }
  }
  return x;
}

double layer_reconstruction_error(const Tensor& w, const Tensor& w_ref, const Eigen::MatrixXd& activations) {
  const RowMatrix diff = to_matrix(w) - to_matrix(w_ref);
  return (diff * activations).squaredNorm() / static_cast<double>(activations.cols());
}

std::vector<Tensor> layerwise_rem_prune(const std::vector<Tensor>& weights, const Eigen::MatrixXd& calib_inputs,
                                        const std::vector<std::size_t>& per_layer_k, Activation activation) {
  if (weights.size() != per_layer_k.size()) throw std::invalid_argument("layerwise_rem_prune: one budget per layer");
  std::vector<Tensor> out;
  out.reserve(weights.size());
  Eigen::MatrixXd acts = calib_inputs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const RowMatrix w = to_matrix(weights[l]);
    if (w.cols() != acts.rows()) throw ShapeError("layerwise_rem_prune: layer input dimension mismatch");
    if (per_layer_k[l] > static_cast<std::size_t>(w.size())) {
      throw std::invalid_argument("layerwise_rem_prune: budget exceeds layer size");
    }

    // Activation-aware saliency |W_ij| * ||a_j||.
    const Eigen::VectorXd act_norm = acts.rowwise().norm();
    Tensor score({static_cast<std::size_t>(w.rows()), static_cast<std::size_t>(w.cols())});
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        score[static_cast<std::size_t>(i * w.cols() + j)] = std::abs(w(i, j)) * act_norm(j);
    const Tensor mask = project_topk(score, per_layer_k[l]);

    // Refit each row on its support against the dense layer's output.
    const Eigen::MatrixXd design = acts.transpose();  // N x in
    const Eigen::MatrixXd target = w * acts;          // out x N
    RowMatrix ws = RowMatrix::Zero(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      std::vector<std::size_t> support;
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (mask[static_cast<std::size_t>(i * w.cols() + j)] != 0.0) support.push_back(static_cast<std::size_t>(j));
      }
      ws.row(i) = restricted_least_squares(design, target.row(i).transpose(), support).transpose();
    }

    Eigen::MatrixXd next = ws * acts;
    if (l + 1 < weights.size()) {
      if (activation == Activation::kTanh) next = next.array().tanh().matrix();
      if (activation == Activation::kRelu) next = next.cwiseMax(0.0);
    }
    acts = std::move(next);
    out.push_back(from_matrix(ws));
  }
  return out;
}

}  // namespace elsa
