#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elsa/objectives.hpp"
#include "elsa/projection.hpp"
#include "elsa/records.hpp"
#include "elsa/tensor.hpp"

namespace elsa {

/// One-shot magnitude pruning: proj_S applied to the dense parameters.
ParamMap magnitude_prune(const ParamMap& params, const SparsityConstraint& constraint);

struct IhtResult {
  ParamMap x;
  bool aborted = false;
  std::string error;
  std::vector<RoundRecord> records;
};

/// Iterative hard thresholding x <- proj_S(x - step_size * grad f(x)), starting
/// from proj_S(x0). Stops early on a non-finite loss. With record_every > 0 a
/// record (x = z, u = 0, lam = 1/step_size) is kept every that many steps and after the last.
IhtResult iht_run(Objective& obj, const SparsityConstraint& constraint, double step_size, std::int64_t steps,
                  const ParamMap& x0, std::uint64_t seed = 0, std::int64_t record_every = 0);

/// Gradual global magnitude pruning with masked Adam fine-tuning. The budget
/// shrinks linearly from dense to `final_k` over `stages`; after each cut the
/// surviving weights train for `steps_per_stage` steps with pruned entries frozen at 0.
ParamMap iterative_magnitude_prune(Objective& obj, const ParamMap& x0, std::size_t final_k, std::int64_t stages,
                                   std::int64_t steps_per_stage, double lr, std::uint64_t seed = 0);

/// Sequential layer-wise reconstruction pruning of a feed-forward chain.
///
/// `weights[l]` is the dense (out x in) matrix of layer l. Layer l sees the
/// calibration activations produced by the already-pruned layers before it.
/// Each weight is scored by |W_ij| * ||a_j||_2, the top per_layer_k[l] are kept,
/// and each output row is refit by least squares against the dense layer's
/// output on the same activations. `activation` is applied between layers.
std::vector<Tensor> layerwise_rem_prune(const std::vector<Tensor>& weights, const Eigen::MatrixXd& calib_inputs,
                                        const std::vector<std::size_t>& per_layer_k,
                                        Activation activation = Activation::kIdentity);

/// ||W A - W_ref A||_F^2 / N for column-wise activations A.
double layer_reconstruction_error(const Tensor& w, const Tensor& w_ref, const Eigen::MatrixXd& activations);

}  // namespace elsa
