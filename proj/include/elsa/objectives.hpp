#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elsa/tensor.hpp"

namespace elsa {

/// Differentiable objective over a parameter map.
///
/// `eval` and `grad` see the current minibatch; they are deterministic between
/// calls to `resample`. Deterministic objectives ignore `resample`.
class Objective {
 public:
  virtual ~Objective() = default;

  /// Zero-filled map with the ids and shapes of the parameters.
  virtual ParamMap param_template() const = 0;
  virtual double eval(const ParamMap& params) const = 0;
  virtual ParamMap grad(const ParamMap& params) const = 0;
  virtual std::pair<double, ParamMap> eval_grad(const ParamMap& params) const {
    return {eval(params), grad(params)};
  }

  virtual bool stochastic() const { return false; }
  virtual void resample(Rng& /*rng*/) {}

  /// Loss on a fixed batch, comparable across solver rounds.
  virtual double eval_reference(const ParamMap& params) const { return eval(params); }
  /// Loss on the full training split.
  virtual double eval_train(const ParamMap& params) const { return eval(params); }
  /// Gradient on the full training split.
  virtual ParamMap grad_train(const ParamMap& params) const { return grad(params); }
  /// Loss on the held-out split (the training loss when there is no split).
  virtual double eval_heldout(const ParamMap& params) const { return eval_train(params); }

  /// Starting point for solvers.
  virtual ParamMap initial_params(Rng& /*rng*/) const { return param_template(); }

  /// Exact minimizer of f(x) + (lam/2)||x - z + u||^2 when available in closed form.
  virtual std::optional<ParamMap> prox(const ParamMap& /*z*/, const ParamMap& /*u*/, double /*lam*/) const {
    return std::nullopt;
  }
};

// --- quadratic -------------------------------------------------------------

/// f(x) = 1/2 x^T A x - b^T x over a single tensor "x".
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(Eigen::MatrixXd a, Eigen::VectorXd b);

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }

  ParamMap param_template() const override;
  double eval(const ParamMap& params) const override;
  ParamMap grad(const ParamMap& params) const override;
  std::optional<ParamMap> prox(const ParamMap& z, const ParamMap& u, double lam) const override;

  /// Solves (A + lam I) x = b + lam (z - u); throws std::domain_error if singular.
  Tensor xstar_prox(const Tensor& z, const Tensor& u, double lam) const;

  static ParamMap wrap(const Tensor& x) { return {{"x", x}}; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

struct QuadraticConstants {
  double beta = 0.0;  // max |eigenvalue(A)|
  double mu = 0.0;    // max(0, -lambda_min(A))
};

QuadraticConstants quadratic_constants(const QuadraticObjective& q);

/// Symmetric A = Q diag(eig) Q^T with eigenvalues log-spaced in [1, cond] and
/// b = A x_target for a Gaussian x_target. `rotate` draws a random orthogonal Q,
/// otherwise A is diagonal with the eigenvalues in random order.
QuadraticObjective make_random_quadratic(Rng& rng, std::size_t d, double cond, bool rotate);

// --- sparse linear regression ----------------------------------------------

/// f(w) = 1/(2n) ||X w - y||^2 over a single tensor "w".
class LeastSquaresObjective : public Objective {
 public:
  LeastSquaresObjective(Eigen::MatrixXd x, Eigen::VectorXd y);

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }

  ParamMap param_template() const override;
  double eval(const ParamMap& params) const override;
  ParamMap grad(const ParamMap& params) const override;
  std::optional<ParamMap> prox(const ParamMap& z, const ParamMap& u, double lam) const override;

  void export_csv(const std::string& path) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

struct SparseRegressionInstance {
  std::shared_ptr<LeastSquaresObjective> objective;
  Tensor w_true;
  std::vector<std::size_t> support;  // sorted
};

/// Gaussian design, planted k_true-sparse weights with magnitudes in [1, 2] and
/// random signs, y = X w_true + noise_std * N(0, 1).
SparseRegressionInstance sparse_regression_make(Rng& rng, std::size_t n, std::size_t d, std::size_t k_true,
                                                double noise_std);

// --- logistic regression ---------------------------------------------------

/// Mean binary log-loss with labels in {0, 1} over a single tensor "w".
class LogisticObjective : public Objective {
 public:
  LogisticObjective(Eigen::MatrixXd x, Eigen::VectorXd labels);

  ParamMap param_template() const override;
  double eval(const ParamMap& params) const override;
  ParamMap grad(const ParamMap& params) const override;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd labels_;
};

LogisticObjective make_logistic(Rng& rng, std::size_t n, std::size_t d, std::size_t k_true);

// --- MLP -------------------------------------------------------------------

enum class Activation { kTanh, kRelu, kIdentity };
enum class MlpLoss { kMse, kCrossEntropy };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(MlpLoss l);
MlpLoss mlp_loss_from_string(const std::string& s);

struct MlpSpec {
  std::vector<std::size_t> dims{8, 32, 32, 4};  // input, hidden..., output
  Activation activation = Activation::kTanh;
  MlpLoss loss = MlpLoss::kMse;
  bool bias = true;
  std::size_t batch_size = 64;  // 0 = full batch
};

/// Samples are stored column-wise. For cross-entropy the target row holds the class index.
struct MlpDataset {
  Eigen::MatrixXd train_x, train_y;
  Eigen::MatrixXd test_x, test_y;
};

/// Fully connected network: hidden layers use the activation, the output layer is affine.
/// Parameters are "layer<i>.weight" (out x in, row-major) and "layer<i>.bias".
/// mse: mean over samples of 1/2 ||out - target||^2; cross_entropy: mean -log softmax.
class MlpObjective : public Objective {
 public:
  MlpObjective(MlpSpec spec, MlpDataset data);

  const MlpSpec& spec() const { return spec_; }
  const MlpDataset& data() const { return data_; }

  ParamMap param_template() const override;
  double eval(const ParamMap& params) const override;
  ParamMap grad(const ParamMap& params) const override;
  std::pair<double, ParamMap> eval_grad(const ParamMap& params) const override;

  bool stochastic() const override { return spec_.batch_size > 0; }
  void resample(Rng& rng) override;

  double eval_reference(const ParamMap& params) const override { return eval_heldout(params); }
  double eval_train(const ParamMap& params) const override;
  ParamMap grad_train(const ParamMap& params) const override;
  double eval_heldout(const ParamMap& params) const override;

  /// Scaled Gaussian initialization (std = 1/sqrt(fan_in)), zero biases.
  ParamMap initial_params(Rng& rng) const override;

  /// Network outputs for column-wise inputs.
  Eigen::MatrixXd forward(const ParamMap& params, const Eigen::MatrixXd& inputs) const;
  /// Per-sample class probabilities (columns) for cross-entropy networks.
  Eigen::MatrixXd probabilities(const ParamMap& params, const Eigen::MatrixXd& inputs) const;
  /// Loss and optionally gradient on explicit data.
  double loss_on(const ParamMap& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                 ParamMap* grad_out) const;

  void export_csv(const std::string& path) const;

 private:
  const Eigen::MatrixXd& batch_x() const;
  const Eigen::MatrixXd& batch_y() const;

  MlpSpec spec_;
  MlpDataset data_;
  Eigen::MatrixXd bx_, by_;
  bool has_batch_ = false;
};

/// Teacher-student data: Gaussian inputs, targets from a dense random teacher with
/// the same architecture (class argmax for cross-entropy), split 80/20 by seed.
/// The teacher's parameters are returned through `teacher_out` when non-null.
MlpObjective make_teacher_student(Rng& rng, const MlpSpec& spec, std::size_t n_samples,
                                  ParamMap* teacher_out = nullptr);

// --- verification ----------------------------------------------------------

/// Max over coordinates of |central difference - analytic| / max(1, |analytic|).
double grad_check(const Objective& obj, const ParamMap& x, double h);

}  // namespace elsa
