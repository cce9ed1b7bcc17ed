#include "elsa/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace elsa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const Eigen::VectorXd> as_vec(const Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

Tensor from_vec(const Eigen::VectorXd& v) {
  return Tensor::vector(std::vector<double>(v.data(), v.data() + v.size()));
}

const Tensor& single(const ParamMap& p, const char* id, std::size_t d) {
  auto it = p.find(id);
  if (it == p.end() || p.size() != 1) throw ShapeError(std::string("expected a single parameter '") + id + "'");
  if (it->second.size() != d) throw ShapeError(std::string("parameter '") + id + "' has wrong size");
  return it->second;
}

Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  // Fill row by row so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

void write_csv_row(std::ofstream& os, std::size_t id, const Eigen::VectorXd& features,
                   const Eigen::VectorXd& targets) {
  os << id;
  for (Eigen::Index j = 0; j < features.size(); ++j) os << ',' << features(j);
  for (Eigen::Index j = 0; j < targets.size(); ++j) os << ',' << targets(j);
  os << '\n';
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  return os;
}

}  // namespace

// --- quadratic -------------------------------------------------------------

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size()) throw ShapeError("quadratic: A must be d x d with b of size d");
  const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, a_.cwiseAbs().maxCoeff())) throw std::invalid_argument("quadratic: A not symmetric");
}

ParamMap QuadraticObjective::param_template() const { return wrap(Tensor({dim()})); }

double QuadraticObjective::eval(const ParamMap& params) const {
  const auto x = as_vec(single(params, "x", dim()));
  return 0.5 * x.dot(a_ * x) - b_.dot(x);
}

ParamMap QuadraticObjective::grad(const ParamMap& params) const {
  const auto x = as_vec(single(params, "x", dim()));
  return wrap(from_vec(a_ * x - b_));
}

Tensor QuadraticObjective::xstar_prox(const Tensor& z, const Tensor& u, double lam) const {
  require_same_shape(z, u, "xstar_prox");
  const Eigen::MatrixXd m = a_ + lam * Eigen::MatrixXd::Identity(a_.rows(), a_.cols());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw std::domain_error("xstar_prox: A + lam I is singular");
  const Eigen::VectorXd rhs = b_ + lam * (as_vec(z) - as_vec(u));
  return from_vec(lu.solve(rhs));
}

std::optional<ParamMap> QuadraticObjective::prox(const ParamMap& z, const ParamMap& u, double lam) const {
  return wrap(xstar_prox(single(z, "x", dim()), single(u, "x", dim()), lam));
}

QuadraticConstants quadratic_constants(const QuadraticObjective& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.a(), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.cwiseAbs().maxCoeff(), std::max(0.0, -ev.minCoeff())};
}

QuadraticObjective make_random_quadratic(Rng& rng, std::size_t d, double cond, bool rotate) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::VectorXd eig(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eig(i) = d > 1 ? std::pow(cond, static_cast<double>(i) / static_cast<double>(d - 1)) : 1.0;
  }
  for (Eigen::Index i = n - 1; i > 0; --i) std::swap(eig(i), eig(static_cast<Eigen::Index>(rng.below(i + 1))));
  Eigen::MatrixXd a;
  if (rotate) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(rng, n, n));
    const Eigen::MatrixXd q = qr.householderQ();
    a = q * eig.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose());
  } else {
    a = eig.asDiagonal();
  }
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) target(i) = rng.normal();
  Eigen::VectorXd b = a * target;
  return QuadraticObjective(std::move(a), std::move(b));
}

// --- least squares ---------------------------------------------------------

LeastSquaresObjective::LeastSquaresObjective(Eigen::MatrixXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.size() || x_.rows() == 0) throw ShapeError("least squares: X rows must match y");
}

ParamMap LeastSquaresObjective::param_template() const {
  return {{"w", Tensor({static_cast<std::size_t>(x_.cols())})}};
}

double LeastSquaresObjective::eval(const ParamMap& params) const {
  const auto w = as_vec(single(params, "w", static_cast<std::size_t>(x_.cols())));
  return (x_ * w - y_).squaredNorm() / (2.0 * static_cast<double>(x_.rows()));
}

ParamMap LeastSquaresObjective::grad(const ParamMap& params) const {
  const auto w = as_vec(single(params, "w", static_cast<std::size_t>(x_.cols())));
  const Eigen::VectorXd g = x_.transpose() * (x_ * w - y_) / static_cast<double>(x_.rows());
  return {{"w", from_vec(g)}};
}

std::optional<ParamMap> LeastSquaresObjective::prox(const ParamMap& z, const ParamMap& u, double lam) const {
  const auto d = static_cast<std::size_t>(x_.cols());
  const double n = static_cast<double>(x_.rows());
  const Eigen::MatrixXd m = x_.transpose() * x_ / n + lam * Eigen::MatrixXd::Identity(x_.cols(), x_.cols());
  const Eigen::VectorXd rhs = x_.transpose() * y_ / n + lam * (as_vec(single(z, "w", d)) - as_vec(single(u, "w", d)));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw std::domain_error("least squares prox: system is singular");
  return ParamMap{{"w", from_vec(lu.solve(rhs))}};
}

void LeastSquaresObjective::export_csv(const std::string& path) const {
  auto os = open_csv(path);
  os << "id";
  for (Eigen::Index j = 0; j < x_.cols(); ++j) os << ",x" << j;
  os << ",target\n";
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    write_csv_row(os, static_cast<std::size_t>(i), x_.row(i).transpose(), y_.segment(i, 1));
  }
}

SparseRegressionInstance sparse_regression_make(Rng& rng, std::size_t n, std::size_t d, std::size_t k_true,
                                                double noise_std) {
  if (k_true > d) throw std::invalid_argument("sparse_regression_make: k_true > d");
  const Eigen::MatrixXd x = gaussian_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));

  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i < k_true; ++i) std::swap(perm[i], perm[i + rng.below(d - i)]);
  std::vector<std::size_t> support(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k_true));
  std::sort(support.begin(), support.end());

  Tensor w_true({d});
  for (std::size_t i : support) {
    const double mag = rng.uniform(1.0, 2.0);
    w_true[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  Eigen::VectorXd y = x * as_vec(w_true);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise_std * rng.normal();
  return {std::make_shared<LeastSquaresObjective>(x, std::move(y)), std::move(w_true), std::move(support)};
}

// --- logistic --------------------------------------------------------------

LogisticObjective::LogisticObjective(Eigen::MatrixXd x, Eigen::VectorXd labels)
    : x_(std::move(x)), labels_(std::move(labels)) {
  if (x_.rows() != labels_.size() || x_.rows() == 0) throw ShapeError("logistic: X rows must match labels");
}

ParamMap LogisticObjective::param_template() const {
  return {{"w", Tensor({static_cast<std::size_t>(x_.cols())})}};
}

double LogisticObjective::eval(const ParamMap& params) const {
  const auto w = as_vec(single(params, "w", static_cast<std::size_t>(x_.cols())));
  const Eigen::VectorXd t = x_ * w;
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    // log(1 + e^t) - y t, evaluated without overflow.
    const double ti = t(i);
    s += std::max(ti, 0.0) + std::log1p(std::exp(-std::abs(ti))) - labels_(i) * ti;
  }
  return s / static_cast<double>(t.size());
}

ParamMap LogisticObjective::grad(const ParamMap& params) const {
  const auto w = as_vec(single(params, "w", static_cast<std::size_t>(x_.cols())));
  Eigen::VectorXd r = x_ * w;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double ti = r(i);
    const double p = ti >= 0 ? 1.0 / (1.0 + std::exp(-ti)) : std::exp(ti) / (1.0 + std::exp(ti));
    r(i) = p - labels_(i);
  }
  return {{"w", from_vec(x_.transpose() * r / static_cast<double>(r.size()))}};
}

LogisticObjective make_logistic(Rng& rng, std::size_t n, std::size_t d, std::size_t k_true) {
  auto inst = sparse_regression_make(rng, n, d, k_true, 0.0);
  Eigen::VectorXd labels(static_cast<Eigen::Index>(n));
  const Eigen::VectorXd t = inst.objective->x() * as_vec(inst.w_true);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-t(i)));
    labels(i) = rng.uniform() < p ? 1.0 : 0.0;
  }
  return LogisticObjective(inst.objective->x(), std::move(labels));
}

// --- MLP -------------------------------------------------------------------

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(MlpLoss l) { return l == MlpLoss::kMse ? "mse" : "cross_entropy"; }

MlpLoss mlp_loss_from_string(const std::string& s) {
  if (s == "mse") return MlpLoss::kMse;
  if (s == "cross_entropy") return MlpLoss::kCrossEntropy;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

namespace {

std::string weight_id(std::size_t l) { return "layer" + std::to_string(l) + ".weight"; }
std::string bias_id(std::size_t l) { return "layer" + std::to_string(l) + ".bias"; }

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kIdentity: break;
  }
}

// Derivative expressed through the activation output h = act(z).
Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& h) {
  switch (a) {
    case Activation::kTanh: return (1.0 - h.array().square()).matrix();
    case Activation::kRelu: return (h.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity: break;
  }
  return Eigen::MatrixXd::Ones(h.rows(), h.cols());
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    const Eigen::VectorXd e = (logits.col(j).array() - mx).exp().matrix();
    p.col(j) = e / e.sum();
  }
  return p;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

}  // namespace

MlpObjective::MlpObjective(MlpSpec spec, MlpDataset data) : spec_(std::move(spec)), data_(std::move(data)) {
  if (spec_.dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dimensions");
  const auto in = static_cast<Eigen::Index>(spec_.dims.front());
  if (data_.train_x.rows() != in || data_.test_x.rows() != in) throw ShapeError("mlp: input dimension mismatch");
  const Eigen::Index out_rows = spec_.loss == MlpLoss::kMse ? static_cast<Eigen::Index>(spec_.dims.back()) : 1;
  if (data_.train_y.rows() != out_rows || data_.test_y.rows() != out_rows) {
    throw ShapeError("mlp: target dimension mismatch");
  }
  if (data_.train_x.cols() != data_.train_y.cols() || data_.test_x.cols() != data_.test_y.cols()) {
    throw ShapeError("mlp: sample count mismatch");
  }
  if (data_.train_x.cols() == 0) throw std::invalid_argument("mlp: empty training split");
}

ParamMap MlpObjective::param_template() const {
  ParamMap p;
  for (std::size_t l = 0; l + 1 < spec_.dims.size(); ++l) {
    p.emplace(weight_id(l), Tensor({spec_.dims[l + 1], spec_.dims[l]}));
    if (spec_.bias) p.emplace(bias_id(l), Tensor({spec_.dims[l + 1]}));
  }
  return p;
}

ParamMap MlpObjective::initial_params(Rng& rng) const {
  ParamMap p = param_template();
  for (std::size_t l = 0; l + 1 < spec_.dims.size(); ++l) {
    p[weight_id(l)] = rand_gaussian(rng, {spec_.dims[l + 1], spec_.dims[l]}, 0.0,
                                    1.0 / std::sqrt(static_cast<double>(spec_.dims[l])));
  }
  return p;
}

Eigen::MatrixXd MlpObjective::forward(const ParamMap& params, const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd h = inputs;
  const std::size_t layers = spec_.dims.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params.at(weight_id(l));
    Eigen::Map<const RowMatrix> wm(w.raw(), static_cast<Eigen::Index>(spec_.dims[l + 1]),
                                   static_cast<Eigen::Index>(spec_.dims[l]));
    Eigen::MatrixXd z = wm * h;
    if (spec_.bias) z.colwise() += as_vec(params.at(bias_id(l)));
    if (l + 1 < layers) apply_activation(spec_.activation, z);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd MlpObjective::probabilities(const ParamMap& params, const Eigen::MatrixXd& inputs) const {
  return softmax_columns(forward(params, inputs));
}

double MlpObjective::loss_on(const ParamMap& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                             ParamMap* grad_out) const {
  require_same_layout(params, param_template(), "mlp params");
  const std::size_t layers = spec_.dims.size() - 1;
  const auto batch = static_cast<double>(inputs.cols());

  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input of layer l
  acts.reserve(layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params.at(weight_id(l));
    Eigen::Map<const RowMatrix> wm(w.raw(), static_cast<Eigen::Index>(spec_.dims[l + 1]),
                                   static_cast<Eigen::Index>(spec_.dims[l]));
    Eigen::MatrixXd z = wm * acts.back();
    if (spec_.bias) z.colwise() += as_vec(params.at(bias_id(l)));
    if (l + 1 < layers) apply_activation(spec_.activation, z);
    acts.push_back(std::move(z));
  }
  const Eigen::MatrixXd& out = acts.back();

  double loss = 0.0;
  Eigen::MatrixXd delta;
  if (spec_.loss == MlpLoss::kMse) {
    const Eigen::MatrixXd diff = out - targets;
    loss = 0.5 * diff.squaredNorm() / batch;
    if (grad_out) delta = diff / batch;
  } else {
    Eigen::MatrixXd p = softmax_columns(out);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const auto cls = static_cast<Eigen::Index>(targets(0, j));
      const double mx = out.col(j).maxCoeff();
      const double lse = mx + std::log((out.col(j).array() - mx).exp().sum());
      loss += lse - out(cls, j);
      p(cls, j) -= 1.0;
    }
    loss /= batch;
    if (grad_out) delta = p / batch;
  }
  if (!grad_out) return loss;

  ParamMap g = param_template();
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd gw = delta * acts[l].transpose();
    Tensor& gwt = g.at(weight_id(l));
    Eigen::Map<RowMatrix>(gwt.raw(), gw.rows(), gw.cols()) = gw;
    if (spec_.bias) {
      Tensor& gbt = g.at(bias_id(l));
      Eigen::Map<Eigen::VectorXd>(gbt.raw(), delta.rows()) = delta.rowwise().sum();
    }
    if (l > 0) {
      const Tensor& w = params.at(weight_id(l));
      Eigen::Map<const RowMatrix> wm(w.raw(), static_cast<Eigen::Index>(spec_.dims[l + 1]),
                                     static_cast<Eigen::Index>(spec_.dims[l]));
      delta = (wm.transpose() * delta).cwiseProduct(activation_derivative(spec_.activation, acts[l]));
    }
  }
  *grad_out = std::move(g);
  return loss;
}

const Eigen::MatrixXd& MlpObjective::batch_x() const { return has_batch_ ? bx_ : data_.train_x; }
const Eigen::MatrixXd& MlpObjective::batch_y() const { return has_batch_ ? by_ : data_.train_y; }

double MlpObjective::eval(const ParamMap& params) const { return loss_on(params, batch_x(), batch_y(), nullptr); }

ParamMap MlpObjective::grad(const ParamMap& params) const { return eval_grad(params).second; }

std::pair<double, ParamMap> MlpObjective::eval_grad(const ParamMap& params) const {
  ParamMap g;
  const double loss = loss_on(params, batch_x(), batch_y(), &g);
  return {loss, std::move(g)};
}

void MlpObjective::resample(Rng& rng) {
  if (spec_.batch_size == 0) return;
  const auto n = static_cast<std::uint64_t>(data_.train_x.cols());
  std::vector<Eigen::Index> idx(spec_.batch_size);
  for (auto& i : idx) i = static_cast<Eigen::Index>(rng.below(n));
  bx_ = gather_columns(data_.train_x, idx);
  by_ = gather_columns(data_.train_y, idx);
  has_batch_ = true;
}

double MlpObjective::eval_train(const ParamMap& params) const {
  return loss_on(params, data_.train_x, data_.train_y, nullptr);
}

ParamMap MlpObjective::grad_train(const ParamMap& params) const {
  ParamMap g;
  loss_on(params, data_.train_x, data_.train_y, &g);
  return g;
}

double MlpObjective::eval_heldout(const ParamMap& params) const {
  if (data_.test_x.cols() == 0) return eval_train(params);
  return loss_on(params, data_.test_x, data_.test_y, nullptr);
}

void MlpObjective::export_csv(const std::string& path) const {
  auto os = open_csv(path);
  os << "id,split";
  for (Eigen::Index j = 0; j < data_.train_x.rows(); ++j) os << ",x" << j;
  for (Eigen::Index j = 0; j < data_.train_y.rows(); ++j) os << ",target" << j;
  os << '\n';
  std::size_t id = 0;
  auto dump = [&](const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, const char* split) {
    for (Eigen::Index i = 0; i < xs.cols(); ++i) {
      os << id++ << ',' << split;
      for (Eigen::Index j = 0; j < xs.rows(); ++j) os << ',' << xs(j, i);
      for (Eigen::Index j = 0; j < ys.rows(); ++j) os << ',' << ys(j, i);
      os << '\n';
    }
  };
  dump(data_.train_x, data_.train_y, "train");
  dump(data_.test_x, data_.test_y, "test");
}

MlpObjective make_teacher_student(Rng& rng, const MlpSpec& spec, std::size_t n_samples, ParamMap* teacher_out) {
  MlpSpec full = spec;
  full.batch_size = 0;
  const auto in = static_cast<Eigen::Index>(spec.dims.front());
  const auto n = static_cast<Eigen::Index>(n_samples);
  const Eigen::MatrixXd x = gaussian_matrix(rng, in, n);

  // The teacher shares the architecture; a placeholder dataset lets us reuse forward().
  MlpDataset probe;
  probe.train_x = x.leftCols(1);
  probe.test_x = x.leftCols(0);
  const Eigen::Index out_rows = spec.loss == MlpLoss::kMse ? static_cast<Eigen::Index>(spec.dims.back()) : 1;
  probe.train_y = Eigen::MatrixXd::Zero(out_rows, 1);
  probe.test_y = Eigen::MatrixXd::Zero(out_rows, 0);
  const MlpObjective teacher_net(full, probe);
  ParamMap teacher = teacher_net.initial_params(rng);
  if (spec.bias) {
    for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l) {
      teacher[bias_id(l)] = rand_gaussian(rng, {spec.dims[l + 1]}, 0.0, 0.1);
    }
  }
  const Eigen::MatrixXd out = teacher_net.forward(teacher, x);
  Eigen::MatrixXd y;
  if (spec.loss == MlpLoss::kMse) {
    y = out;
  } else {
    y.resize(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index arg = 0;
      out.col(j).maxCoeff(&arg);
      y(0, j) = static_cast<double>(arg);
    }
  }

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  std::vector<Eigen::Index> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  MlpDataset data{gather_columns(x, tr), gather_columns(y, tr), gather_columns(x, te), gather_columns(y, te)};
  if (teacher_out) *teacher_out = std::move(teacher);
  return MlpObjective(spec, std::move(data));
}

// --- verification ----------------------------------------------------------

double grad_check(const Objective& obj, const ParamMap& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
  const ParamMap g = obj.grad(x);
  double worst = 0.0;
  ParamMap probe = x;
  for (auto& [id, t] : probe) {
    const Tensor& gt = g.at(id);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + h;
      const double fp = obj.eval(probe);
      t[i] = orig - h;
      const double fm = obj.eval(probe);
      t[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - gt[i]) / std::max(1.0, std::abs(gt[i])));
    }
  }
  return worst;
}

}  // namespace elsa
