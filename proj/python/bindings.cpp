#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "elsa/admm.hpp"
#include "elsa/analysis.hpp"
#include "elsa/harness.hpp"
#include "elsa/oracle.hpp"
#include "elsa/projection.hpp"
#include "elsa/quantization.hpp"

namespace py = pybind11;
using namespace elsa;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict record_dict(const RoundRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["inner_step"] = r.inner_step;
  d["loss_x"] = r.loss_x;
  d["loss_z"] = r.loss_z;
  d["primal_residual_l2"] = r.primal_residual_l2;
  d["aug_lagrangian"] = r.aug_lagrangian;
  d["sparsity_achieved"] = r.sparsity_achieved;
  d["lam"] = r.lam;
  d["lr"] = r.lr;
  d["quant_err_u_linf"] = r.quant_err_u_linf;
  d["quant_err_z_linf"] = r.quant_err_z_linf;
  return d;
}

template <class T>
py::object opt(const std::optional<T>& v) {
  return v ? py::cast(*v) : py::none();
}

// Solver settings from keyword arguments; unknown keys are an error.
SolverConfig solver_from_kwargs(std::size_t k, const py::kwargs& kw) {
  SolverConfig cfg;
  cfg.constraint.variant = GlobalTopK{k};
  for (const auto& [key_obj, val] : kw) {
    const auto key = key_obj.cast<std::string>();
    if (key == "lam_max") cfg.lam_max = val.cast<double>();
    else if (key == "lam_schedule") cfg.lam_schedule = schedule_kind_from_string(val.cast<std::string>());
    else if (key == "lr") cfg.lr = val.cast<double>();
    else if (key == "lr_schedule") cfg.lr_schedule = schedule_kind_from_string(val.cast<std::string>());
    else if (key == "lr_end") cfg.lr_end = val.cast<double>();
    else if (key == "interval") cfg.interval = val.cast<std::int64_t>();
    else if (key == "total_inner_steps") cfg.total_inner_steps = val.cast<std::int64_t>();
    else if (key == "projection_mode") cfg.projection_mode = projection_mode_from_string(val.cast<std::string>());
    else if (key == "x_update") cfg.x_update = x_update_from_string(val.cast<std::string>());
    else if (key == "order") cfg.order = update_order_from_string(val.cast<std::string>());
    else if (key == "seed") cfg.seed = val.cast<std::uint64_t>();
    else if (key == "tie_break") cfg.constraint.tie_break = tie_break_from_string(val.cast<std::string>());
    else if (key == "quant") {
      if (val.is_none()) {
        cfg.quant.reset();
      } else {
        const auto names = val.cast<std::pair<std::string, std::string>>();
        cfg.quant = QuantConfig{QuantFormat::from_name(names.first), QuantFormat::from_name(names.second)};
      }
    } else {
      throw py::type_error("unexpected solver option '" + key + "'");
    }
  }
  return cfg;
}

py::dict run_dict(Objective& obj, const SolverConfig& cfg, const std::string& id) {
  const RunResult res = run(obj, cfg, obj.param_template());
  py::list records;
  for (const auto& r : res.records) records.append(record_dict(r));
  py::dict d;
  d["z"] = to_array(res.state.z.at(id));
  d["x"] = to_array(res.state.x.at(id));
  d["u"] = to_array(res.state.u.at(id));
  d["loss"] = obj.eval(res.state.z);
  d["records"] = records;
  d["aborted"] = res.aborted;
  d["error"] = res.error;
  return d;
}

py::dict row_dict(const SummaryRow& r) {
  py::dict d;
  d["method"] = to_string(r.method);
  d["sparsity"] = r.sparsity;
  d["seed"] = r.seed;
  d["heldout_loss"] = r.heldout_loss;
  d["train_loss"] = r.train_loss;
  d["achieved_sparsity"] = r.achieved_sparsity;
  d["stationarity_residual"] = r.stationarity_residual;
  d["stationary"] = r.stationary;
  d["corollary1"] = opt(r.corollary1);
  d["theorem2"] = opt(r.theorem2);
  d["descent_monotone"] = opt(r.descent_monotone);
  d["aborted"] = r.aborted;
  d["error"] = r.error;
  d["jsonl"] = r.jsonl;
  return d;
}

}  // namespace

PYBIND11_MODULE(_elsa, m) {
  m.doc() = "Sparsity-constrained ADMM: projections, quantization, solver and experiment harness.";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GuardError>(m, "GuardError", PyExc_ValueError);

  // projections
  m.def(
      "project_topk",
      [](const Array& v, std::size_t k, const std::string& tie) {
        return to_array(project_topk(to_tensor(v), k, tie_break_from_string(tie)));
      },
      py::arg("v"), py::arg("k"), py::arg("tie_break") = "lowest_index",
      "Keep the k largest-magnitude entries.");
  m.def(
      "project_weighted_topk",
      [](const Array& v, const Array& w, std::size_t k, const std::string& tie) {
        return to_array(project_weighted_topk(to_tensor(v), to_tensor(w), k, tie_break_from_string(tie)));
      },
      py::arg("v"), py::arg("w"), py::arg("k"), py::arg("tie_break") = "lowest_index",
      "Keep the k entries with the largest w * v**2.");
  m.def(
      "project_nm",
      [](const Array& v, std::size_t n, std::size_t mm, std::optional<Array> w, const std::string& tie) {
        const Tensor t = to_tensor(v);
        if (w) {
          const Tensor wt = to_tensor(*w);
          return to_array(project_nm(t, n, mm, &wt, tie_break_from_string(tie)));
        }
        return to_array(project_nm(t, n, mm, nullptr, tie_break_from_string(tie)));
      },
      py::arg("v"), py::arg("n"), py::arg("m"), py::arg("w") = py::none(), py::arg("tie_break") = "lowest_index",
      "At most n nonzeros per group of m along the last axis.");

  // quantization
  m.def(
      "quantize",
      [](const Array& z, const std::string& fmt) {
        const auto q = quantize(to_tensor(z), QuantFormat::from_name(fmt));
        py::dict d;
        d["codes"] = to_array(Tensor(q.shape, q.codes));
        d["scale"] = q.scale;
        d["absmax"] = q.absmax;
        return d;
      },
      py::arg("z"), py::arg("format"));
  m.def(
      "quant_roundtrip",
      [](const Array& z, const std::string& fmt) {
        return to_array(quant_roundtrip(to_tensor(z), QuantFormat::from_name(fmt)));
      },
      py::arg("z"), py::arg("format"));
  m.def(
      "quant_roundtrip_error",
      [](const Array& z, const std::string& fmt) {
        const auto e = quant_roundtrip_error(to_tensor(z), QuantFormat::from_name(fmt));
        return py::make_tuple(e.linf, e.l2);
      },
      py::arg("z"), py::arg("format"), "(linf, l2) of z - dequantize(quantize(z)).");

  // theory
  m.def(
      "check_corollary1", [](double b, double mu, double lam) { return check_corollary1({b, mu, lam, 0.0}); },
      py::arg("beta"), py::arg("mu"), py::arg("lam"));
  m.def(
      "check_theorem2", [](double b, double mu, double lam, double g) { return check_theorem2({b, mu, lam, g}); },
      py::arg("beta"), py::arg("mu"), py::arg("lam"), py::arg("gamma"));
  m.def(
      "theorem2_lhs", [](double b, double mu, double lam, double g) { return theorem2_lhs({b, mu, lam, g}); },
      py::arg("beta"), py::arg("mu"), py::arg("lam"), py::arg("gamma"));
  m.def("min_feasible_lambda", &min_feasible_lambda, py::arg("beta"), py::arg("mu"), py::arg("gamma"),
        py::arg("search_hi") = 1e6);
  m.def(
      "check",
      [](double b, double mu, double g, double lam) {
        const auto r = check_conditions({b, mu, lam, g});
        py::dict d;
        d["corollary1"] = r.corollary1;
        d["theorem2"] = r.theorem2;
        d["lambda_min_feasible"] = opt(r.lambda_min_feasible);
        d["satisfied"] = r.satisfied();
        return d;
      },
      py::arg("beta"), py::arg("mu"), py::arg("gamma"), py::arg("lam"));

  // oracle and data
  m.def(
      "best_subset_ls",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k) {
        const auto r = best_subset_ls(x, y, k);
        return py::make_tuple(r.support, r.weights, r.loss);
      },
      py::arg("X"), py::arg("y"), py::arg("k"), "(support, weights, loss) of exhaustive best-subset least squares.");
  m.def(
      "sparse_regression",
      [](std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k_true, double noise) {
        Rng rng(seed);
        const auto inst = sparse_regression_make(rng, n, d, k_true, noise);
        py::dict out;
        out["X"] = inst.objective->x();
        out["y"] = inst.objective->y();
        out["w_true"] = to_array(inst.w_true);
        out["support"] = inst.support;
        return out;
      },
      py::arg("seed"), py::arg("n"), py::arg("d"), py::arg("k_true"), py::arg("noise"));

  // solver
  m.def(
      "solve_least_squares",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k, const py::kwargs& kw) {
        LeastSquaresObjective f(x, y);
        return run_dict(f, solver_from_kwargs(k, kw), "w");
      },
      py::arg("X"), py::arg("y"), py::arg("k"),
      "Run the solver on 1/(2n)||Xw - y||^2 subject to ||w||_0 <= k. Keyword arguments set solver options.");
  m.def(
      "solve_quadratic",
      [](const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::size_t k, const py::kwargs& kw) {
        QuadraticObjective f(a, b);
        return run_dict(f, solver_from_kwargs(k, kw), "x");
      },
      py::arg("A"), py::arg("b"), py::arg("k"),
      "Run the solver on 1/2 x'Ax - b'x subject to ||x||_0 <= k. Keyword arguments set solver options.");

  // harness
  m.def(
      "normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
      py::arg("text"), "Parse a JSON experiment config strictly and return its canonical form.");
  m.def(
      "run_experiment",
      [](const std::string& text, std::size_t jobs, std::optional<std::string> out) {
        const auto cfg = parse_config(text);
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(cfg, RunOptions{jobs, out});
        }
        py::list rows;
        for (const auto& r : res.rows) rows.append(row_dict(r));
        py::dict d;
        d["rows"] = rows;
        d["out_dir"] = res.out_dir;
        d["any_failed"] = res.any_failed;
        return d;
      },
      py::arg("config_text"), py::arg("jobs") = 1, py::arg("out") = py::none(),
      "Run the experiment grid described by a JSON config string.");
}
