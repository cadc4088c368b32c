#include "koopal/eigensolve.hpp"
#include "koopal/experiments.hpp"
#include "koopal/phase.hpp"
#include "koopal/regression.hpp"
#include "koopal/systems.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace koopal;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string run_json(const std::string& config_text) {
  ExperimentConfig cfg = config_from_json(json::parse(config_text));
  return summary_to_json(run_experiment(cfg)).dump();
}

py::tuple sample(const std::string& system, std::size_t n_pairs, double dt, std::uint64_t seed,
                 std::optional<Vec> box_lo, std::optional<Vec> box_hi, const std::string& method,
                 int samples_per_traj) {
  BenchmarkSystem sys = make_system(system_from_string(system));
  SamplingOptions so;
  so.n_pairs = n_pairs;
  so.dt = dt;
  so.seed = seed;
  so.samples_per_traj = samples_per_traj;
  if (box_lo) so.box_lo = *box_lo;
  if (box_hi) so.box_hi = *box_hi;
  so.method = method == "auto" ? (sys.field.exact ? FlowMethod::Exact : FlowMethod::Rk45) : flow_method_from_string(method);
  SnapshotSet s = sample_snapshots(sys, so);
  return py::make_tuple(s.X, s.Y);
}

py::dict fit(const Mat& X, const Mat& Y, double dt, const std::string& dictionary, int degree, int centers,
             double bandwidth, std::optional<double> ridge, std::uint64_t seed) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) fail(ErrorKind::Config, "X and Y must have the same shape");
  SnapshotSet s;
  s.X = X;
  s.Y = Y;
  s.dt = dt;
  Dictionary dict = dictionary == "identity"   ? Dictionary::identity(static_cast<int>(X.rows()))
                    : dictionary == "monomial" ? Dictionary::monomial_total_degree(static_cast<int>(X.rows()), degree)
                    : dictionary == "rbf"      ? rbf_dictionary(X, centers, bandwidth, seed)
                                               : (fail(ErrorKind::Config, "unknown dictionary"), Dictionary{});
  KoopmanModel m = fit_edmd(s, dict, {ridge.value_or(default_ridge(dict)), true});
  py::dict d;
  d["K"] = m.K;
  d["fit_residual"] = m.fit_residual;
  d["ridge"] = m.ridge;
  d["model_json"] = model_to_json(m).dump();
  return d;
}

py::list pairs_to_py(const std::vector<Eigenpair>& pairs) {
  py::list out;
  for (auto& p : pairs) {
    py::dict d;
    d["eigenvalue"] = p.lambda;
    d["right"] = p.right;
    d["left"] = p.left;
    d["iterations"] = p.iterations;
    d["defective"] = p.defective;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_koopal, m) {
  m.doc() = "Koopman eigenfunction toolkit (compiled core)";

  static py::exception<Error> exc(m, "KoopalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, (std::string(to_string(e.kind())) + "|" + e.what()).c_str());
    }
  });

  m.def("set_num_threads", &set_num_threads, py::arg("n"));
  m.def("num_threads", &num_threads);

  m.def("experiment_ids", &experiment_ids);
  m.def("default_config_json", [](const std::string& id) { return config_to_json(default_config(id)).dump(); });
  m.def("run_experiment_json", &run_json, py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "crossvalidation_json",
      [](int matrices, int dim_lo, int dim_hi, double tol, std::uint64_t seed) {
        return summary_to_json(eigensolver_crossvalidation({matrices, dim_lo, dim_hi, tol, seed})).dump();
      },
      py::arg("matrices") = 50, py::arg("dim_lo") = 4, py::arg("dim_hi") = 20, py::arg("tol") = 1e-6,
      py::arg("seed") = 0);

  m.def("sample_snapshots", &sample, py::arg("system"), py::arg("n_pairs") = 400, py::arg("dt") = 0.1,
        py::arg("seed") = 0, py::arg("box_lo") = py::none(), py::arg("box_hi") = py::none(),
        py::arg("method") = "auto", py::arg("samples_per_traj") = 2);
  m.def("fit_edmd", &fit, py::arg("X"), py::arg("Y"), py::arg("dt"), py::arg("dictionary") = "identity",
        py::arg("degree") = 3, py::arg("centers") = 40, py::arg("bandwidth") = 1.0, py::arg("ridge") = py::none(),
        py::arg("seed") = 0);

  m.def(
      "deflate_spectrum", [](const Mat& A, int n) { return pairs_to_py(deflate_spectrum(A, n)); }, py::arg("A"),
      py::arg("n"));
  m.def(
      "qr_eigenvalues", [](const Mat& A) { return qr_eigenvalues(A); }, py::arg("A"));
  m.def(
      "dense_eigenpairs", [](const Mat& A) { return pairs_to_py(dense_eigenpairs(A)); }, py::arg("A"));

  m.def("transform_Ti", &transform_Ti, py::arg("z"), py::arg("mu") = 1.0, py::arg("alpha") = 1.0, py::arg("C") = 1.0);
  m.def("transform_Ti_inv", &transform_Ti_inv, py::arg("v"), py::arg("mu") = 1.0, py::arg("alpha") = 1.0,
        py::arg("C") = 1.0);
  m.def(
      "transform_To",
      [](double r, double theta, double mu, double alpha, double C) {
        PolarPoint p = transform_To({r, theta}, mu, alpha, C);
        return py::make_tuple(p.r, p.theta);
      },
      py::arg("r"), py::arg("theta"), py::arg("mu") = 1.0, py::arg("alpha") = 1.0, py::arg("C") = 1.0);
}
