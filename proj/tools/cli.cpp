#include "cli.hpp"

#include "koopal/bridge.hpp"
#include "koopal/experiments.hpp"
#include "koopal/extend.hpp"
#include "koopal/io.hpp"
#include "koopal/phase.hpp"
#include "koopal/regression.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

namespace koopal::cli {

using nlohmann::json;

namespace {

struct Global {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<std::string> format;
};

std::string dump_value(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string params_block(const std::string& id) {
  std::ostringstream os;
  std::size_t w = 0;
  auto ps = experiment_params(id);
  for (auto& p : ps) w = std::max(w, p.key.size() + dump_value(p.value).size() + 3);
  for (auto& p : ps) {
    std::string kv = p.key + " = " + dump_value(p.value);
    os << "    " << std::left << std::setw(static_cast<int>(w) + 2) << kv << p.source << '\n';
  }
  return os.str();
}

std::string defaults_footer() {
  std::ostringstream os;
  os << "\nExperiment defaults (override with --set key=value or a config file):\n";
  for (auto& id : experiment_ids()) os << "\n  " << id << ": " << experiment_title(id) << '\n' << params_block(id);
  os << "\nExit codes: 0 success, 1 criteria unmet or numerical failure, 2 usage or config error, 3 internal error.\n";
  return os.str();
}

json error_json(const std::string& kind, const std::string& message, int code) {
  return {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::Io:
      return kUsage;
    case ErrorKind::Contract:
    case ErrorKind::Internal:
      return kInternal;
    default:
      return kCriteriaUnmet;
  }
}

json parse_setting(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

ExperimentConfig build_config(const Global& g, const std::string& id, const std::vector<std::string>& sets) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    if (!std::filesystem::exists(g.config)) fail(ErrorKind::Config, "config file '" + g.config + "' does not exist");
    cfg = config_from_json(read_json(g.config));
    if (!id.empty() && cfg.id != id)
      fail(ErrorKind::Config, "config is for '" + cfg.id + "' but '" + id + "' was requested");
  } else {
    if (id.empty()) fail(ErrorKind::Config, "run needs an experiment id or --config");
    if (!is_experiment(id)) fail(ErrorKind::Config, "unknown experiment '" + id + "'");
    cfg = default_config(id);
  }
  json j = config_to_json(cfg);
  for (auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Config, "--set expects key=value, got '" + s + "'");
    j["params"][s.substr(0, eq)] = parse_setting(s.substr(eq + 1));
  }
  if (g.seed) j["seed"] = *g.seed;
  if (!g.out.empty()) j["out_dir"] = g.out;
  if (g.format) j["format"] = *g.format;
  return config_from_json(j);
}

void print_result(const ExperimentResult& r, std::ostream& out) {
  out << r.id << ": " << (r.passed() ? "PASS" : "FAIL") << '\n';
  for (auto& c : r.criteria) {
    out << "  [" << (c.pass ? "pass" : "FAIL") << "] ";
    if (c.acceptance) out << "#" << c.acceptance << ' ';
    out << c.name << ": " << std::setprecision(6) << c.value << ' ' << c.relation << ' ' << c.threshold << '\n';
  }
}

std::string out_dir(const Global& g) { return g.out.empty() ? std::string(".") : g.out; }

SystemParams parse_system_params(const std::vector<std::string>& sets) {
  SystemParams p;
  for (auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "--param expects key=value, got '" + s + "'");
    try {
      p[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "--param value must be a number: '" + s + "'");
    }
  }
  return p;
}

BenchmarkSystem system_with(const std::string& name, const std::vector<std::string>& sets) {
  SystemId id = system_from_string(name);
  auto p = parse_system_params(sets);
  auto defaults = default_params(id);
  for (auto& [k, v] : p)
    if (!defaults.count(k)) fail(ErrorKind::Config, "system " + name + " has no parameter '" + k + "'");
  return make_system(id, p);
}

Vec box_of(const std::vector<double>& v, const Vec& fallback, int dim) {
  if (v.empty()) return fallback;
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  if (static_cast<int>(v.size()) != dim) fail(ErrorKind::Config, "box corner has the wrong dimension");
  return Eigen::Map<const Vec>(v.data(), dim);
}

Dictionary make_dictionary(const std::string& kind, const SnapshotSet& data, int degree, int centers, double bandwidth,
                           std::uint64_t seed) {
  if (kind == "identity") return Dictionary::identity(data.dim());
  if (kind == "monomial") return Dictionary::monomial_total_degree(data.dim(), degree);
  if (kind == "rbf") return rbf_dictionary(data.X, centers, bandwidth, seed);
  fail(ErrorKind::Config, "dictionary must be identity, monomial or rbf");
}

KoopmanModel load_model(const std::string& path) {
  json j = read_json(path);
  std::string kfile = j.value("K_file", std::string("K.csv"));
  auto dir = std::filesystem::path(path).parent_path();
  return model_from_json(j, read_matrix((dir / kfile).string()));
}

}  // namespace

std::string help_text() { return defaults_footer(); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Koopman eigenfunction toolkit: data-driven spectra, eigenfunction extension, bridging and phase fields",
               "koopal"};
  app.fallthrough();
  app.require_subcommand(1);
  app.footer(defaults_footer());

  Global g;
  app.add_option("--config", g.config, "experiment config JSON");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "random seed (default 0)");
  app.add_option("--threads", g.threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--format", g.format, "encoding of curve tables (default csv)")->check(CLI::IsMember({"csv", "json"}));

  std::function<int()> action;

  // run <id>
  std::string run_id;
  std::vector<std::string> run_sets;
  auto* run_cmd = app.add_subcommand("run", "run one experiment by id (or the id stored in --config)");
  run_cmd->add_option("id", run_id, "experiment id")->check(CLI::IsMember(experiment_ids()));
  run_cmd->add_option("--set", run_sets, "override a parameter, key=value");

  auto run_experiment_cmd = [&](const std::string& id, const std::vector<std::string>& sets) {
    ExperimentConfig cfg = build_config(g, id, sets);
    ExperimentResult r = run_experiment(cfg);
    print_result(r, out);
    if (!cfg.out_dir.empty()) out << "wrote " << r.artifacts.size() << " files to " << cfg.out_dir << '\n';
    return r.passed() ? kOk : kCriteriaUnmet;
  };
  run_cmd->callback([&] { action = [&] { return run_experiment_cmd(run_id, run_sets); }; });

  // one alias per experiment
  std::map<std::string, std::vector<std::string>> alias_sets;
  for (auto& id : experiment_ids()) {
    auto* sub = app.add_subcommand(id, experiment_title(id));
    sub->add_option("--set", alias_sets[id], "override a parameter, key=value");
    sub->footer("\nParameters:\n" + params_block(id));
    sub->callback([&, id] { action = [&, id] { return run_experiment_cmd(id, alias_sets[id]); }; });
  }

  // simulate
  struct {
    std::string system;
    std::vector<std::string> params;
    std::size_t pairs = 400;
    double dt = 0.1;
    std::string method = "auto";
    std::vector<double> lo, hi;
    int per_traj = 2;
    bool latent = false;
    std::string name = "snapshots.csv";
  } sim;
  auto* sim_cmd = app.add_subcommand("simulate", "sample seeded snapshot pairs from a benchmark system");
  sim_cmd->add_option("--system", sim.system, "system id")->required();
  sim_cmd->add_option("--param", sim.params, "system parameter, key=value");
  sim_cmd->add_option("--pairs", sim.pairs, "number of snapshot pairs (default 400)");
  sim_cmd->add_option("--dt", sim.dt, "sampling interval (default 0.1)");
  sim_cmd->add_option("--method", sim.method, "exact, rk45, euler or auto (exact when available)");
  sim_cmd->add_option("--box-lo", sim.lo, "lower box corner, one value or one per dimension");
  sim_cmd->add_option("--box-hi", sim.hi, "upper box corner, one value or one per dimension");
  sim_cmd->add_option("--samples-per-traj", sim.per_traj, "states per trajectory (default 2)");
  sim_cmd->add_flag("--latent", sim.latent, "sample the box in latent coordinates");
  sim_cmd->add_option("--name", sim.name, "output file name (default snapshots.csv)");
  sim_cmd->callback([&] {
    action = [&] {
      BenchmarkSystem sys = system_with(sim.system, sim.params);
      SamplingOptions so;
      so.n_pairs = sim.pairs;
      so.dt = sim.dt;
      so.box_lo = box_of(sim.lo, sys.sample_lo, sys.dim());
      so.box_hi = box_of(sim.hi, sys.sample_hi, sys.dim());
      so.seed = g.seed.value_or(0);
      so.samples_per_traj = sim.per_traj;
      so.latent_box = sim.latent;
      if (sim.method == "auto")
        so.method = sys.field.exact ? FlowMethod::Exact : FlowMethod::Rk45;
      else
        so.method = flow_method_from_string(sim.method);
      SnapshotSet s = sample_snapshots(sys, so);
      std::string dir = out_dir(g);
      ensure_directory(dir);
      write_snapshots(join_path(dir, sim.name), s);
      out << "wrote " << s.size() << " pairs (" << s.dropped << " dropped) to " << join_path(dir, sim.name) << '\n';
      return kOk;
    };
  });

  // fit
  struct {
    std::string snapshots;
    std::string dictionary = "identity";
    int degree = 3, centers = 40;
    double bandwidth = 1.0;
    std::optional<double> ridge;
  } fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a Koopman matrix to snapshot pairs");
  fit_cmd->add_option("--snapshots", fit.snapshots, "snapshot CSV written by simulate")->required();
  fit_cmd->add_option("--dictionary", fit.dictionary, "identity, monomial or rbf (default identity)")
      ->check(CLI::IsMember({"identity", "monomial", "rbf"}));
  fit_cmd->add_option("--degree", fit.degree, "monomial total degree (default 3)");
  fit_cmd->add_option("--centers", fit.centers, "RBF centers from k-means (default 40)");
  fit_cmd->add_option("--bandwidth", fit.bandwidth, "RBF bandwidth (default 1.0)");
  fit_cmd->add_option("--ridge", fit.ridge, "ridge weight (default: 0 for identity and monomial, small for rbf)");
  fit_cmd->callback([&] {
    action = [&] {
      SnapshotSet data = read_snapshots(fit.snapshots);
      Dictionary dict = make_dictionary(fit.dictionary, data, fit.degree, fit.centers, fit.bandwidth, g.seed.value_or(0));
      KoopmanModel m = fit_edmd(data, dict, {fit.ridge.value_or(default_ridge(dict)), true});
      std::string dir = out_dir(g);
      ensure_directory(dir);
      json j = model_to_json(m);
      j["K_file"] = "K.csv";
      write_json(join_path(dir, "model.json"), j);
      write_matrix(join_path(dir, "K.csv"), m.K);
      write_json(join_path(dir, "spectrum.json"), spectrum_to_json(m.K, dense_eigenpairs(m.K)));
      out << "fit " << m.K.rows() << "x" << m.K.cols() << " Koopman matrix, residual " << format_double(m.fit_residual)
          << '\n';
      return kOk;
    };
  });

  // eig
  struct {
    std::string matrix;
    std::string solver = "deflation";
    int count = 0;
    CrossValidationOptions cv;
  } eig;
  auto* eig_cmd = app.add_subcommand(
      "eig", "eigenpairs of a matrix file, or (without --matrix) cross-validate deflation against QR iteration");
  eig_cmd->add_option("--matrix", eig.matrix, "row-major CSV matrix");
  eig_cmd->add_option("--solver", eig.solver, "deflation, qr or dense (default deflation)")
      ->check(CLI::IsMember({"deflation", "qr", "dense"}));
  eig_cmd->add_option("--count", eig.count, "number of eigenpairs (default all)");
  eig_cmd->add_option("--matrices", eig.cv.matrices, "cross-validation: random matrices (default 50)");
  eig_cmd->add_option("--dim-lo", eig.cv.dim_lo, "cross-validation: smallest dimension (default 4)");
  eig_cmd->add_option("--dim-hi", eig.cv.dim_hi, "cross-validation: largest dimension (default 20)");
  eig_cmd->add_option("--tol", eig.cv.tol, "cross-validation: multiset tolerance (default 1e-6)");
  eig_cmd->callback([&] {
    action = [&] {
      if (eig.matrix.empty()) {
        eig.cv.seed = g.seed.value_or(0);
        ExperimentResult r = eigensolver_crossvalidation(eig.cv, g.out, g.format.value_or("csv"));
        print_result(r, out);
        return r.passed() ? kOk : kCriteriaUnmet;
      }
      Mat A = read_matrix(eig.matrix);
      if (A.rows() != A.cols()) fail(ErrorKind::Config, "matrix must be square");
      int n = eig.count > 0 ? eig.count : static_cast<int>(A.rows());
      json j;
      if (eig.solver == "qr") {
        json a = json::array();
        auto ev = qr_eigenvalues(A);
        for (int i = 0; i < std::min<int>(n, static_cast<int>(ev.size())); ++i) a.push_back(complex_to_json(ev[i]));
        j = {{"solver", "qr"}, {"eigenvalues", a}};
      } else {
        auto pairs = eig.solver == "dense" ? dense_eigenpairs(A) : deflate_spectrum(A, n);
        if (static_cast<int>(pairs.size()) > n) pairs.resize(n);
        j = spectrum_to_json(A, pairs);
        j["solver"] = eig.solver;
      }
      if (g.out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        ensure_directory(g.out);
        write_json(join_path(g.out, "spectrum.json"), j);
        out << "wrote " << join_path(g.out, "spectrum.json") << '\n';
      }
      return kOk;
    };
  });

  // extend
  struct {
    std::string model;
    double epsilon = 0.01;
    int eigenpairs = 9;
    double lo = 1.0, hi = 2.0, h = 0.01;
    std::string method = "rk45";
    double euler_step = 1e-3;
  } ext;
  auto* ext_cmd = app.add_subcommand("extend", "certified powers of a fitted model's eigenfunctions");
  ext_cmd->add_option("--model", ext.model, "model.json written by fit")->required();
  ext_cmd->add_option("--epsilon", ext.epsilon, "trajectory error budget (default 0.01)");
  ext_cmd->add_option("--eigenpairs", ext.eigenpairs, "number of eigenpairs (default 9)");
  ext_cmd->add_option("--grid-lo", ext.lo, "grid lower corner (default 1)");
  ext_cmd->add_option("--grid-hi", ext.hi, "grid upper corner (default 2)");
  ext_cmd->add_option("--grid-h", ext.h, "grid spacing (default 0.01)");
  ext_cmd->add_option("--method", ext.method, "numerical flow on the grid: rk45 or euler (default rk45)")
      ->check(CLI::IsMember({"rk45", "euler"}));
  ext_cmd->add_option("--euler-step", ext.euler_step, "Euler step (default 0.001)");
  ext_cmd->callback([&] {
    action = [&] {
      KoopmanModel m = load_model(ext.model);
      if (m.system_id.empty()) fail(ErrorKind::Config, "model has no system id; cannot build the grid flow");
      BenchmarkSystem sys = make_system(system_from_string(m.system_id));
      int d = sys.dim();
      EvalGrid grid(Vec::Constant(d, ext.lo), Vec::Constant(d, ext.hi), ext.h);
      Rk45Options ro;
      ro.rtol = 1e-3;
      ro.atol = 1e-6;
      GridFlow gn = grid_flow(grid, make_flow(sys, m.dt, flow_method_from_string(ext.method), ext.euler_step, ro));
      GridFlow gx = grid_flow(grid, best_flow(sys, m.dt));
      double eps_G = integration_error_sup(gn.images, gx.images);
      double L = spectral_norm_bound_L(m.dict, grid), M = feature_sup_M(m.dict, grid);
      auto r = iterative_koopman_eigensolver(m.K, m.dict, ext.eigenpairs, ext.epsilon, eps_G, L, M, &gn);
      std::string dir = out_dir(g);
      ensure_directory(dir);
      json j = extension_to_json(r.extensions);
      write_json(join_path(dir, "extension.json"), {{"eps_G", eps_G}, {"L", L}, {"M", M}, {"extensions", j}});
      write_json(join_path(dir, "spectrum.json"), spectrum_to_json(m.K, r.pairs));
      for (std::size_t i = 0; i < r.pairs.size(); ++i)
        out << "phi" << i + 1 << ": lambda " << format_double(r.pairs[i].lambda.real()) << ' '
            << format_double(r.pairs[i].lambda.imag() + 0.0) << "i, max power " << r.extensions[i].max_power() << '\n';
      return kOk;
    };
  });

  // bridge
  struct {
    std::string system = "quad1d";
    std::vector<std::string> params;
    double lo = 2.25, hi = 2.75;
    std::string left, right;
    bool edmd = false;
    double tikhonov = 1e-8;
  } br;
  auto* br_cmd = app.add_subcommand("bridge", "fit the log-linear map between eigenfunctions of neighbouring steady states");
  br_cmd->add_option("--system", br.system, "one-dimensional system id (default quad1d)");
  br_cmd->add_option("--param", br.params, "system parameter, key=value");
  br_cmd->add_option("--window-lo", br.lo, "overlap window start (default 2.25)");
  br_cmd->add_option("--window-hi", br.hi, "overlap window end (default 2.75)");
  br_cmd->add_option("--left", br.left, "analytic eigenfunction on the left (default: first listed)");
  br_cmd->add_option("--right", br.right, "analytic eigenfunction on the right (default: second listed)");
  br_cmd->add_flag("--edmd", br.edmd, "fit local families from data at the steady states around the window");
  br_cmd->add_option("--tikhonov", br.tikhonov, "Tikhonov weight for the EDMD bridge (default 1e-8)");
  br_cmd->callback([&] {
    action = [&] {
      BenchmarkSystem sys = system_with(br.system, br.params);
      if (sys.dim() != 1) fail(ErrorKind::Config, "bridging is implemented for one-dimensional systems");
      if (!(br.lo < br.hi)) fail(ErrorKind::Config, "window must have lo < hi");
      BridgeMap bm;
      if (br.edmd) {
        double a = -INFINITY, b = INFINITY;
        for (auto& s : sys.steady_states) {
          if (s[0] <= br.lo) a = std::max(a, s[0]);
          if (s[0] >= br.hi) b = std::min(b, s[0]);
        }
        if (!std::isfinite(a) || !std::isfinite(b))
          fail(ErrorKind::Config, "the window must lie between two steady states");
        LocalFamilyOptions lo;
        lo.seed = g.seed.value_or(0);
        auto left = fit_local_family(sys, Vec::Constant(1, a), lo);
        auto right = fit_local_family(sys, Vec::Constant(1, b), lo);
        if (left.members.empty() || right.members.empty())
          fail(ErrorKind::EmptySupport, "a local family has no accepted member");
        bm = fit_bridge(left, right, br.lo, br.hi, br.tikhonov);
      } else {
        if (sys.eigenfunctions.size() < 2 && (br.left.empty() || br.right.empty()))
          fail(ErrorKind::Config, "system has fewer than two analytic eigenfunctions");
        std::string ln = br.left.empty() ? sys.eigenfunctions[0].name : br.left;
        std::string rn = br.right.empty() ? sys.eigenfunctions[1].name : br.right;
        auto l = EigenfunctionExpr::from_analytic(sys.eigenfunction(ln), 0.1);
        auto r = EigenfunctionExpr::from_analytic(sys.eigenfunction(rn), 0.1);
        bm = fit_bridge(l, r, br.lo, br.hi, 0.0);
      }
      json j = bridge_to_json(bm);
      std::string dir = out_dir(g);
      ensure_directory(dir);
      write_json(join_path(dir, "bridge.json"), j);
      out << "c_forward " << format_double(bm.c_forward) << ", c_backward " << format_double(bm.c_backward)
          << ", overlap " << format_double(std::max(bm.overlap_forward, bm.overlap_backward)) << '\n';
      return kOk;
    };
  });

  // phase
  struct {
    std::string system = "vanderpol";
    std::vector<std::string> params;
    std::string method = "laplace";
    std::string branch = "phi_cycle";
    std::string mode = "rotation";
    std::string observable = "sin_x1_plus_x2";
    double lo = -3.0, hi = 3.0;
    int n = 41;
  } ph;
  auto* ph_cmd = app.add_subcommand("phase", "isostable and isochron field of a planar system on a grid");
  ph_cmd->add_option("--system", ph.system, "planar system id (default vanderpol)");
  ph_cmd->add_option("--param", ph.params, "system parameter, key=value");
  ph_cmd->add_option("--method", ph.method, "laplace or analytic (default laplace)")
      ->check(CLI::IsMember({"laplace", "analytic"}));
  ph_cmd->add_option("--branch", ph.branch, "analytic eigenfunction name (default phi_cycle)");
  ph_cmd->add_option("--mode", ph.mode, "Laplace average: rotation or floquet (default rotation)")
      ->check(CLI::IsMember({"rotation", "floquet"}));
  ph_cmd->add_option("--observable", ph.observable, "Laplace observable id (default sin_x1_plus_x2)");
  ph_cmd->add_option("--grid-lo", ph.lo, "grid lower corner (default -3)");
  ph_cmd->add_option("--grid-hi", ph.hi, "grid upper corner (default 3)");
  ph_cmd->add_option("--grid-n", ph.n, "points per axis (default 41)")->check(CLI::Range(2, 100000));
  ph_cmd->callback([&] {
    action = [&] {
      BenchmarkSystem sys = system_with(ph.system, ph.params);
      if (sys.dim() != 2) fail(ErrorKind::Config, "phase fields are planar");
      IsofieldConfig ic;
      ic.method = ph.method == "analytic" ? PhaseMethod::Analytic : PhaseMethod::LaplaceAverage;
      ic.branch = ph.branch;
      ic.mode = ph.mode == "floquet" ? LaplaceMode::Floquet : LaplaceMode::Rotation;
      ic.observable = ph.observable;
      EvalGrid grid(ph.lo, ph.hi, (ph.hi - ph.lo) / (ph.n - 1), 2);
      PhaseField f = isofield(sys, grid, ic);
      std::string dir = out_dir(g);
      ensure_directory(dir);
      write_phase_field(join_path(dir, "phase.csv"), f);
      json src = phase_source_to_json(f.source, f.eigenvalue);
      src["system"] = ph.system;
      write_json(join_path(dir, "phase_source.json"), src);
      out << "wrote " << grid.size() << " points to " << join_path(dir, "phase.csv") << '\n';
      return kOk;
    };
  });

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", e.what(), kUsage).dump() << '\n';
    return kUsage;
  }

  set_num_threads(g.threads > 0 ? g.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  try {
    if (!action) fail(ErrorKind::Config, "no subcommand given");
    return action();
  } catch (const Error& e) {
    int code = exit_code_for(e.kind());
    json j = error_json(to_string(e.kind()), e.what(), code);
    err << j.dump() << '\n';
    if (!g.out.empty()) {
      try {
        ensure_directory(g.out);
        write_json(join_path(g.out, "error.json"), j);
      } catch (const Error&) {
      }
    }
    return code;
  } catch (const std::exception& e) {
    err << error_json("internal", e.what(), kInternal).dump() << '\n';
    return kInternal;
  }
}

}  // namespace koopal::cli
