#include "koopal/experiments.hpp"

#include "koopal/bridge.hpp"
#include "koopal/extend.hpp"
#include "koopal/io.hpp"
#include "koopal/phase.hpp"
#include "koopal/regression.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

namespace koopal {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct Spec {
  std::string title;
  std::vector<ParamDoc> params;
};

const std::map<std::string, Spec>& specs() {
  static const std::map<std::string, Spec> s = {
      {"linear2d_dmd",
       {"DMD of the planar linear system, error bounds and power extension",
        {
            {"n_pairs", 400, "linear example: number of snapshot pairs"},
            {"dt", 0.2, "linear example: sampling interval"},
            {"box_lo", -2.0, "linear example: initial conditions uniform on [-2, 2]^2"},
            {"box_hi", 2.0, "linear example: initial conditions uniform on [-2, 2]^2"},
            {"grid_lo", -1.0, "linear example: evaluation grid a = -1"},
            {"grid_hi", 1.0, "linear example: evaluation grid b = 1"},
            {"grid_h", 0.01, "linear example: evaluation grid spacing h = 0.01"},
            {"euler_step", 0.001, "linear example: forward Euler step 0.001"},
            {"epsilons", json::array({0.1, 0.2}), "linear example: desired trajectory errors 0.1 and 0.2"},
            {"delta_w", 1e-6, "linear example: injected eigenvector error norm 1e-6"},
            {"p_check", 10, "bound check range p = 1..10"},
            {"eig_tol", 1e-3, "acceptance: eigenvalue recovery tolerance"},
            {"bound_slack", 1e-9, "acceptance: relative slack on bound violations"},
            {"crossing_tol", 1, "acceptance: allowed gap between suggested and empirical power"},
            {"field_grid_h", 0.05, "output only: spacing of the written eigenfunction fields"},
        }}},
      {"softplus_edmd",
       {"RBF EDMD of the softplus-transformed linear system and the iterative eigensolver",
        {
            {"n_pairs", 400, "nonlinear example: number of snapshot pairs"},
            {"dt", 0.02, "nonlinear example: sampling interval"},
            {"box_lo", -2.0, "nonlinear example: latent initial conditions on [-2, 2]^2"},
            {"box_hi", 2.0, "nonlinear example: latent initial conditions on [-2, 2]^2"},
            {"n_centers", 40, "nonlinear example: 40 Gaussian RBFs from k-means"},
            {"bandwidth", 1.0, "no published value; chosen here"},
            {"ridge", 1e-10, "no published value; small ridge for RBF Gram matrices"},
            {"grid_lo", 1.0, "nonlinear example: grid a = 1"},
            {"grid_hi", 2.0, "nonlinear example: grid b = 2"},
            {"grid_h", 0.01, "nonlinear example: grid spacing h = 0.01"},
            {"rk45_rtol", 1e-3, "RK45 with common library default tolerances"},
            {"rk45_atol", 1e-6, "RK45 with common library default tolerances"},
            {"n_eigenpairs", 9, "nonlinear example: first nine eigenpairs"},
            {"epsilon", 0.01, "nonlinear example: desired trajectory error 0.01"},
            {"p_target", 3, "nonlinear example: extension up to p = 3"},
            {"residual_tol", 1e-8, "acceptance: eigensolver residual relative to |K|"},
            {"field_grid_h", 0.05, "output only: spacing of the written eigenfunction fields"},
        }}},
      {"bridge1d",
       {"Bridging eigenfunctions across the singularities of one-dimensional systems",
        {
            {"a", 2.0, "quadratic example: steady state a = 2"},
            {"b", 3.0, "quadratic example: steady state b = 3"},
            {"dt", 0.1, "chosen here: sampling interval of the local fits"},
            {"window_lo", 2.25, "acceptance: bridge window [2.25, 2.75]"},
            {"window_hi", 2.75, "acceptance: bridge window [2.25, 2.75]"},
            {"tikhonov", 1e-8, "chosen here: Tikhonov weight of the EDMD bridge"},
            {"radius", 0.8, "chosen here: half width of each local sampling region"},
            {"local_pairs", 400, "chosen here: snapshot pairs per local fit"},
            {"n_centers", 60, "chosen here: RBF centers evenly spaced on [1, 4]"},
            {"bandwidth", 0.05, "quadratic example: kernel bandwidth 0.05"},
            {"local_ridge", 1e-10, "chosen here: ridge of the local fits"},
            {"pca_lo", 1.0, "quadratic example: log-PCA on [1, 4]"},
            {"pca_hi", 4.0, "quadratic example: log-PCA on [1, 4]"},
            {"pca_points", 601, "chosen here: sample count for the log-PCA"},
            {"pca_collar", 0.05, "acceptance: 0.05 neighbourhoods of the steady states removed"},
            {"pca_max_power", 5, "quadratic example: powers up to 5"},
            {"pca_tol", 1e-8, "acceptance: second to first singular value ratio"},
            {"algebra_points", 1000, "acceptance: number of non-singular test points"},
            {"algebra_min_power", -2, "acceptance: powers -2..3"},
            {"algebra_max_power", 3, "acceptance: powers -2..3"},
            {"algebra_tol", 1e-8, "acceptance: eigen-relation tolerance"},
            {"c_tol", 1e-10, "acceptance: analytic bridge constant tolerance"},
            {"overlap_tol", 0.05, "acceptance: EDMD bridge overlap residual"},
            {"cubic_window_lo", -0.75, "chosen here: cubic bridge window between a and b"},
            {"cubic_window_hi", -0.25, "chosen here: cubic bridge window between a and b"},
            {"cubic_collar", 0.01, "acceptance: singular collar width"},
            {"cubic_points", 600, "chosen here: continuation sample count"},
            {"continuation_tol", 0.10, "acceptance: continuation relative RMS"},
        }}},
      {"lin5d_check",
       {"Products of eigenfunctions on the planar example with five named eigenfunctions",
        {
            {"a", -0.05, "motivating example: a = -0.05"},
            {"b", -1.0, "motivating example: b = -1"},
            {"dt", 0.1, "chosen here: sampling interval"},
            {"n_pairs", 400, "chosen here: snapshot pairs for the monomial EDMD"},
            {"box_lo", -2.0, "chosen here: sampling box"},
            {"box_hi", 2.0, "chosen here: sampling box"},
            {"degree", 3, "chosen here: monomials up to total degree 3"},
            {"grid_h", 0.05, "chosen here: identity check grid spacing"},
            {"identity_tol", 1e-6, "acceptance: product identity tolerance"},
            {"algebra_points", 1000, "acceptance: number of non-singular test points"},
            {"algebra_min_power", -2, "acceptance: powers -2..3"},
            {"algebra_max_power", 3, "acceptance: powers -2..3"},
            {"algebra_tol", 1e-8, "acceptance: eigen-relation tolerance"},
        }}},
      {"polar_transforms",
       {"Interior and exterior transforms of the polar limit-cycle example",
        {
            {"mu", 1.0, "polar example: mu"},
            {"omega", 1.0, "polar example: omega"},
            {"alpha", 1.0, "polar example: alpha"},
            {"C", 1.0, "polar example: C"},
            {"samples", 1000, "acceptance: random inputs per identity check"},
            {"ti_tol", 1e-12, "acceptance: T_i round trip tolerance"},
            {"to_tol", 1e-10, "acceptance: isochron preservation tolerance"},
            {"hand_tol", 1e-10, "acceptance: hand point r = 0.5 -> 2 tolerance"},
            {"traj_r0", 0.2, "chosen here: start radius of the mapped trajectory"},
            {"traj_theta0", 0.4, "chosen here: start angle of the mapped trajectory"},
            {"traj_T", 4.0, "chosen here: trajectory length"},
            {"traj_steps", 400, "chosen here: trajectory samples"},
            {"jump_limit", 10.0, "chosen here: continuity scan limit"},
            {"field_lo", -2.0, "output only: field grid"},
            {"field_hi", 2.0, "output only: field grid"},
            {"field_h", 0.05, "output only: field grid"},
        }}},
      {"vdp_phase",
       {"Isochrons and isostables of the Van der Pol oscillator by Laplace averages",
        {
            {"mu", 0.3, "limit cycle example: Van der Pol mu = 0.3"},
            {"grid_lo", -3.0, "chosen here: desk grid [-3, 3]^2"},
            {"grid_hi", 3.0, "chosen here: desk grid [-3, 3]^2"},
            {"grid_n", 41, "chosen here: 41 x 41 points (desk resolution)"},
            {"annulus_lo", 1.0, "chosen here: relation check annulus 1 <= |x| <= 3"},
            {"annulus_hi", 3.0, "chosen here: relation check annulus 1 <= |x| <= 3"},
            {"relation_dt", 0.5, "chosen here: flow time of the relation check"},
            {"relation_tol", 5e-2, "acceptance: residual relative to max |phi|"},
            {"isochron_observable", "sin_x1_plus_x2", "chosen here: observable of the rotation average"},
            {"isostable_observable", "norm_sq", "chosen here: observable of the Floquet average"},
            {"trivial_tol", 1e-10, "acceptance: exactness on the linear case"},
        }}},
      {"saddle_fields",
       {"Saddle eigenfunctions and the bistable system",
        {
            {"lambda1", -1.0, "saddle example: stable eigenvalue -1"},
            {"lambda2", 1.5, "saddle example: unstable eigenvalue 1.5"},
            {"angle_deg", 60.0, "saddle example: rotation by 60 degrees"},
            {"manifold_n", 100, "chosen here: manifold samples"},
            {"transversality_min", 0.1, "chosen here: minimal normalized crossing"},
            {"pde_points", 1000, "chosen here: generator residual points"},
            {"pde_tol", 1e-8, "chosen here: generator residual tolerance"},
            {"node_tol", 1e-12, "bistable example: printed node coordinates"},
            {"field_h", 0.05, "output only: field grid spacing"},
        }}},
      {"duffing_edmd",
       {"EDMD of the unforced Duffing oscillator along the unstable manifold",
        {
            {"delta", 0.5, "Duffing example: delta = 0.5"},
            {"beta", -1.0, "Duffing example: beta = -1"},
            {"alpha", 0.1, "Duffing example: alpha = 0.1"},
            {"trajectories", 300, "desk scale: 300 trajectories (full scale: 3000)"},
            {"samples_per_traj", 11, "Duffing example: 11 samples per trajectory"},
            {"dt", 0.25, "Duffing example: sampling interval 0.25"},
            {"box_lo", -6.0, "Duffing example: initial conditions on [-6, 6]^2"},
            {"box_hi", 6.0, "Duffing example: initial conditions on [-6, 6]^2"},
            {"n_centers", 100, "desk scale: 100 RBFs (full scale: 500)"},
            {"bandwidth", 2.5, "no published value; chosen here"},
            {"ridge", 1e-8, "chosen here"},
            {"manifold_n", 100, "Duffing example: 100 manifold samples"},
            {"window_lo", json::array({-2.0, -1.33}), "Duffing example: window [-2, 2] x [-1.33, 1.3]"},
            {"window_hi", json::array({2.0, 1.3}), "Duffing example: window [-2, 2] x [-1.33, 1.3]"},
            {"residual_filter", 0.05, "chosen here: relative one-step residual of a resolved eigenfunction"},
            {"null_floor", 1e-3, "chosen here: multipliers below this are numerically null"},
            {"trivial_rate", 0.05, "chosen here: decay rates below this belong to the lambda = 1 cluster"},
            {"monotone_fraction", 0.8, "acceptance: fraction of monotone consecutive pairs"},
            {"steady_tol", 1e-4, "Duffing example: spirals at (+-3.1623, 0)"},
            {"field_h", 0.25, "output only: field grid spacing"},
        }}},
  };
  return s;
}

const Spec& spec_for(const std::string& id) {
  auto it = specs().find(id);
  if (it == specs().end()) fail(ErrorKind::Config, "unknown experiment '" + id + "'");
  return it->second;
}

// ---- parameter access ----

struct Params {
  const json& j;
  double num(const char* k) const { return j.at(k).get<double>(); }
  int integer(const char* k) const {
    double v = num(k);
    if (v != std::floor(v)) fail(ErrorKind::Config, std::string(k) + " must be an integer");
    return static_cast<int>(v);
  }
  std::string str(const char* k) const { return j.at(k).get<std::string>(); }
  std::vector<double> list(const char* k) const { return j.at(k).get<std::vector<double>>(); }
  Vec vec(const char* k) const {
    auto v = list(k);
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
};

// ---- output sink ----

struct Sink {
  std::string dir;
  TableFormat format;
  ExperimentResult& res;

  bool on() const { return !dir.empty(); }
  void json_file(const std::string& name, const json& j) {
    if (!on()) return;
    write_json(join_path(dir, name), j);
    res.artifacts.push_back(name);
  }
  void table(const std::string& stem, const Table& t) {
    if (!on()) return;
    res.artifacts.push_back(write_table(dir, stem, t, format));
  }
  void field(const std::string& name, const std::vector<Vec>& pts, const std::vector<FieldValue>& v) {
    if (!on()) return;
    write_grid_field(join_path(dir, name), pts, v);
    res.artifacts.push_back(name);
  }
  void phase(const std::string& name, const PhaseField& f) {
    if (!on()) return;
    write_phase_field(join_path(dir, name), f);
    res.artifacts.push_back(name);
  }
  void matrix(const std::string& name, const Mat& m) {
    if (!on()) return;
    write_matrix(join_path(dir, name), m);
    res.artifacts.push_back(name);
  }
  void cmatrix(const std::string& name, const CMat& m) {
    if (!on()) return;
    write_complex_matrix(join_path(dir, name), m);
    res.artifacts.push_back(name);
  }
  void snapshots(const std::string& name, const SnapshotSet& s) {
    if (!on()) return;
    write_snapshots(join_path(dir, name), s);
    res.artifacts.push_back(name);
    std::string side = name.substr(0, name.rfind('.')) + ".json";
    res.artifacts.push_back(side);
  }
};

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

std::string fmt_num(double v) {
  std::string s = format_double(v);
  for (auto& c : s)
    if (c == '.') c = 'p';
  return s;
}

CMat left_vectors(const std::vector<Eigenpair>& pairs) {
  if (pairs.empty()) return {};
  CMat W(pairs[0].left.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) W.col(static_cast<Eigen::Index>(i)) = pairs[i].left;
  return W;
}

CMat right_vectors(const std::vector<Eigenpair>& pairs) {
  if (pairs.empty()) return {};
  CMat V(pairs[0].right.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) V.col(static_cast<Eigen::Index>(i)) = pairs[i].right;
  return V;
}

void write_spectrum(Sink& out, const std::string& stem, const Mat& K, const std::vector<Eigenpair>& pairs) {
  out.json_file(stem + ".json", spectrum_to_json(K, pairs));
  out.cmatrix(stem + "_left.csv", left_vectors(pairs));
  out.cmatrix(stem + "_right.csv", right_vectors(pairs));
}

void write_model(Sink& out, const KoopmanModel& m) {
  json j = model_to_json(m);
  j["K_file"] = "K.csv";
  out.json_file("model.json", j);
  out.matrix("K.csv", m.K);
}

// Random point in a box from the counter generator.
Vec box_point(const Vec& lo, const Vec& hi, std::uint64_t seed, std::uint64_t stream, std::uint64_t& n) {
  Vec x(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * counter_uniform(seed, stream, n++);
  return x;
}

struct AlgebraResult {
  double max_residual = 0.0;  // max |phi(Fx) - lambda phi(x)| / (1 + |phi(x)|)
  std::size_t points = 0;
  std::size_t combinations = 0;
};

// phi_a^p phi_b^q against the flow on random points where both principal functions
// stay in [min_abs, 1/min_abs] at x and F x.
AlgebraResult algebra_check(const BenchmarkSystem& sys, const std::string& na, const std::string& nb, double dt,
                            const Vec& lo, const Vec& hi, int n_points, int pmin, int pmax, std::uint64_t seed,
                            double min_abs) {
  auto a = EigenfunctionExpr::from_analytic(sys.eigenfunction(na), dt);
  auto b = EigenfunctionExpr::from_analytic(sys.eigenfunction(nb), dt);
  FlowMap F = best_flow(sys, dt, 1e-13, 1e-15);
  auto ok = [&](const FieldValue& v) {
    double m = std::abs(v.value);
    return !v.singular && std::isfinite(m) && m >= min_abs && m <= 1.0 / min_abs;
  };
  std::vector<Vec> xs, ys;
  std::uint64_t n = 0;
  while (static_cast<int>(xs.size()) < n_points) {
    if (n > 200ull * static_cast<std::uint64_t>(n_points) * static_cast<std::uint64_t>(lo.size()))
      fail(ErrorKind::EmptySupport, "too few non-singular points for the algebra check");
    Vec x = box_point(lo, hi, seed, 11, n);
    Vec y;
    try {
      y = flow(F, x);
    } catch (const Error&) {
      continue;
    }
    if (!y.allFinite()) continue;
    if (ok(a.eval(x)) && ok(b.eval(x)) && ok(a.eval(y)) && ok(b.eval(y))) {
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  AlgebraResult r;
  r.points = xs.size();
  for (int p = pmin; p <= pmax; ++p)
    for (int q = pmin; q <= pmax; ++q) {
      auto e = monomial(a, p, b, q);
      cplx lam = e.eigenvalue();
      ++r.combinations;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        FieldValue fx = e.eval(xs[i]), fy = e.eval(ys[i]);
        if (fx.singular || fy.singular) fail(ErrorKind::Internal, "screened point came back singular");
        double res = std::abs(fy.value - lam * fx.value) / (1.0 + std::abs(fx.value));
        r.max_residual = std::max(r.max_residual, res);
      }
    }
  return r;
}

Mat linear_matrix(const SystemParams& p) {
  Mat A(2, 2);
  A << p.at("a11"), p.at("a12"), p.at("a21"), p.at("a22");
  return A;
}

std::vector<cplx> eigenvalues_of(const Mat& M) {
  Eigen::EigenSolver<Mat> es(M, false);
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), spectrum_order);
  return out;
}

std::vector<cplx> lambdas(const std::vector<Eigenpair>& pairs) {
  std::vector<cplx> out;
  for (auto& p : pairs) out.push_back(p.lambda);
  return out;
}

json cjson(cplx z) { return complex_to_json(z); }

// ---------------------------------------------------------------------------

void run_linear2d(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  BenchmarkSystem sys = make_system(SystemId::Linear2d);
  const double dt = P.num("dt");

  SamplingOptions so;
  so.n_pairs = static_cast<std::size_t>(P.integer("n_pairs"));
  so.dt = dt;
  so.box_lo = Vec::Constant(2, P.num("box_lo"));
  so.box_hi = Vec::Constant(2, P.num("box_hi"));
  so.seed = cfg.seed;
  so.method = FlowMethod::Exact;
  SnapshotSet data = sample_snapshots(sys, so);
  Dictionary id = Dictionary::identity(2);
  KoopmanModel model = fit_edmd(data, id, {0.0, true});
  auto pairs = deflate_spectrum(model.K, 2);

  // Oracle: spectrum of the matrix exponential.
  Mat E = (linear_matrix(sys.params) * dt).exp();
  auto target = eigenvalues_of(E);
  double gap = multiset_distance(lambdas(pairs), target);
  res.criteria.push_back(make_criterion("DMD eigenvalues match exp(A dt)", 1, gap, "<=", P.num("eig_tol")));
  json spec_rep = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i)
    spec_rep.push_back({{"computed", cjson(pairs[i].lambda)}, {"target", cjson(target[i])}});
  res.report["spectrum"] = spec_rep;

  // Grid flows and constants.
  EvalGrid g(Vec::Constant(2, P.num("grid_lo")), Vec::Constant(2, P.num("grid_hi")), P.num("grid_h"));
  GridFlow gx = grid_flow(g, make_flow(sys, dt, FlowMethod::Exact));
  GridFlow ge = grid_flow(g, make_flow(sys, dt, FlowMethod::Euler, P.num("euler_step")));
  const double eps_G = integration_error_sup(ge.images, gx.images);
  const double L = spectral_norm_bound_L(id, g), M = feature_sup_M(id, g);
  res.report["eps_G"] = eps_G;
  res.report["L"] = L;
  res.report["M"] = M;

  const int p_check = P.integer("p_check");
  const double slack = P.num("bound_slack"), dw = P.num("delta_w");
  const auto epsilons = P.list("epsilons");
  int violations = 0;
  int worst_gap = 0;
  Table bounds{{"function", "p", "trajectory_error_integration", "bound_integration", "trajectory_error_eigenvector",
                "bound_eigenvector"},
               {}};
  Table crossing{{"function", "epsilon", "p_algorithm", "p_empirical"}, {}};
  std::vector<ExtensionResult> extensions;
  json cross_rep = json::array();
  EvalGrid fg(Vec::Constant(2, P.num("grid_lo")), Vec::Constant(2, P.num("grid_hi")), P.num("field_grid_h"));
  auto fpts = fg.points();

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string name = "phi" + std::to_string(i + 1);
    auto base = expr_from_left(id, pairs[i], name);
    const cplx lam = pairs[i].lambda;

    // Eigenvector error of norm dw: rotate the unit w towards an orthogonal direction.
    CVec w = pairs[i].left / pairs[i].left.norm();
    CVec u(2);
    u << -std::conj(w[1]), std::conj(w[0]);
    double theta = 2.0 * std::asin(0.5 * dw);
    CVec wp = std::cos(theta) * w + std::sin(theta) * u;
    auto perturbed = EigenfunctionExpr::from_weights(id, wp, lam, name + "_dw");
    CfgTable cfg_table(id, gx, lam);

    std::vector<double> te_int;
    for (int p = 1; p <= kDefaultPMax; ++p) te_int.push_back(trajectory_error(monomial(base, p), ge, p).value);
    for (int p = 1; p <= p_check; ++p) {
      double tc = te_int[p - 1];
      double bc = continuous_bound(std::abs(lam), M, L, eps_G, p);
      double td = trajectory_error(monomial(perturbed, p), gx, p).value;
      double bd = discrete_bound((wp - w).norm(), cfg_table(p), p);
      if (tc > bc * (1.0 + slack)) ++violations;
      if (td > bd * (1.0 + slack)) ++violations;
      bounds.add({static_cast<double>(i + 1), static_cast<double>(p), tc, bc, td, bd});
    }

    for (double eps : epsilons) {
      auto ext = extend_continuous(base, &ge, eps, eps_G, L, M);
      int p_alg = ext.max_power();
      int p_emp = kDefaultPMax;
      for (int p = 1; p <= kDefaultPMax; ++p)
        if (te_int[p - 1] > eps) {
          p_emp = p - 1;
          break;
        }
      worst_gap = std::max(worst_gap, std::abs(p_alg - p_emp));
      crossing.add({static_cast<double>(i + 1), eps, static_cast<double>(p_alg), static_cast<double>(p_emp)});
      cross_rep.push_back({{"function", name}, {"epsilon", eps}, {"p_algorithm", p_alg}, {"p_empirical", p_emp}});
      for (auto& it : ext.items)
        out.field("field_" + name + "_eps" + fmt_num(eps) + "_p" + std::to_string(it.power) + ".csv", fpts,
                  it.expr.eval_points(fpts));
      extensions.push_back(std::move(ext));
    }
  }
  res.criteria.push_back(make_criterion("trajectory errors within both bounds for p = 1.." + std::to_string(p_check), 2,
                                        violations, "<=", 0.0, "violations counted beyond the relative slack"));
  res.criteria.push_back(make_criterion("suggested maximal power vs empirical crossing", 3, worst_gap, "<=",
                                        P.num("crossing_tol"), "largest |p_algorithm - p_empirical|"));
  res.report["crossings"] = cross_rep;

  out.snapshots("snapshots.csv", data);
  write_model(out, model);
  write_spectrum(out, "spectrum", model.K, pairs);
  out.json_file("extension.json", extension_to_json(extensions));
  out.table("bounds", bounds);
  out.table("crossings", crossing);
}

// ---------------------------------------------------------------------------

void run_softplus(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  BenchmarkSystem sys = make_system(SystemId::Softplus2d);
  const double dt = P.num("dt");
  SamplingOptions so;
  so.n_pairs = static_cast<std::size_t>(P.integer("n_pairs"));
  so.dt = dt;
  so.box_lo = Vec::Constant(2, P.num("box_lo"));
  so.box_hi = Vec::Constant(2, P.num("box_hi"));
  so.latent_box = true;
  so.seed = cfg.seed;
  so.method = FlowMethod::Exact;
  SnapshotSet data = sample_snapshots(sys, so);
  Dictionary dict = rbf_dictionary(data.X, P.integer("n_centers"), P.num("bandwidth"), cfg.seed);
  KoopmanModel model = fit_edmd(data, dict, {P.num("ridge"), false});

  EvalGrid g(Vec::Constant(2, P.num("grid_lo")), Vec::Constant(2, P.num("grid_hi")), P.num("grid_h"));
  Rk45Options ro;
  ro.rtol = P.num("rk45_rtol");
  ro.atol = P.num("rk45_atol");
  GridFlow gn = grid_flow(g, make_flow(sys, dt, FlowMethod::Rk45, 1e-3, ro));
  GridFlow gx = grid_flow(g, make_flow(sys, dt, FlowMethod::Exact));
  const double eps_G = integration_error_sup(gn.images, gx.images);
  const double L = spectral_norm_bound_L(dict, g), M = feature_sup_M(dict, g);
  const double eps = P.num("epsilon");
  const int n = P.integer("n_eigenpairs");
  auto it = iterative_koopman_eigensolver(model.K, dict, n, eps, eps_G, L, M, &gn);

  double worst_res = 0.0;
  int min_power = std::numeric_limits<int>::max();
  int violations = 0;
  Table powers{{"index", "re", "im", "max_power", "residual"}, {}};
  const double knorm = model.K.norm();
  EvalGrid fg(Vec::Constant(2, P.num("grid_lo")), Vec::Constant(2, P.num("grid_hi")), P.num("field_grid_h"));
  auto fpts = fg.points();
  for (std::size_t i = 0; i < it.pairs.size(); ++i) {
    auto r = eigen_residuals(model.K, it.pairs[i]);
    double rel = std::max(r[0], r[1]) / knorm;
    worst_res = std::max(worst_res, rel);
    const auto& ext = it.extensions[i];
    min_power = std::min(min_power, ext.max_power());
    for (auto& item : ext.items) {
      if (item.report.bound > eps) ++violations;
      if (!(item.report.trajectory_error <= eps)) ++violations;
      out.field("field_phi" + std::to_string(i + 1) + "_p" + std::to_string(item.power) + ".csv", fpts,
                item.expr.eval_points(fpts));
    }
    powers.add({static_cast<double>(i + 1), it.pairs[i].lambda.real(), it.pairs[i].lambda.imag(),
                static_cast<double>(ext.max_power()), rel});
  }
  if (it.pairs.empty()) min_power = 0;
  res.criteria.push_back(make_criterion("eigensolver residuals relative to |K|", 4, worst_res, "<=", P.num("residual_tol")));
  res.criteria.push_back(make_criterion("every eigenpair extends to the target power", 4, min_power, ">=",
                                        P.integer("p_target"), "smallest certified maximal power"));
  res.criteria.push_back(make_criterion("emitted powers keep bound and measured error within epsilon", 4, violations,
                                        "<=", 0.0));
  res.report["eps_G"] = eps_G;
  res.report["L"] = L;
  res.report["M"] = M;
  res.report["fit_residual"] = model.fit_residual;
  res.report["k_norm"] = knorm;

  out.snapshots("snapshots.csv", data);
  write_model(out, model);
  write_spectrum(out, "spectrum", model.K, it.pairs);
  out.json_file("extension.json", extension_to_json(it.extensions));
  out.table("powers", powers);
}

// ---------------------------------------------------------------------------

std::vector<Vec> line_points(double lo, double hi, int n) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) pts.push_back(Vec::Constant(1, lo + (hi - lo) * i / (n - 1)));
  return pts;
}

void run_bridge1d(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  const double a = P.num("a"), b = P.num("b"), dt = P.num("dt");
  BenchmarkSystem q = make_system(SystemId::Quad1d, {{"a", a}, {"b", b}});
  const double wlo = P.num("window_lo"), whi = P.num("window_hi");

  // Product algebra on the analytic pair.
  auto alg = algebra_check(q, "phi_k1", "phi_k2", dt, Vec::Constant(1, P.num("pca_lo")), Vec::Constant(1, P.num("pca_hi")),
                           P.integer("algebra_points"), P.integer("algebra_min_power"), P.integer("algebra_max_power"),
                           cfg.seed, 0.05);
  res.criteria.push_back(make_criterion("quad1d products satisfy the eigen-relation", 5, alg.max_residual, "<=",
                                        P.num("algebra_tol"), "max |phi(Fx) - lambda phi(x)| / (1 + |phi(x)|)"));

  // Log-PCA of powers of the analytic pair.
  auto k1 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k1"), dt);
  auto k2 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k2"), dt);
  std::vector<Vec> pts;
  const double collar = P.num("pca_collar");
  for (auto& x : line_points(P.num("pca_lo"), P.num("pca_hi"), P.integer("pca_points")))
    if (std::abs(x[0] - a) > collar && std::abs(x[0] - b) > collar) pts.push_back(x);
  std::vector<Vec> fields;
  for (int m = 1; m <= P.integer("pca_max_power"); ++m)
    for (double s : {1.0, -1.0}) {
      fields.push_back(log_abs_field(monomial(k1, s * m), pts));
      fields.push_back(log_abs_field(monomial(k2, s * m), pts));
    }
  PrincipalFilter pf = principal_filter(fields);
  double ratio = pf.singular_values.size() > 1 ? pf.singular_values[1] / pf.singular_values[0] : 0.0;
  res.criteria.push_back(make_criterion("log-PCA of the analytic family has rank one", 6, ratio, "<=", P.num("pca_tol"),
                                        "sigma_2 / sigma_1"));
  Table sv{{"index", "singular_value"}, {}};
  for (Eigen::Index i = 0; i < pf.singular_values.size(); ++i) sv.add({static_cast<double>(i + 1), pf.singular_values[i]});
  out.table("log_pca_singular_values", sv);
  Table pc{{"x", "component"}, {}};
  for (std::size_t i = 0; i < pts.size(); ++i) pc.add({pts[i][0], pf.basis(static_cast<Eigen::Index>(i), 0)});
  out.table("log_pca_component", pc);

  // Analytic bridge.
  BridgeMap am = fit_bridge(k1, k2, wlo, whi, 0.0);
  res.criteria.push_back(make_criterion("analytic bridge constant is -1", 7, std::abs(am.c_forward + 1.0), "<=",
                                        P.num("c_tol"), "|c_forward + 1|"));
  out.json_file("bridge_analytic.json", bridge_to_json(am));

  // EDMD families at both steady states.
  LocalFamilyOptions lo;
  lo.radius = P.num("radius");
  lo.n_pairs = static_cast<std::size_t>(P.integer("local_pairs"));
  lo.dt = dt;
  lo.n_centers = P.integer("n_centers");
  lo.centers_lo = P.num("pca_lo");
  lo.centers_hi = P.num("pca_hi");
  lo.bandwidth = P.num("bandwidth");
  lo.ridge = P.num("local_ridge");
  lo.seed = cfg.seed;
  LocalFamily left = fit_local_family(q, Vec::Constant(1, a), lo);
  LocalFamily right = fit_local_family(q, Vec::Constant(1, b), lo);
  if (left.members.empty() || right.members.empty())
    fail(ErrorKind::EmptySupport, "a local family has no accepted member");
  BridgeMap em = fit_bridge(left, right, wlo, whi, P.num("tikhonov"));
  double overlap = std::max(em.overlap_forward, em.overlap_backward);
  res.criteria.push_back(make_criterion("EDMD bridge overlap residual", 7, overlap, "<=", P.num("overlap_tol")));
  out.json_file("bridge_edmd.json", bridge_to_json(em));
  json fam = json::array();
  for (const LocalFamily* f : {&left, &right}) {
    json members = json::array();
    for (std::size_t i = 0; i < f->members.size(); ++i)
      members.push_back({{"lambda", cjson(f->members[i].eigenvalue())}, {"p1_error", f->member_errors[i]}});
    fam.push_back({{"anchor", f->anchor[0]},
                   {"time_reversed", f->time_reversed},
                   {"members", members},
                   {"rejected_complex", f->rejected_complex},
                   {"rejected_spurious", f->rejected_spurious}});
  }
  out.json_file("families.json", fam);

  // Continue the a-family past b through the b-family, and compare with phi_k1.
  std::vector<Vec> beyond;
  for (auto& x : line_points(b, b + 0.5, 201))
    if (x[0] - b >= 1e-2) beyond.push_back(x);
  auto cont = continue_across(right.members[0], em.c_backward, beyond);
  auto truth = k1.eval_points(beyond);
  res.report["edmd_continuation_error"] = relative_magnitude_error(cont, truth);
  out.field("continued_edmd.csv", beyond, cont);

  // Cubic system: continuation across its middle steady state.
  BenchmarkSystem cub = make_system(SystemId::Cubic1d);
  std::vector<double> ss;
  for (auto& x : cub.steady_states) ss.push_back(x[0]);
  std::sort(ss.begin(), ss.end());
  auto p1 = EigenfunctionExpr::from_analytic(cub.eigenfunction("phi1"), dt);
  auto p2 = EigenfunctionExpr::from_analytic(cub.eigenfunction("phi2"), dt);
  BridgeMap cm = fit_bridge(p1, p2, P.num("cubic_window_lo"), P.num("cubic_window_hi"), 0.0);
  const double cb = ss[1], cc = ss[2], ccollar = P.num("cubic_collar");
  std::vector<Vec> cpts;
  for (auto& x : line_points(cb, cc - 0.1, P.integer("cubic_points")))
    if (x[0] - cb > ccollar) cpts.push_back(x);
  auto ccont = continue_across(p2, cm.c_backward, cpts);
  double cerr = relative_magnitude_error(ccont, p1.eval_points(cpts));
  res.criteria.push_back(make_criterion("cubic continuation across b matches the analytic magnitude", 7, cerr, "<=",
                                        P.num("continuation_tol"), "relative RMS of magnitudes"));
  out.json_file("bridge_cubic.json", bridge_to_json(cm));
  out.field("continued_cubic.csv", cpts, ccont);
  res.report["algebra_points"] = alg.points;
  res.report["algebra_combinations"] = alg.combinations;
  res.report["pca_rank"] = pf.rank;
}

// ---------------------------------------------------------------------------

void run_lin5d(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  const double dt = P.num("dt");
  BenchmarkSystem sys = make_system(SystemId::Lin5d, {{"a", P.num("a")}, {"b", P.num("b")}});
  Vec lo = Vec::Constant(2, P.num("box_lo")), hi = Vec::Constant(2, P.num("box_hi"));
  EvalGrid g(lo, hi, P.num("grid_h"));
  auto pts = g.points();

  // Closed forms.
  auto f1 = EigenfunctionExpr::from_analytic(sys.eigenfunction("phi1"), dt);
  auto f2 = EigenfunctionExpr::from_analytic(sys.eigenfunction("phi2"), dt);
  auto f3 = EigenfunctionExpr::from_analytic(sys.eigenfunction("phi3"), dt);
  double analytic_gap = 0.0;
  for (auto& x : pts) {
    analytic_gap = std::max(analytic_gap, std::abs(monomial(f1, 2).eval(x).value - f2.eval(x).value));
    analytic_gap = std::max(analytic_gap, std::abs(monomial(f1, 3).eval(x).value - f3.eval(x).value));
  }
  analytic_gap = std::max(analytic_gap, std::abs(monomial(f1, 2).eigenvalue() - f2.eigenvalue()));
  analytic_gap = std::max(analytic_gap, std::abs(monomial(f1, 3).eigenvalue() - f3.eigenvalue()));

  // Data-driven: monomial EDMD, then compare the computed phi2, phi3 with powers of phi1.
  SamplingOptions so;
  so.n_pairs = static_cast<std::size_t>(P.integer("n_pairs"));
  so.dt = dt;
  so.box_lo = lo;
  so.box_hi = hi;
  so.seed = cfg.seed;
  so.method = FlowMethod::Exact;
  SnapshotSet data = sample_snapshots(sys, so);
  Dictionary dict = Dictionary::monomial_total_degree(2, P.integer("degree"));
  KoopmanModel model = fit_edmd(data, dict, {0.0, false});
  auto pairs = dense_eigenpairs(model.K);
  auto nearest = [&](cplx target) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pairs.size(); ++i)
      if (std::abs(pairs[i].lambda - target) < std::abs(pairs[best].lambda - target)) best = i;
    return expr_from_left(dict, pairs[best]);
  };
  auto e1 = nearest(f1.eigenvalue()), e2 = nearest(f2.eigenvalue()), e3 = nearest(f3.eigenvalue());
  // Relative RMS after the best scalar fit; eigenfunctions are only defined up to scale.
  auto scaled_gap = [&](const EigenfunctionExpr& got, const EigenfunctionExpr& want) {
    auto gv = got.eval_points(pts), wv = want.eval_points(pts);
    cplx num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      num += std::conj(gv[i].value) * wv[i].value;
      den += std::norm(gv[i].value);
    }
    cplx c = num / den;
    double err = 0.0, nrm = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      err += std::norm(c * gv[i].value - wv[i].value);
      nrm += std::norm(wv[i].value);
    }
    return std::sqrt(err / nrm);
  };
  double edmd_gap = std::max(scaled_gap(e2, monomial(e1, 2)), scaled_gap(e3, monomial(e1, 3)));
  double eig_gap = std::max(std::abs(e2.eigenvalue() - monomial(e1, 2).eigenvalue()),
                            std::abs(e3.eigenvalue() - monomial(e1, 3).eigenvalue()));
  const double tol = P.num("identity_tol");
  res.criteria.push_back(make_criterion("closed forms: phi2 = phi1^2 and phi3 = phi1^3", 5, analytic_gap, "<=", tol));
  res.criteria.push_back(make_criterion("EDMD eigenfunctions: phi2 = c phi1^2 and phi3 = c phi1^3", 5,
                                        std::max(edmd_gap, eig_gap), "<=", tol,
                                        "relative RMS after a scalar fit, and eigenvalue gap"));

  auto alg = algebra_check(sys, "phi1", "phi4", dt, lo, hi, P.integer("algebra_points"), P.integer("algebra_min_power"),
                           P.integer("algebra_max_power"), cfg.seed, 0.05);
  res.criteria.push_back(make_criterion("lin5d products satisfy the eigen-relation", 5, alg.max_residual, "<=",
                                        P.num("algebra_tol"), "phi1^p phi4^q"));
  res.report["edmd_gap"] = edmd_gap;
  res.report["eigenvalue_gap"] = eig_gap;
  res.report["algebra_points"] = alg.points;

  write_model(out, model);
  write_spectrum(out, "spectrum", model.K, pairs);
  out.field("field_phi1_edmd.csv", pts, e1.eval_points(pts));
  out.field("field_phi2_edmd.csv", pts, e2.eval_points(pts));
  out.field("field_phi3_edmd.csv", pts, e3.eval_points(pts));
}

// ---------------------------------------------------------------------------

void run_polar(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  PolarParams p{P.num("mu"), P.num("omega"), P.num("alpha"), P.num("C")};
  BenchmarkSystem sys = make_system(SystemId::PolarLC, {{"mu", p.mu}, {"omega", p.omega}, {"alpha", p.alpha}, {"C", p.C}});
  const int n = P.integer("samples");
  std::uint64_t k = 0;
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * counter_uniform(cfg.seed, 21, k++); };

  double ti = 0.0;
  for (int i = 0; i < n; ++i) {
    cplx v = std::polar(std::pow(10.0, u(-2.0, 2.0)), u(-kPi, kPi));
    cplx back = transform_Ti(transform_Ti_inv(v, p.mu, p.alpha, p.C), p.mu, p.alpha, p.C);
    ti = std::max(ti, std::abs(back - v) / std::abs(v));
  }
  res.criteria.push_back(make_criterion("T_i of T_i^-1 is the identity", 8, ti, "<=", P.num("ti_tol"),
                                        "relative error over random nonzero inputs"));

  double iso = 0.0;
  const double sm = std::sqrt(p.mu);
  for (int i = 0; i < n; ++i) {
    PolarPoint in{u(0.001, 0.999) * sm, u(-kPi, kPi)};
    PolarPoint o = transform_To(in, p.mu, p.alpha, p.C);
    double a = std::arg(polar_phi_cycle(in.r, in.theta, p));
    double b = std::arg(polar_phi_cycle(o.r, o.theta, p));
    iso = std::max(iso, std::abs(wrap_angle(a - b)));
  }
  res.criteria.push_back(make_criterion("T_o preserves the isochron", 8, iso, "<=", P.num("to_tol"), "largest angle gap"));

  PolarPoint hand = transform_To({0.5, 0.0}, 1.0, 0.0, 1.0);
  double hand_err = std::abs(hand.r - 2.0) + std::abs(wrap_angle(hand.theta));
  res.criteria.push_back(make_criterion("hand point r = 0.5 maps to r = 2", 8, hand_err, "<=", P.num("hand_tol"),
                                        "mu = C = 1, alpha = 0"));

  // A trajectory inside the cycle, carried outside point by point.
  std::vector<PolarPoint> traj;
  Vec x0 = v2(P.num("traj_r0") * std::cos(P.num("traj_theta0")), P.num("traj_r0") * std::sin(P.num("traj_theta0")));
  const int steps = P.integer("traj_steps");
  const double T = P.num("traj_T");
  Table tt{{"t", "r_in", "theta_in", "r_out", "theta_out", "singular"}, {}};
  for (int i = 0; i <= steps; ++i) {
    Vec x = polar_exact_flow(x0, T * i / steps, p);
    traj.push_back({x.norm(), std::atan2(x[1], x[0])});
  }
  auto mapped = map_trajectory_outside(traj, p);
  for (int i = 0; i <= steps; ++i)
    tt.add({T * i / steps, traj[i].r, traj[i].theta, mapped[i].point.r, mapped[i].point.theta,
            mapped[i].singular ? 1.0 : 0.0});
  double jump = max_jump_ratio(mapped);
  res.criteria.push_back(make_criterion("mapped trajectory has no branch jump", 0, jump, "<=", P.num("jump_limit"),
                                        "largest step over the mean of its neighbours"));
  out.table("trajectory_mapping", tt);

  EvalGrid g(P.num("field_lo"), P.num("field_hi"), P.num("field_h"), 2);
  for (const char* br : {"phi_cycle", "phi_steady"}) {
    IsofieldConfig ic;
    ic.method = PhaseMethod::Analytic;
    ic.branch = br;
    PhaseField f = isofield(sys, g, ic);
    out.phase(std::string("phase_") + br + ".csv", f);
    res.report[br] = phase_source_to_json(f.source, f.eigenvalue);
  }
}

// ---------------------------------------------------------------------------

void run_vdp(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  BenchmarkSystem vdp = make_system(SystemId::VanDerPol, {{"mu", P.num("mu")}});
  const double lo = P.num("grid_lo"), hi = P.num("grid_hi");
  const int gn = P.integer("grid_n");
  if (gn < 2) fail(ErrorKind::Config, "grid_n must be at least 2");
  EvalGrid g(lo, hi, (hi - lo) / (gn - 1), 2);
  auto ann = annulus_points(g, P.num("annulus_lo"), P.num("annulus_hi"));
  FlowMap fm{vdp.field, P.num("relation_dt"), FlowMethod::Rk45};
  fm.rk45.rtol = 1e-10;
  fm.rk45.atol = 1e-12;
  const double tol = P.num("relation_tol");

  struct Mode {
    const char* label;
    LaplaceMode mode;
    const char* obs;
  };
  for (Mode m : {Mode{"isochron", LaplaceMode::Rotation, "isochron_observable"},
                 Mode{"isostable", LaplaceMode::Floquet, "isostable_observable"}}) {
    IsofieldConfig ic;
    ic.mode = m.mode;
    ic.observable = P.str(m.obs);
    PhaseEvaluator ev = make_phase_evaluator(vdp, ic);
    RelationCheck rc = eigen_relation_check(ev, fm, ann);
    double rel = rc.max_abs > 0.0 ? rc.max_residual / rc.max_abs : INFINITY;
    res.criteria.push_back(make_criterion(std::string(m.label) + " field satisfies the flow relation", 9, rel, "<=", tol,
                                          "max residual over max |phi| on the annulus"));
    std::vector<FieldValue> vals(g.size());
    parallel_for(g.size(), [&](std::size_t i) { vals[i] = ev.eval(g.point(i)); });
    PhaseField f{g, std::move(vals), ev.eigenvalue, ev.source, ev.cycle};
    out.phase(std::string("phase_") + m.label + ".csv", f);
    json src = phase_source_to_json(ev.source, ev.eigenvalue);
    src["relation_checked"] = rc.checked;
    res.report[m.label] = src;
    if (ev.cycle) {
      res.report["cycle"] = {{"period", ev.cycle->period},
                             {"omega", ev.cycle->omega},
                             {"point", {ev.cycle->point[0], ev.cycle->point[1]}},
                             {"newton_iterations", ev.cycle->newton_iterations}};
    }
  }

  // Linear case: x2 is an eigenfunction of the triangular system, so its average is itself.
  BenchmarkSystem lin = make_system(SystemId::Linear2d);
  Observable x2 = observable_by_id("x2");
  LaplaceOptions lo_opt;
  lo_opt.horizon = 10.0;
  lo_opt.step = 0.01;
  lo_opt.rk45.rtol = 1e-13;
  lo_opt.rk45.atol = 1e-15;
  const double lam = lin.params.at("a22");
  std::vector<double> errs(ann.size());
  parallel_for(ann.size(), [&](std::size_t i) {
    errs[i] = std::abs(laplace_average(lin.field, x2, lam, ann[i], lo_opt) - ann[i][1]);
  });
  double trivial = errs.empty() ? 0.0 : *std::max_element(errs.begin(), errs.end());
  res.criteria.push_back(make_criterion("Laplace average is exact on a linear eigenfunction", 9, trivial, "<=",
                                        P.num("trivial_tol")));
  res.report["annulus_points"] = ann.size();
}

// ---------------------------------------------------------------------------

BenchmarkSystem time_reversed(const BenchmarkSystem& s) {
  BenchmarkSystem r = s;
  auto rhs = s.field.rhs;
  r.field.rhs = [rhs](const Vec& x, Vec& dx) {
    rhs(x, dx);
    dx = -dx;
  };
  r.field.jacobian = nullptr;
  if (auto ex = s.field.exact) r.field.exact = [ex](const Vec& x, double t) { return ex(x, -t); };
  return r;
}

std::vector<Vec> manifold_tangents(const ManifoldSample& m) {
  std::vector<Vec> t(m.points.size());
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    std::size_t a = i, b = i;
    if (i > 0 && m.branch[i - 1] == m.branch[i]) a = i - 1;
    if (i + 1 < m.points.size() && m.branch[i + 1] == m.branch[i]) b = i + 1;
    t[i] = m.points[b] - m.points[a];
  }
  return t;
}

Table manifold_table(const ManifoldSample& m) {
  Table t{{"index", "branch", "x1", "x2"}, {}};
  for (std::size_t i = 0; i < m.points.size(); ++i)
    t.add({static_cast<double>(i), static_cast<double>(m.branch[i]), m.points[i][0], m.points[i][1]});
  return t;
}

void run_saddle(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  BenchmarkSystem sad = make_system(
      SystemId::Saddle2d, {{"lambda1", P.num("lambda1")}, {"lambda2", P.num("lambda2")}, {"angle_deg", P.num("angle_deg")}});
  const auto n = static_cast<std::size_t>(P.integer("manifold_n"));
  auto un = unstable_manifold_sample(sad, n, sad.sample_lo, sad.sample_hi, Vec::Zero(2));
  auto st = unstable_manifold_sample(time_reversed(sad), n, sad.sample_lo, sad.sample_hi, Vec::Zero(2));
  const auto& phi1 = sad.eigenfunction("phi1");
  const auto& phi2 = sad.eigenfunction("phi2");
  double tu = min_transversality(phi2.eval, un.points, manifold_tangents(un));
  double ts = min_transversality(phi1.eval, st.points, manifold_tangents(st));
  const double tmin = P.num("transversality_min");
  res.criteria.push_back(make_criterion("phi2 level sets cross the unstable manifold", 0, tu, ">=", tmin));
  res.criteria.push_back(make_criterion("phi1 level sets cross the stable manifold", 0, ts, ">=", tmin));
  out.table("saddle_unstable_manifold", manifold_table(un));
  out.table("saddle_stable_manifold", manifold_table(st));

  EvalGrid sg(sad.sample_lo, sad.sample_hi, P.num("field_h"));
  auto spts = sg.points();
  for (auto& f : sad.eigenfunctions) {
    std::vector<FieldValue> v(spts.size());
    for (std::size_t i = 0; i < spts.size(); ++i) v[i] = f.eval(spts[i]);
    out.field("saddle_" + f.name + ".csv", spts, v);
  }

  BenchmarkSystem bi = make_system(SystemId::Bistable2d);
  double node_err = std::max((bi.steady_states[1] - v2(0.5078125, 0.125)).norm(),
                             (bi.steady_states[2] - v2(-0.4921875, 0.125)).norm());
  res.criteria.push_back(make_criterion("bistable nodes at the printed coordinates", 0, node_err, "<=", P.num("node_tol")));
  double pde = 0.0;
  for (auto& f : bi.eigenfunctions)
    pde = std::max(pde, pde_residual_max(bi, f, P.integer("pde_points"), cfg.seed));
  res.criteria.push_back(make_criterion("bistable eigenfunctions solve the generator equation", 0, pde, "<=",
                                        P.num("pde_tol")));
  auto bm = unstable_manifold_sample(bi, n, bi.sample_lo, bi.sample_hi, Vec::Zero(2));
  out.table("bistable_unstable_manifold", manifold_table(bm));
  EvalGrid bg(bi.sample_lo, bi.sample_hi, P.num("field_h"));
  auto bpts = bg.points();
  for (auto& f : bi.eigenfunctions) {
    std::vector<FieldValue> v(bpts.size());
    for (std::size_t i = 0; i < bpts.size(); ++i) v[i] = f.eval(bpts[i]);
    out.field("bistable_" + f.name + ".csv", bpts, v);
  }
}

// ---------------------------------------------------------------------------

void run_duffing(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  Params P{cfg.params};
  BenchmarkSystem sys =
      make_system(SystemId::Duffing, {{"delta", P.num("delta")}, {"beta", P.num("beta")}, {"alpha", P.num("alpha")}});
  const double dt = P.num("dt");
  const int spt = P.integer("samples_per_traj");
  SamplingOptions so;
  so.n_pairs = static_cast<std::size_t>(P.integer("trajectories")) * static_cast<std::size_t>(spt - 1);
  so.dt = dt;
  so.samples_per_traj = spt;
  so.box_lo = Vec::Constant(2, P.num("box_lo"));
  so.box_hi = Vec::Constant(2, P.num("box_hi"));
  so.seed = cfg.seed;
  so.method = FlowMethod::Rk45;
  SnapshotSet data = sample_snapshots(sys, so);
  Dictionary dict = rbf_dictionary(data.X, P.integer("n_centers"), P.num("bandwidth"), cfg.seed);
  KoopmanModel model = fit_edmd(data, dict, {P.num("ridge"), false});
  auto pairs = dense_eigenpairs(model.K);

  // Spirals from the steady-state search.
  double spiral = 0.0;
  const double xs = std::sqrt(-P.num("beta") / P.num("alpha"));
  for (auto& s : sys.steady_states)
    if (s.norm() > 1e-8) spiral = std::max(spiral, std::abs(std::abs(s[0]) - 3.1623) + std::abs(s[1]));
  res.criteria.push_back(make_criterion("stable spirals at (+-3.1623, 0)", 0, spiral, "<=", P.num("steady_tol")));
  res.report["spiral_x"] = xs;

  ManifoldSample ms = unstable_manifold_sample(sys, static_cast<std::size_t>(P.integer("manifold_n")),
                                               P.vec("window_lo"), P.vec("window_hi"), Vec::Zero(2));
  std::vector<Vec> X, Y;
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
    X.push_back(data.X.col(j));
    Y.push_back(data.Y.col(j));
  }

  const double filter = P.num("residual_filter"), floor = P.num("null_floor"), trivial = P.num("trivial_rate");
  double worst = INFINITY;
  int resolved = 0, real_count = 0;
  json evals = json::array();
  Table along{{"index", "branch", "x1", "x2"}, {}};
  std::vector<std::vector<double>> along_cols;
  EvalGrid fg(so.box_lo, so.box_hi, P.num("field_h"));
  auto fpts = fg.points();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const cplx lam = pairs[k].lambda;
    if (lam.imag() != 0.0) continue;
    ++real_count;
    const double l = lam.real();
    auto e = expr_from_left(dict, pairs[k], "phi" + std::to_string(k + 1));
    auto vx = e.eval_points(X), vy = e.eval_points(Y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i) {
      num += std::norm(vy[i].value - lam * vx[i].value);
      den += std::norm(vx[i].value);
    }
    double resid = std::sqrt(num / den);
    double rate = l > 0.0 ? -std::log(l) / dt : INFINITY;
    std::string why;
    if (!(l > floor)) why = "numerically null or negative";
    else if (!(l < 1.0) || rate < trivial) why = "lambda = 1 cluster or growing";
    else if (resid > filter) why = "spurious (one-step residual)";
    json item{{"index", k}, {"lambda", l}, {"rate", std::isfinite(rate) ? json(rate) : json()}, {"residual", resid}};
    if (!why.empty()) {
      item["excluded"] = why;
      evals.push_back(item);
      continue;
    }
    auto v = e.eval_points(ms.points);
    int good = 0, total = 0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      if (ms.branch[i] != ms.branch[i + 1]) continue;
      ++total;
      // Samples run outward from the saddle, so growth toward it means |v_i| >= |v_{i+1}|.
      if (std::abs(v[i].value) >= std::abs(v[i + 1].value)) ++good;
    }
    double frac = total ? static_cast<double>(good) / total : 0.0;
    item["monotone_fraction"] = frac;
    evals.push_back(item);
    worst = std::min(worst, frac);
    ++resolved;
    along.columns.push_back("abs_phi" + std::to_string(k + 1));
    std::vector<double> col;
    for (auto& fv : v) col.push_back(std::abs(fv.value));
    along_cols.push_back(std::move(col));
    out.field("field_phi" + std::to_string(k + 1) + ".csv", fpts, e.eval_points(fpts));
  }
  for (std::size_t i = 0; i < ms.points.size(); ++i) {
    std::vector<double> row{static_cast<double>(i), static_cast<double>(ms.branch[i]), ms.points[i][0], ms.points[i][1]};
    for (auto& c : along_cols) row.push_back(c[i]);
    along.add(std::move(row));
  }
  if (resolved == 0) worst = 0.0;
  res.criteria.push_back(make_criterion("resolved real eigenfunctions", 10, resolved, ">=", 1.0,
                                        "real, decaying, outside the lambda = 1 cluster, below the residual filter"));
  res.criteria.push_back(make_criterion("magnitude grows toward the saddle along the unstable manifold", 10, worst, ">=",
                                        P.num("monotone_fraction"), "smallest fraction over resolved eigenfunctions"));
  res.report["real_eigenvalues"] = evals;
  res.report["real_count"] = real_count;
  res.report["fit_residual"] = model.fit_residual;
  res.report["pairs"] = data.size();
  res.report["dropped"] = data.dropped;

  write_model(out, model);
  write_spectrum(out, "spectrum", model.K, pairs);
  out.table("manifold_values", along);
}

// ---------------------------------------------------------------------------

// Random P B P^-1 with a known spectrum: moduli 2 * 0.8^k, random signs, some rotation blocks.
Mat crossval_matrix(int n, std::mt19937_64& rng, std::vector<cplx>& expected) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat B = Mat::Zero(n, n);
  expected.clear();
  int i = 0, k = 0;
  while (i < n) {
    double mod = 2.0 * std::pow(0.8, k++);
    if (i + 1 < n && u(rng) < 0.4) {
      double ang = 0.3 + 2.5 * u(rng);
      B(i, i) = B(i + 1, i + 1) = mod * std::cos(ang);
      B(i, i + 1) = -mod * std::sin(ang);
      B(i + 1, i) = mod * std::sin(ang);
      expected.push_back(std::polar(mod, ang));
      expected.push_back(std::polar(mod, -ang));
      i += 2;
    } else {
      double sgn = u(rng) < 0.5 ? -1.0 : 1.0;
      B(i, i) = sgn * mod;
      expected.push_back(sgn * mod);
      i += 1;
    }
  }
  std::normal_distribution<double> gauss;
  auto orth = [&]() {
    Mat M(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) M(r, c) = gauss(rng);
    Eigen::HouseholderQR<Mat> qr(M);
    return Mat(qr.householderQ());
  };
  Vec s(n);
  for (int r = 0; r < n; ++r) s[r] = 1.0 + 2.0 * u(rng);
  Mat Pm = orth() * s.asDiagonal() * orth().transpose();
  return Pm * B * Pm.inverse();
}

using Runner = void (*)(const ExperimentConfig&, Sink&, ExperimentResult&);

Runner runner_for(const std::string& id) {
  static const std::map<std::string, Runner> r = {
      {"linear2d_dmd", run_linear2d}, {"softplus_edmd", run_softplus},   {"bridge1d", run_bridge1d},
      {"lin5d_check", run_lin5d},     {"polar_transforms", run_polar},   {"vdp_phase", run_vdp},
      {"saddle_fields", run_saddle},  {"duffing_edmd", run_duffing},
  };
  return r.at(id);
}

void finish(const ExperimentConfig& cfg, Sink& out, ExperimentResult& res) {
  if (!out.on()) return;
  // Without out_dir, so runs written to different directories stay byte-identical.
  json j = config_to_json(cfg);
  j.erase("out_dir");
  out.json_file("config.json", j);
  res.artifacts.push_back("summary.json");
  write_json(join_path(out.dir, "summary.json"), summary_to_json(res));
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {"linear2d_dmd", "softplus_edmd", "bridge1d",     "vdp_phase",
                                               "polar_transforms", "saddle_fields", "duffing_edmd", "lin5d_check"};
  return ids;
}

bool is_experiment(const std::string& id) { return specs().count(id) > 0; }

std::vector<ParamDoc> experiment_params(const std::string& id) { return spec_for(id).params; }
std::string experiment_title(const std::string& id) { return spec_for(id).title; }

ExperimentConfig default_config(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  for (auto& p : spec_for(id).params) c.params[p.key] = p.value;
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {{"schema_version", c.schema_version}, {"id", c.id},         {"params", c.params},
          {"seed", c.seed},                     {"out_dir", c.out_dir}, {"format", c.format}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
  for (auto& [k, v] : j.items())
    if (k != "schema_version" && k != "id" && k != "params" && k != "seed" && k != "out_dir" && k != "format")
      fail(ErrorKind::Config, "unknown config key '" + k + "'");
  try {
    int version = j.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
      fail(ErrorKind::Config, "unsupported schema_version " + std::to_string(version));
    if (!j.contains("id")) fail(ErrorKind::Config, "config needs an experiment id");
    ExperimentConfig c = default_config(j.at("id").get<std::string>());
    if (j.contains("params")) {
      const json& p = j.at("params");
      if (!p.is_object()) fail(ErrorKind::Config, "params must be an object");
      for (auto& [k, v] : p.items()) {
        if (!c.params.contains(k)) fail(ErrorKind::Config, "unknown parameter '" + k + "' for " + c.id);
        const json& def = c.params[k];
        bool same = (def.is_number() && v.is_number()) || (def.is_string() && v.is_string()) ||
                    (def.is_array() && v.is_array());
        if (!same) fail(ErrorKind::Config, "parameter '" + k + "' has the wrong type");
        c.params[k] = v;
      }
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.out_dir = j.value("out_dir", std::string{});
    c.format = j.value("format", std::string{"csv"});
    table_format_from_string(c.format);
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("bad config: ") + e.what());
  }
}

Criterion make_criterion(std::string name, int acceptance, double value, const std::string& relation, double threshold,
                         std::string note) {
  Criterion c;
  c.name = std::move(name);
  c.acceptance = acceptance;
  c.value = value;
  c.threshold = threshold;
  c.relation = relation;
  c.note = std::move(note);
  if (relation == "<=")
    c.pass = value <= threshold;
  else if (relation == ">=")
    c.pass = value >= threshold;
  else
    fail(ErrorKind::Contract, "relation must be <= or >=");
  return c;
}

bool ExperimentResult::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

json summary_to_json(const ExperimentResult& r) {
  json crit = json::array();
  for (auto& c : r.criteria) {
    json j{{"name", c.name},
           {"acceptance", c.acceptance},
           {"threshold", c.threshold},
           {"relation", c.relation},
           {"pass", c.pass}};
    j["value"] = std::isfinite(c.value) ? json(c.value) : json(nullptr);
    if (!c.note.empty()) j["note"] = c.note;
    crit.push_back(j);
  }
  return {{"experiment", r.id}, {"passed", r.passed()}, {"criteria", crit}, {"report", r.report},
          {"artifacts", r.artifacts}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  spec_for(cfg.id);
  ExperimentConfig full = config_from_json(config_to_json(cfg));
  ExperimentResult res;
  res.id = cfg.id;
  Sink out{cfg.out_dir, table_format_from_string(cfg.format), res};
  ensure_directory(cfg.out_dir);
  runner_for(cfg.id)(full, out, res);
  finish(full, out, res);
  return res;
}

double multiset_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) return INFINITY;
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (cplx z : a) {
    std::size_t best = b.size();
    double d = INFINITY;
    for (std::size_t j = 0; j < b.size(); ++j)
      if (!used[j] && std::abs(z - b[j]) < d) {
        d = std::abs(z - b[j]);
        best = j;
      }
    used[best] = true;
    worst = std::max(worst, d);
  }
  return worst;
}

ExperimentResult eigensolver_crossvalidation(const CrossValidationOptions& opt, const std::string& out_dir,
                                             const std::string& format) {
  if (opt.matrices < 1 || opt.dim_lo < 2 || opt.dim_hi < opt.dim_lo)
    fail(ErrorKind::Config, "cross-validation needs matrices >= 1 and 2 <= dim_lo <= dim_hi");
  ExperimentResult res;
  res.id = "eigensolver_crossvalidation";
  Sink out{out_dir, table_format_from_string(format), res};
  ensure_directory(out_dir);
  std::mt19937_64 rng(opt.seed);
  double worst = 0.0, worst_truth = 0.0;
  int failures = 0;
  Table t{{"matrix", "dimension", "deflation_vs_qr", "deflation_vs_truth"}, {}};
  for (int m = 0; m < opt.matrices; ++m) {
    int n = opt.dim_lo + m % (opt.dim_hi - opt.dim_lo + 1);
    std::vector<cplx> expected;
    Mat A = crossval_matrix(n, rng, expected);
    double d = INFINITY, dt = INFINITY;
    try {
      auto defl = lambdas(deflate_spectrum(A, n));
      auto qr = qr_eigenvalues(A);
      d = multiset_distance(defl, qr);
      dt = multiset_distance(defl, expected);
    } catch (const Error&) {
      ++failures;
    }
    worst = std::max(worst, d);
    worst_truth = std::max(worst_truth, dt);
    t.add({static_cast<double>(m), static_cast<double>(n), d, dt});
  }
  res.criteria.push_back(make_criterion("deflation and QR spectra agree as multisets", 11, worst, "<=", opt.tol,
                                        std::to_string(opt.matrices) + " matrices, dimensions " +
                                            std::to_string(opt.dim_lo) + "-" + std::to_string(opt.dim_hi)));
  res.report["worst_vs_constructed"] = worst_truth;
  res.report["solver_failures"] = failures;
  res.report["seed"] = opt.seed;
  out.table("crossvalidation", t);
  if (out.on()) {
    res.artifacts.push_back("summary.json");
    write_json(join_path(out_dir, "summary.json"), summary_to_json(res));
  }
  return res;
}

}  // namespace koopal
