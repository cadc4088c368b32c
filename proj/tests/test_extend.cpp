#include <doctest.h>

#include "koopal/extend.hpp"
#include "koopal/regression.hpp"

#include <cmath>
#include <random>

using namespace koopal;

namespace {

std::vector<Vec> line_points(double lo, double hi, int n) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) pts.push_back(Vec::Constant(1, lo + (hi - lo) * i / (n - 1)));
  return pts;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

// Straight double loop over the printed constant; shares nothing with CfgTable.
double cfg_oracle(const Dictionary& D, const GridFlow& gf, cplx lam, int p) {
  double acc = 0.0;
  for (std::size_t j = 0; j < gf.points.size(); ++j) {
    Vec px = D.eval(gf.points[j]), py = D.eval(gf.images[j]);
    double r = (py.cast<cplx>() - lam * px.cast<cplx>()).norm();
    double s = 0.0;
    for (int i = 0; i < p; ++i) s += std::pow(py.norm(), p - 1 - i) * std::pow(px.norm(), i) * std::pow(std::abs(lam), i);
    acc += (r * s) * (r * s);
  }
  return std::sqrt(acc / static_cast<double>(gf.points.size()));
}

}  // namespace

TEST_CASE("monomials of analytic eigenfunctions") {
  BenchmarkSystem l5 = make_system(SystemId::Lin5d);
  auto phi1 = EigenfunctionExpr::from_analytic(l5.eigenfunction("phi1"), 0.1);
  auto phi2 = EigenfunctionExpr::from_analytic(l5.eigenfunction("phi2"), 0.1);
  auto sq = monomial(phi1, 2);
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.05);
  for (auto& x : g.points()) CHECK(std::abs(sq.eval(x).value - phi2.eval(x).value) <= 1e-8);
  CHECK(std::abs(sq.eigenvalue() - phi2.eigenvalue()) <= 1e-12);

  auto same = monomial(phi1, 1);
  for (auto& x : g.points()) CHECK(same.eval(x).value == phi1.eval(x).value);

  BenchmarkSystem q = make_system(SystemId::Quad1d);
  auto k1 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k1"), 0.2);
  auto k2 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k2"), 0.2);
  auto inv = monomial(k1, -1);
  for (auto& x : line_points(1.0, 4.0, 301)) {
    if (std::abs(x[0] - 2.0) < 1e-3 || std::abs(x[0] - 3.0) < 1e-3) continue;
    CHECK(std::abs(inv.eval(x).value - k2.eval(x).value) <= 1e-8 * (1 + std::abs(k2.eval(x).value)));
  }
  CHECK(std::abs(inv.eigenvalue() - k2.eigenvalue()) <= 1e-12);
  // The reciprocal blows up at the zero of phi_k1.
  CHECK(inv.eval(Vec::Constant(1, 2.0)).singular);
  CHECK(inv.eval(Vec::Constant(1, 2.0 + 5e-7)).singular);
  CHECK_FALSE(monomial(k1, 2).eval(Vec::Constant(1, 2.0)).singular);
}

TEST_CASE("monomial eigenvalues follow the principal power law") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ang(-3.1, 3.1), mod(0.2, 1.5);
  for (int t = 0; t < 200; ++t) {
    cplx l1 = std::polar(mod(rng), ang(rng)), l2 = std::polar(mod(rng), ang(rng));
    auto one = [](const Vec&) { return FieldValue::regular(1.0); };
    auto a = EigenfunctionExpr::from_function("a", l1, one);
    auto b = EigenfunctionExpr::from_function("b", l2, one);
    double p = u(rng), q = std::round(u(rng));
    cplx want = principal_pow(l1, p) * principal_pow(l2, q);
    CHECK(std::abs(monomial(a, p, b, q).eigenvalue() - want) <= 1e-12 * (1 + std::abs(want)));
  }
}

TEST_CASE("log-linearity of monomials") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0), x(0.1, 1.9);
  auto f1 = EigenfunctionExpr::from_function("f1", 0.5, [](const Vec& z) { return FieldValue::regular(z[0] + 2.0); });
  auto f2 = EigenfunctionExpr::from_function("f2", 0.7, [](const Vec& z) { return FieldValue::regular(std::exp(z[0])); });
  for (int t = 0; t < 200; ++t) {
    double m1 = u(rng), m2 = u(rng);
    Vec z = Vec::Constant(1, x(rng));
    double lhs = std::log(std::abs(monomial(f1, m1, f2, m2).eval(z).value));
    double rhs = m1 * std::log(z[0] + 2.0) + m2 * z[0];
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(rhs)));
  }
}

TEST_CASE("real exponent matching") {
  CHECK(real_exponent_match(std::polar(1.0, M_PI / 2), std::polar(1.0, M_PI / 4)) == doctest::Approx(0.5));
  double p = real_exponent_match(std::polar(1.0, 0.3), std::polar(1.0, 0.9));
  CHECK(p == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(principal_pow(std::polar(1.0, 0.3), p) - std::polar(1.0, 0.9)) <= 1e-10);
  CHECK(real_exponent_match(cplx(-1.0, 0.0), std::polar(1.0, -M_PI / 2)) == doctest::Approx(-0.5));
  CHECK_THROWS_AS(real_exponent_match(cplx(1.0, 0.0), cplx(0.0, 1.0)), Error);
}

TEST_CASE("trajectory error of exact eigenpairs vanishes") {
  BenchmarkSystem s = make_system(SystemId::Linear2d);
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.05);
  GridFlow gf = grid_flow(g, make_flow(s, 0.2, FlowMethod::Exact));
  for (auto& f : s.eigenfunctions) {
    auto e = EigenfunctionExpr::from_analytic(f, 0.2);
    CHECK(trajectory_error(e, gf, 1).value <= 1e-10);
    CHECK(trajectory_error(monomial(e, 2), gf, 2).value <= 1e-7);  // square root of roundoff
    CHECK(trajectory_error(monomial(e, 2), gf, 1).value <= 1e-14);
  }
}

TEST_CASE("truth error with a rescaled and a noisy expression") {
  BenchmarkSystem s = make_system(SystemId::Linear2d);
  auto truth = s.eigenfunction("phi1").eval;
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.05);
  auto pts = g.points();
  auto twice = EigenfunctionExpr::from_function("2phi", 1.0, [&](const Vec& x) {
    FieldValue v = truth(x);
    v.value *= 2.0;
    return v;
  });
  TruthError te = truth_error(twice, truth, pts, 1, 1e-3);
  CHECK(te.c_mode.real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(te.value <= 1e-9);
  CHECK(te.excluded > 0);

  auto noisy = EigenfunctionExpr::from_function("noisy", 1.0, [&](const Vec& x) {
    FieldValue v = truth(x);
    v.value += 1e-6 * (2.0 * counter_uniform(1, 0, static_cast<std::uint64_t>(std::llround((x[0] + 5) * 1e4 + (x[1] + 5) * 1e8))) - 1.0);
    return v;
  });
  CHECK(truth_error(noisy, truth, pts, 1, 0.1).value <= 1e-5);

  auto zero = EigenfunctionExpr::from_function("z", 1.0, [](const Vec&) { return FieldValue::regular(0.0); });
  CHECK_THROWS_AS(truth_error(zero, truth, pts, 1, 1e-3), Error);
}

TEST_CASE("bound constant and closed-form bounds") {
  BenchmarkSystem s = make_system(SystemId::Linear2d);
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.1);
  Dictionary id = Dictionary::identity(2);
  GridFlow gf = grid_flow(g, make_flow(s, 0.2, FlowMethod::Exact));
  cplx lam = std::exp(-0.18);
  // p = 1: plain residual norm.
  std::vector<double> r;
  for (std::size_t j = 0; j < gf.points.size(); ++j) r.push_back((gf.images[j] - lam.real() * gf.points[j]).norm());
  CHECK(bound_constant_CFG(id, gf, lam, 1) == doctest::Approx(rms(r)).epsilon(1e-13));
  for (int p : {2, 3, 7}) {
    double a = bound_constant_CFG(id, gf, lam, p), b = cfg_oracle(id, gf, lam, p);
    CHECK(std::abs(a - b) <= 1e-12 * b);
  }
  GridFlow still{gf.points, gf.points};
  CHECK(bound_constant_CFG(id, still, 1.0, 4) == 0.0);

  CHECK(continuous_bound(1.0, 1.0, 1.0, 0.0, 3) == 0.0);
  CHECK(discrete_bound(0.0, 5.0, 3) == 0.0);
  CHECK(continuous_bound(1.0, 1.0, 1.0, 0.1, 2) == doctest::Approx(std::sqrt(0.21)).epsilon(1e-12));
}

TEST_CASE("continuous budget inverts the continuous bound") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int t = 0; t < 300; ++t) {
    double eps = u(rng), lam = u(rng) / 3, M = u(rng), L = u(rng);
    int p = 1 + static_cast<int>(rng() % 12);
    double b = continuous_budget(eps, lam, M, L, p);
    CHECK(b > 0.0);
    CHECK(continuous_bound(lam, M, L, b, p) == doctest::Approx(eps).epsilon(1e-9));
  }
}

TEST_CASE("extension loops and their stopping rules") {
  BenchmarkSystem s = make_system(SystemId::Linear2d);
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.1);
  Dictionary id = Dictionary::identity(2);
  GridFlow gf = grid_flow(g, make_flow(s, 0.2, FlowMethod::Exact));
  CVec w(2);
  w << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
  auto base = EigenfunctionExpr::from_weights(id, w, std::exp(-0.18));

  auto capped = extend_discrete(base, id, gf, 0.1, 0.0);
  CHECK(capped.items.size() == static_cast<std::size_t>(kDefaultPMax));
  CHECK(capped.status.find("never exceeded") != std::string::npos);

  auto none = extend_discrete(base, id, gf, 1e-9, 1e-6);
  CHECK(none.items.empty());
  CHECK(none.status.find("first power") != std::string::npos);

  auto some = extend_discrete(base, id, gf, 0.1, 1e-6);
  REQUIRE(!some.items.empty());
  for (auto& it : some.items) {
    CHECK(1e-6 <= it.budget);
    CHECK(it.report.trajectory_error <= it.report.bound * (1 + 1e-9) + 1e-12);
  }

  auto c0 = extend_continuous(base, &gf, 0.1, 0.0, 1.0, std::sqrt(2.0));
  CHECK(c0.items.size() == static_cast<std::size_t>(kDefaultPMax));
  auto c1 = extend_continuous(base, nullptr, 0.1, 1e-4, 1.0, std::sqrt(2.0));
  REQUIRE(!c1.items.empty());
  CHECK(std::isnan(c1.items[0].report.trajectory_error));
  int pm = c1.max_power();
  CHECK(1e-4 <= continuous_budget(0.1, std::exp(-0.18), std::sqrt(2.0), 1.0, pm));
  CHECK(1e-4 > continuous_budget(0.1, std::exp(-0.18), std::sqrt(2.0), 1.0, pm + 1));
}

TEST_CASE("iterative eigensolver matches per-pair extension") {
  Mat K = Vec::LinSpaced(2, 0.9, 0.5).asDiagonal();
  Dictionary id = Dictionary::identity(2);
  double M = std::sqrt(2.0), eps = 0.05, eg = 1e-3;
  auto res = iterative_koopman_eigensolver(K, id, 2, eps, eg, 1.0, M);
  REQUIRE(res.pairs.size() == 2);
  CHECK(res.pairs[0].lambda.real() == doctest::Approx(0.9));
  CHECK(res.pairs[1].lambda.real() == doctest::Approx(0.5));
  for (int i = 0; i < 2; ++i) {
    auto solo = extend_continuous(expr_from_left(id, res.pairs[i]), nullptr, eps, eg, 1.0, M);
    CHECK(solo.max_power() == res.extensions[i].max_power());
    CHECK(solo.status == res.extensions[i].status);
  }
  CHECK(iterative_koopman_eigensolver(K, id, 0, eps, eg, 1.0, M).pairs.empty());
  CHECK_THROWS_AS(iterative_koopman_eigensolver(K, id, 3, eps, eg, 1.0, M), Error);
}

TEST_CASE("iterative eigensolver handles conjugate pairs") {
  Mat K(3, 3);
  K << 0.8 * std::cos(0.5), -0.8 * std::sin(0.5), 0, 0.8 * std::sin(0.5), 0.8 * std::cos(0.5), 0, 0, 0, 0.3;
  auto res = iterative_koopman_eigensolver(K, Dictionary::identity(3), 3, 0.1, 1e-3, 1.0, 1.0);
  REQUIRE(res.pairs.size() == 3);
  CHECK(std::abs(res.pairs[1].lambda - std::conj(res.pairs[0].lambda)) <= 1e-12);
  CHECK(res.extensions[0].max_power() == res.extensions[1].max_power());
}

TEST_CASE("principal filter ranks") {
  BenchmarkSystem q = make_system(SystemId::Quad1d);
  auto k1 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k1"), 1.0);
  auto k2 = EigenfunctionExpr::from_analytic(q.eigenfunction("phi_k2"), 1.0);
  std::vector<Vec> pts;
  for (auto& x : line_points(1.0, 4.0, 601))
    if (std::abs(x[0] - 2.0) > 0.05 && std::abs(x[0] - 3.0) > 0.05) pts.push_back(x);
  std::vector<Vec> fields;
  for (int m = 1; m <= 5; ++m) {
    fields.push_back(log_abs_field(monomial(k1, m), pts));
    fields.push_back(log_abs_field(monomial(k2, m), pts));
    fields.push_back(log_abs_field(monomial(k1, -m), pts));
  }
  auto f = principal_filter(fields);
  CHECK(f.rank == 1);
  CHECK(f.singular_values[1] / f.singular_values[0] <= 1e-8);
  CHECK(f.coords.cols() == static_cast<Eigen::Index>(fields.size()));

  Vec a(50), b(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = std::sin(0.1 * i);
    b[i] = std::cos(0.37 * i) + 0.01 * i * i;
  }
  CHECK(principal_filter({a, b}).rank == 2);
  CHECK(principal_filter(std::vector<Vec>(6, a)).rank == 1);
  CHECK_THROWS_AS(principal_filter({}), Error);
}

TEST_CASE("normalization and json") {
  Dictionary id = Dictionary::identity(2);
  Eigenpair pr;
  pr.lambda = 0.9;
  pr.left = CVec::Zero(2);
  pr.left << cplx(0, -3), cplx(0, 4);
  auto e = expr_from_left(id, pr);
  // Largest weight real positive, unit 2-norm.
  CHECK(std::abs(e.eval(v2(0, 1)).value - 0.8) <= 1e-15);
  EvalGrid g(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 0.1);
  auto n = normalize_on(e, g.points());
  std::vector<cplx> vals;
  for (auto& v : n.eval_points(g.points())) vals.push_back(v.value);
  CHECK(rms(vals) == doctest::Approx(1.0).epsilon(1e-12));

  auto r = extend_continuous(e, nullptr, 0.1, 1e-3, 1.0, std::sqrt(2.0));
  auto j = extension_to_json({r});
  CHECK(j[0]["powers"].size() == r.items.size());
  CHECK(j[0]["powers"][0]["trajectory_error"].is_null());
}
