#include <doctest.h>

#include "koopal/phase.hpp"

#include <cmath>
#include <numbers>

using namespace koopal;

namespace {

constexpr double kPi = std::numbers::pi;

// Small deterministic generator for property checks.
struct Gen {
  std::uint64_t seed;
  std::uint64_t n = 0;
  double uniform(double lo, double hi) { return lo + (hi - lo) * counter_uniform(seed, 7, n++); }
};

double angle_gap(double a, double b) { return std::abs(wrap_angle(a - b)); }

Vec cart(double r, double th) {
  Vec v(2);
  v << r * std::cos(th), r * std::sin(th);
  return v;
}

// Period from the spacing of upward crossings of x1 = 0, found by bisection.
double crossing_period(const VectorField& f, const Vec& x0, int loops) {
  Rk45Options o;
  o.rtol = 1e-12;
  o.atol = 1e-14;
  Vec x = rk45_integrate(f.rhs, x0, 60.0, o);
  const double h = 0.01;
  double t = 0.0;
  std::vector<double> hits;
  while (static_cast<int>(hits.size()) <= loops) {
    Vec y = rk45_integrate(f.rhs, x, h, o);
    if (x[0] < 0.0 && y[0] >= 0.0) {
      double a = 0.0, b = h;
      for (int i = 0; i < 60; ++i) {
        double m = 0.5 * (a + b);
        (rk45_integrate(f.rhs, x, m, o)[0] < 0.0 ? a : b) = m;
      }
      hits.push_back(t + 0.5 * (a + b));
    }
    x = y;
    t += h;
  }
  return (hits.back() - hits.front()) / loops;
}

BenchmarkSystem reversed(const BenchmarkSystem& s) {
  BenchmarkSystem r = s;
  auto rhs = s.field.rhs;
  r.field.rhs = [rhs](const Vec& x, Vec& dx) {
    rhs(x, dx);
    dx = -dx;
  };
  r.field.jacobian = nullptr;
  auto ex = s.field.exact;
  if (ex) r.field.exact = [ex](const Vec& x, double t) { return ex(x, -t); };
  return r;
}

std::vector<Vec> tangents(const ManifoldSample& m) {
  std::vector<Vec> t(m.points.size());
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    std::size_t a = i, b = i;
    if (i > 0 && m.branch[i - 1] == m.branch[i]) a = i - 1;
    if (i + 1 < m.points.size() && m.branch[i + 1] == m.branch[i]) b = i + 1;
    t[i] = m.points[b] - m.points[a];
  }
  return t;
}

}  // namespace

TEST_CASE("polar eigenfunction values and branch handling") {
  auto pe = polar_eigenfunctions(1.0, 1.0, 0.0, 1.0);
  CHECK(std::abs(pe.phi_lc(1.0, 0.3).value) <= 1e-15);
  CHECK(std::abs(pe.phi_lc(0.5, 0.0).value) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(pe.phi_ss(0.6, 0.0).value) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(pe.phi_lc(0.0, 0.0).singular);
  CHECK(pe.phi_ss(1.0, 0.0).singular);
  CHECK(std::abs(pe.phi_ss(0.0, 1.0).value) == 0.0);
  CHECK_THROWS_AS(pe.phi_ss(1.2, 0.0), Error);
  CHECK_THROWS_AS(pe.phi_lc(-0.1, 0.0), Error);
  CHECK_THROWS_AS(polar_eigenfunctions(0.0, 1.0, 0.0, 1.0), Error);
  // Agrees with the system's own eigenfunctions.
  auto sys = make_system(SystemId::PolarLC, {{"alpha", 0.7}, {"mu", 1.3}, {"C", 2.0}});
  auto pe2 = polar_eigenfunctions(polar_params(sys.params));
  Vec x = cart(0.8, 2.1);
  CHECK(std::abs(pe2.phi_lc.at(x).value - sys.eigenfunction("phi_cycle").eval(x).value) <= 1e-14);
  CHECK(std::abs(pe2.phi_ss.at(x).value - sys.eigenfunction("phi_steady").eval(x).value) <= 1e-14);
}

TEST_CASE("isostable branches are monotone with the stated ranges") {
  Gen g{11};
  for (int trial = 0; trial < 20; ++trial) {
    double mu = g.uniform(0.2, 3.0), C = g.uniform(0.3, 4.0);
    auto pe = polar_eigenfunctions(mu, 1.0, 0.0, C);
    double sm = std::sqrt(mu);
    double prev = INFINITY;
    for (int i = 1; i < 200; ++i) {
      double v = std::abs(pe.phi_lc(sm * i / 200.0, 0.0).value);
      CHECK(v < prev);
      prev = v;
    }
    prev = 0.0;
    for (int i = 1; i < 200; ++i) {
      double v = std::abs(pe.phi_lc(sm * (1.0 + i / 10.0), 0.0).value);
      CHECK(v > prev);
      CHECK(v < C);
      prev = v;
    }
    CHECK(std::abs(pe.phi_lc(sm * 1e4, 0.0).value) == doctest::Approx(C).epsilon(1e-7));
  }
}

TEST_CASE("branch inverses recover the polar point") {
  Gen g{3};
  PolarParams p{1.7, 1.0, 0.9, 1.4};
  double sm = std::sqrt(p.mu);
  for (int i = 0; i < 200; ++i) {
    double th = g.uniform(-kPi, kPi);
    double ri = g.uniform(0.01, 0.99) * sm, ro = sm * g.uniform(1.01, 5.0);
    auto a = polar_lc_inverse(polar_phi_cycle(ri, th, p), Branch::Interior, p);
    auto b = polar_lc_inverse(polar_phi_cycle(ro, th, p), Branch::Exterior, p);
    auto c = polar_ss_inverse(polar_phi_steady(ri, th, p), p);
    CHECK(a.r == doctest::Approx(ri).epsilon(1e-12));
    CHECK(b.r == doctest::Approx(ro).epsilon(1e-10));
    CHECK(c.r == doctest::Approx(ri).epsilon(1e-12));
    CHECK(angle_gap(a.theta, th) <= 1e-12);
    CHECK(angle_gap(b.theta, th) <= 1e-10);
    CHECK(angle_gap(c.theta, th) <= 1e-12);
  }
  CHECK_THROWS_AS(polar_lc_inverse(cplx(2.0, 0.0), Branch::Exterior, p), Error);
}

TEST_CASE("T_i and its inverse") {
  cplx v = std::polar(0.3, 0.7);
  CHECK(std::abs(transform_Ti(transform_Ti_inv(v, 1.0, 1.0, 1.0), 1.0, 1.0, 1.0) - v) <= 1e-12);
  cplx z = std::polar(2.5, -1.1);
  cplx a0 = transform_Ti(z, 1.0, 0.0, 1.0);
  CHECK(std::abs(a0 - std::pow(std::abs(z), -0.5) * std::exp(cplx(0.0, std::arg(z)))) <= 1e-15);

  Gen g{5};
  for (int i = 0; i < 100; ++i) {
    double s = g.uniform(0.05, 20.0);
    double m1 = std::abs(transform_Ti(std::polar(s, g.uniform(-kPi, kPi)), 1.3, 0.8, 1.7));
    double m2 = std::abs(transform_Ti(std::polar(s, g.uniform(-kPi, kPi)), 1.3, 0.8, 1.7));
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-14));
  }

  // The composition definition: T_i maps cycle values to steady values inside.
  PolarParams p{1.3, 1.0, -0.6, 0.8};
  for (int i = 0; i < 100; ++i) {
    double r = g.uniform(0.02, 0.98) * std::sqrt(p.mu), th = g.uniform(-kPi, kPi);
    cplx lc = polar_phi_cycle(r, th, p), ss = polar_phi_steady(r, th, p);
    CHECK(std::abs(transform_Ti(lc, p.mu, p.alpha, p.C) - ss) <= 1e-12 * (1.0 + std::abs(ss)));
    CHECK(std::abs(transform_Ti_inv(ss, p.mu, p.alpha, p.C) - lc) <= 1e-12 * (1.0 + std::abs(lc)));
  }
  CHECK_THROWS_AS(transform_Ti(0.0, 1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(transform_Ti_inv(0.0, 1.0, 1.0, 1.0), Error);
}

TEST_CASE("T_o maps inside to outside along isochrons") {
  auto q = transform_To({0.5, 0.0}, 1.0, 0.0, 1.0);
  CHECK(std::abs(q.r - 2.0) <= 1e-10);
  CHECK(std::abs(q.theta) <= 1e-10);

  PolarParams p{1.0, 1.0, 1.0, 1.0};
  Gen g{9};
  for (int i = 0; i < 50; ++i) {
    PolarPoint in{g.uniform(0.01, 0.99), g.uniform(-kPi, kPi)};
    auto out = transform_To(in, p.mu, p.alpha, p.C);
    CHECK(out.r > 1.0);
    double a = std::arg(polar_phi_cycle(in.r, in.theta, p));
    double b = std::arg(polar_phi_cycle(out.r, out.theta, p));
    CHECK(angle_gap(a, b) <= 1e-10);
  }
  // Continuity across the cycle.
  auto edge = transform_To({1.0 - 1e-7, 0.2}, 1.0, 1.0, 1.0);
  CHECK(edge.r - 1.0 <= 1e-6);
  CHECK(edge.r > 1.0);
  CHECK_THROWS_AS(transform_To({0.0, 0.0}, 1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(transform_To({1.0, 0.0}, 1.0, 1.0, 1.0), Error);
}

TEST_CASE("mapping a trajectory outside the cycle") {
  PolarParams p{1.0, 1.0, 1.0, 1.0};
  std::vector<PolarPoint> traj;
  Vec x0 = cart(0.2, 0.4);
  for (int k = 0; k <= 400; ++k) {
    Vec x = polar_exact_flow(x0, 4.0 * k / 400.0, p);
    traj.push_back({x.norm(), std::atan2(x[1], x[0])});
  }
  auto out = map_trajectory_outside(traj, p);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    REQUIRE_FALSE(out[i].singular);
    auto direct = transform_To(traj[i], p.mu, p.alpha, p.C);
    CHECK(std::abs(out[i].point.r - direct.r) <= 1e-10 * direct.r);
    CHECK(angle_gap(out[i].point.theta, direct.theta) <= 1e-10);
  }
  CHECK(max_jump_ratio(out) <= 10.0);

  // A branch switch offsets everything after it; that is what the scan is for.
  auto broken = out;
  for (std::size_t i = 200; i < broken.size(); ++i) broken[i].point.theta += 1.0;
  CHECK(max_jump_ratio(broken) > 10.0);

  CHECK_THROWS_AS(map_trajectory_outside(std::vector<PolarPoint>(5, PolarPoint{0.0, 0.0}), p), Error);
  auto mixed = map_trajectory_outside({{0.5, 0.0}, {1.0, 0.0}, {0.0, 0.0}}, p);
  CHECK_FALSE(mixed[0].singular);
  CHECK(mixed[1].singular);
  CHECK(mixed[2].singular);
}

TEST_CASE("limit cycle periods") {
  auto a = limit_cycle_period(make_system(SystemId::PolarLC, {{"alpha", 0.0}}).field, cart(2.0, 0.0));
  CHECK(std::abs(a.period - 2.0 * kPi) <= 1e-8);
  auto b = limit_cycle_period(make_system(SystemId::PolarLC, {{"alpha", 0.0}, {"omega", 2.0}}).field, cart(0.3, 1.0));
  CHECK(std::abs(b.period - kPi) <= 1e-8);
  CHECK(b.omega == doctest::Approx(2.0).epsilon(1e-8));

  auto vdp = make_system(SystemId::VanDerPol);
  auto c = limit_cycle_period(vdp.field, cart(2.0, 0.0));
  double ref = crossing_period(vdp.field, cart(0.5, 0.5), 10);
  CHECK(std::abs(c.period - ref) <= 1e-6 * ref);
  // Mean divergence along the cycle; near -mu for a weakly nonlinear oscillator.
  double kappa = floquet_exponent_planar(vdp.field, c);
  CHECK(kappa < 0.0);
  CHECK(kappa == doctest::Approx(-0.3).epsilon(0.05));
  CHECK(floquet_exponent_planar(make_system(SystemId::PolarLC).field,
                                limit_cycle_period(make_system(SystemId::PolarLC).field, cart(2.0, 0.0))) ==
        doctest::Approx(-2.0).epsilon(1e-8));

  auto lin = make_linear_system((Mat(2, 2) << -1.0, 0.0, 0.0, -2.0).finished());
  CHECK_THROWS_AS(limit_cycle_period(lin.field, cart(1.0, 0.0)), Error);
}

TEST_CASE("Laplace averages") {
  VectorField lin;
  lin.dim = 1;
  lin.rhs = [](const Vec& x, Vec& dx) { dx[0] = -0.5 * x[0]; };
  Observable id = [](const Vec& x) { return cplx(x[0], 0.0); };
  LaplaceOptions o;
  o.horizon = 10.0;
  o.step = 0.01;
  o.rk45.rtol = 1e-13;
  o.rk45.atol = 1e-15;
  CHECK(std::abs(laplace_average(lin, id, -0.5, Vec::Constant(1, 1.7), o) - 1.7) <= 1e-10);
  CHECK(std::abs(laplace_average(lin, id, -0.5, Vec::Zero(1), o)) == 0.0);
  o.settle = 3.0;
  CHECK(std::abs(laplace_average(lin, id, -0.5, Vec::Constant(1, 1.7), o) - 1.7) <= 1e-10);

  VectorField still;
  still.dim = 1;
  still.rhs = [](const Vec&, Vec& dx) { dx[0] = 0.0; };
  o.settle = 0.0;
  CHECK_THROWS_AS(laplace_average(still, id, -5.0, Vec::Constant(1, 1.0), o), Error);
  o.horizon = 0.0;
  CHECK_THROWS_AS(laplace_average(lin, id, -0.5, Vec::Constant(1, 1.0), o), Error);
  CHECK_THROWS_AS(observable_by_id("nope"), Error);
}

TEST_CASE("Van der Pol Laplace fields satisfy the eigen-relation") {
  auto vdp = make_system(SystemId::VanDerPol);
  EvalGrid g(-3.0, 3.0, 0.75, 2);
  auto pts = annulus_points(g, 1.0, 3.0);
  REQUIRE(pts.size() > 20);
  FlowMap fm{vdp.field, 0.5, FlowMethod::Rk45};
  fm.rk45.rtol = 1e-10;
  fm.rk45.atol = 1e-12;

  IsofieldConfig rot;
  auto ev = make_phase_evaluator(vdp, rot);
  REQUIRE(ev.cycle);
  CHECK(ev.eigenvalue.real() == 0.0);
  CHECK(ev.eigenvalue.imag() == doctest::Approx(ev.cycle->omega));
  auto rc = eigen_relation_check(ev, fm, pts);
  CHECK(rc.checked == pts.size());
  CHECK(rc.max_residual <= 5e-2 * rc.max_abs);

  IsofieldConfig fl;
  fl.mode = LaplaceMode::Floquet;
  fl.observable = "norm_sq";
  auto ef = make_phase_evaluator(vdp, fl);
  CHECK(ef.eigenvalue.real() < 0.0);
  auto rf = eigen_relation_check(ef, fm, pts);
  CHECK(rf.max_residual <= 5e-2 * rf.max_abs);
  // Steady state has no asymptotic phase.
  CHECK(ef.eval(Vec::Zero(2)).singular);
  // Isostable coordinate vanishes on the cycle itself.
  CHECK(std::abs(ef.eval(ef.cycle->point).value) <= 1e-3 * rf.max_abs);
}

TEST_CASE("analytic polar phase fields") {
  auto sys = make_system(SystemId::PolarLC, {{"alpha", 0.0}});
  EvalGrid g(-2.0, 2.0, 0.1, 2);
  IsofieldConfig cfg;
  cfg.method = PhaseMethod::Analytic;
  cfg.branch = "phi_cycle";
  PhaseField pf = isofield(sys, g, cfg);
  auto arg = pf.isochron();
  auto mod = pf.isostable();
  std::size_t singular = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec x = g.point(i);
    if (pf.values[i].singular) {
      ++singular;
      continue;
    }
    // Straight radial isochrons; on the cycle the value is zero and has no angle.
    if (mod[i] > 0.0) CHECK(angle_gap(arg[i], std::atan2(x[1], x[0])) <= 1e-12);
    double r = x.norm();
    if (std::abs(r - 1.0) <= g.spacing()) CHECK(mod[i] <= 2.0 * 2.0 * g.spacing() + 1e-12);
  }
  CHECK(singular == 1);  // the origin

  auto ev = make_phase_evaluator(make_system(SystemId::PolarLC), cfg);
  FlowMap fm{sys.field, 0.1, FlowMethod::Exact};
  fm.field = make_system(SystemId::PolarLC).field;
  auto rc = eigen_relation_check(ev, fm, annulus_points(g, 0.2, 2.0));
  CHECK(rc.max_residual <= 1e-8 * rc.max_abs);

  cfg.branch = "phi_steady";
  auto es = make_phase_evaluator(make_system(SystemId::PolarLC), cfg);
  auto rs = eigen_relation_check(es, fm, annulus_points(g, 0.05, 0.9));
  CHECK(rs.max_residual <= 1e-8 * rs.max_abs);
  auto j = phase_source_to_json(es.source, es.eigenvalue);
  CHECK(j["branch"] == "phi_steady");
}

TEST_CASE("saddle eigenfunction level sets cross the invariant manifolds") {
  auto sys = make_system(SystemId::Saddle2d);
  auto un = unstable_manifold_sample(sys, 100, sys.sample_lo, sys.sample_hi, Vec::Zero(2));
  auto st = unstable_manifold_sample(reversed(sys), 100, sys.sample_lo, sys.sample_hi, Vec::Zero(2));
  const auto& phi1 = sys.eigenfunction("phi1");
  const auto& phi2 = sys.eigenfunction("phi2");
  // phi2 increases along the unstable manifold and phi1 along the stable one.
  CHECK(min_transversality(phi2.eval, un.points, tangents(un)) >= 0.1);
  CHECK(min_transversality(phi1.eval, st.points, tangents(st)) >= 0.1);
  // phi1 is constant on the unstable manifold, so the check does discriminate.
  CHECK(min_transversality(phi1.eval, un.points, tangents(un)) <= 1e-3);
}
