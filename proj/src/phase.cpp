#include "koopal/phase.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace koopal {

using nlohmann::json;

Observable observable_by_id(const std::string& id) {
  if (id == "sin_x1_plus_x2") return [](const Vec& x) { return cplx(std::sin(x[0] + x[1]), 0.0); };
  if (id == "x1") return [](const Vec& x) { return cplx(x[0], 0.0); };
  if (id == "x2") return [](const Vec& x) { return cplx(x[1], 0.0); };
  if (id == "norm_sq") return [](const Vec& x) { return cplx(x.squaredNorm(), 0.0); };
  fail(ErrorKind::Config, "unknown observable '" + id + "'");
}

namespace {

std::vector<double> sample_times(double T, double step, double settle) {
  if (!(T > 0.0) || !(step > 0.0)) fail(ErrorKind::Config, "Laplace horizon and step must be positive");
  if (!(settle >= 0.0)) fail(ErrorKind::Config, "Laplace settling time must be nonnegative");
  long n = std::max(1L, std::lround(T / step));
  std::vector<double> t(n + 1);
  for (long k = 0; k <= n; ++k) t[k] = settle + T * static_cast<double>(k) / static_cast<double>(n);
  return t;
}

cplx trapezoid_mean(const std::vector<cplx>& g, double T) {
  std::size_t n = g.size() - 1;
  cplx s = 0.5 * (g.front() + g.back());
  for (std::size_t k = 1; k < n; ++k) s += g[k];
  return s * (T / static_cast<double>(n)) / T;
}

void check_integrand(cplx g, double t, double limit) {
  if (!std::isfinite(std::abs(g)) || std::abs(g) > limit) {
    std::ostringstream os;
    os << "Laplace integrand reached " << std::abs(g) << " at t = " << t;
    fail(ErrorKind::Divergence, os.str());
  }
}

Rk45Options tight() {
  Rk45Options o;
  o.rtol = 1e-12;
  o.atol = 1e-14;
  return o;
}

double section_value(const CycleInfo& c, const Vec& x) { return c.normal.dot(x - c.point); }

struct Crossing {
  double time;
  Vec state;
};

// First upward crossing of the section within `near` of the section origin.
std::optional<Crossing> next_crossing(const VectorField& field, const CycleInfo& c, const Vec& x0, double max_time,
                                      double h, double near) {
  const Rk45Options opt = tight();
  Vec x = x0;
  double t = 0.0;
  double g = section_value(c, x);
  while (t < max_time) {
    Vec y = rk45_integrate(field.rhs, x, h, opt);
    double gy = section_value(c, y);
    if (g < 0.0 && gy >= 0.0 && (y - c.point).norm() < near) {
      // Newton on the crossing time from the bracketing left state.
      double tau = h * (-g) / (gy - g);
      Vec z = y;
      for (int it = 0; it < 30; ++it) {
        z = rk45_integrate(field.rhs, x, tau, opt);
        double gz = section_value(c, z);
        double rate = c.normal.dot(field(z));
        if (rate == 0.0) break;
        double d = gz / rate;
        tau -= d;
        if (std::abs(d) <= 1e-14 * (1.0 + std::abs(tau))) break;
      }
      z = rk45_integrate(field.rhs, x, tau, opt);
      return Crossing{t + tau, z};
    }
    x = y;
    g = gy;
    t += h;
  }
  return std::nullopt;
}

}  // namespace

cplx laplace_average(const VectorField& field, const Observable& f, cplx lambda, const Vec& x,
                     const LaplaceOptions& opt) {
  auto times = sample_times(opt.horizon, opt.step, opt.settle);
  auto traj = rk45_sample(field.rhs, x, times, opt.rk45);
  std::vector<cplx> g(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    g[k] = f(traj[k]) * std::exp(-lambda * times[k]);
    check_integrand(g[k], times[k], opt.divergence);
  }
  return trapezoid_mean(g, opt.horizon);
}

CycleInfo limit_cycle_period(const VectorField& field, const Vec& x0, double transient, double max_return) {
  if (x0.size() != field.dim) fail(ErrorKind::Contract, "start point dimension does not match the system");
  const Rk45Options opt = tight();
  CycleInfo c;
  c.point = transient > 0.0 ? rk45_integrate(field.rhs, x0, transient, opt) : x0;
  Vec f0 = field(c.point);
  if (!(f0.norm() > 1e-10)) fail(ErrorKind::Convergence, "trajectory settled on a steady state, no cycle");
  c.normal = f0 / f0.norm();

  // Rough return with a step that resolves the local speed.
  const double h = std::min(0.05, 0.05 * (1.0 + c.point.norm()) / f0.norm());
  Vec x = c.point;
  double t = 0.0, extent = 0.0;
  double g = 0.0;
  std::optional<Crossing> first;
  while (t < max_return) {
    Vec y = rk45_integrate(field.rhs, x, h, opt);
    double gy = section_value(c, y);
    extent = std::max(extent, (y - c.point).norm());
    if (t > 0.0 && g < 0.0 && gy >= 0.0 && (y - c.point).norm() < 0.5 * extent) {
      c.extent = extent;
      first = next_crossing(field, c, x, 2.0 * h, h, 0.5 * extent);
      if (first) first->time += t;
      break;
    }
    x = y;
    g = gy;
    t += h;
  }
  if (!first) fail(ErrorKind::Convergence, "no return to the section within the horizon; no cycle found");

  // Newton on G(x, T) = (F^T(x) - x, n.(x - point)).
  const int d = field.dim;
  Vec xs = c.point;
  double T = first->time;
  double resid = INFINITY;
  for (int it = 0; it < 30; ++it) {
    Vec FT = rk45_integrate(field.rhs, xs, T, opt);
    Vec G(d + 1);
    G.head(d) = FT - xs;
    G[d] = section_value(c, xs);
    resid = G.norm();
    Mat Jac = Mat::Zero(d + 1, d + 1);
    const double eps = 1e-6;
    for (int j = 0; j < d; ++j) {
      Vec e = Vec::Zero(d);
      e[j] = eps;
      Vec plus = rk45_integrate(field.rhs, xs + e, T, opt);
      Vec minus = rk45_integrate(field.rhs, xs - e, T, opt);
      Jac.block(0, j, d, 1) = (plus - minus) / (2.0 * eps);
      Jac(j, j) -= 1.0;
    }
    Jac.block(0, d, d, 1) = field(FT);
    Jac.block(d, 0, 1, d) = c.normal.transpose();
    Vec step = Jac.fullPivLu().solve(-G);
    xs += step.head(d);
    T += step[d];
    c.newton_iterations = it + 1;
    if (step.norm() <= 1e-13 * (1.0 + T)) break;
  }
  Vec G = rk45_integrate(field.rhs, xs, T, opt) - xs;
  resid = G.norm();
  if (!(resid <= 1e-10 * (1.0 + xs.norm())))
    fail(ErrorKind::Convergence, "periodic orbit Newton solve did not reach 1e-10");
  c.point = xs;
  c.period = T;
  c.omega = 2.0 * std::numbers::pi / T;
  return c;
}

double floquet_exponent_planar(const VectorField& field, const CycleInfo& cycle, int samples) {
  if (field.dim != 2) fail(ErrorKind::Unsupported, "Floquet exponent from the divergence needs a planar system");
  if (samples < 2) fail(ErrorKind::Config, "need at least two samples along the cycle");
  std::vector<double> times(samples);
  for (int k = 0; k < samples; ++k) times[k] = cycle.period * k / samples;
  auto pts = rk45_sample(field.rhs, cycle.point, times, tight());
  // Periodic integrand: the plain mean is the trapezoid rule.
  double s = 0.0;
  for (auto& p : pts) s += field.jacobian_at(p).trace();
  return s / samples;
}

double asymptotic_phase_time(const VectorField& field, const CycleInfo& cycle, const Vec& x, double settle_periods) {
  double T0 = settle_periods * cycle.period;
  Vec y = rk45_integrate(field.rhs, x, T0, tight());
  double h = cycle.period / 200.0;
  auto cr = next_crossing(field, cycle, y, 2.0 * cycle.period, h, 0.5 * cycle.extent);
  if (!cr) fail(ErrorKind::Convergence, "trajectory does not return to the cycle section");
  double s = std::fmod(-(T0 + cr->time), cycle.period);
  if (s < 0.0) s += cycle.period;
  return s;
}

cplx floquet_laplace_average(const VectorField& field, const CycleInfo& cycle, double kappa, const Observable& f,
                             const Vec& x, const LaplaceOptions& opt) {
  double s = asymptotic_phase_time(field, cycle, x);
  Vec ref = s > 0.0 ? rk45_integrate(field.rhs, cycle.point, s, opt.rk45) : cycle.point;
  auto times = sample_times(opt.horizon, opt.step, opt.settle);
  auto traj = rk45_sample(field.rhs, x, times, opt.rk45);
  auto cyc = rk45_sample(field.rhs, ref, times, opt.rk45);
  std::vector<cplx> g(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    g[k] = (f(traj[k]) - f(cyc[k])) * std::exp(-kappa * times[k]);
    check_integrand(g[k], times[k], opt.divergence);
  }
  return trapezoid_mean(g, opt.horizon);
}

// ---- polar example ----

namespace {

void check_polar(double mu, double C) {
  if (!(mu > 0.0 && C > 0.0)) fail(ErrorKind::Config, "polar transforms need mu, C > 0");
}

}  // namespace

FieldValue BranchedEigenfunction::operator()(double r, double theta) const {
  if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorKind::Domain, "radius must be a finite nonnegative number");
  if (!exterior) return interior(r, theta);
  // Interior closure includes the circle itself; the two branches agree there.
  return r <= boundary_radius ? interior(r, theta) : exterior(r, theta);
}

FieldValue BranchedEigenfunction::at(const Vec& x) const {
  return (*this)(std::hypot(x[0], x[1]), std::atan2(x[1], x[0]));
}

PolarEigenfunctions polar_eigenfunctions(const PolarParams& p) {
  if (!(p.mu > 0.0 && p.omega > 0.0 && p.C > 0.0)) fail(ErrorKind::Config, "polar system needs mu, omega, C > 0");
  const double sm = std::sqrt(p.mu);
  PolarEigenfunctions out;
  out.params = p;

  auto lc = [p](double r, double theta) {
    if (r == 0.0) return FieldValue::singular_point();
    return FieldValue::regular(polar_phi_cycle(r, theta, p));
  };
  out.phi_lc.interior = lc;
  out.phi_lc.exterior = lc;
  out.phi_lc.boundary_radius = sm;
  out.phi_lc.eigenvalue = cplx(-2.0 * p.mu, p.omega);
  out.phi_lc.boundary_description = "interior 0 < r < sqrt(mu), exterior r > sqrt(mu); zero on the cycle, singular at r = 0";

  out.phi_ss.interior = [p, sm](double r, double theta) {
    if (r > sm) fail(ErrorKind::Domain, "steady-state eigenfunction is only defined inside the cycle");
    if (r == sm) return FieldValue::singular_point();
    return FieldValue::regular(polar_phi_steady(r, theta, p));
  };
  out.phi_ss.boundary_radius = sm;
  out.phi_ss.eigenvalue = cplx(p.mu, p.omega - p.alpha * sm);
  out.phi_ss.boundary_description = "0 <= r < sqrt(mu); zero at r = 0, singular on the cycle";
  return out;
}

PolarEigenfunctions polar_eigenfunctions(double mu, double omega, double alpha, double C) {
  return polar_eigenfunctions(PolarParams{mu, omega, alpha, C});
}

PolarPoint polar_lc_inverse(cplx z, Branch branch, const PolarParams& p) {
  check_polar(p.mu, p.C);
  double s = std::abs(z);
  if (!(s > 0.0)) fail(ErrorKind::Singular, "zero cycle value lies on the cycle itself");
  double q;
  if (branch == Branch::Interior) {
    q = 1.0 + s / p.C;
  } else {
    if (!(s < p.C)) fail(ErrorKind::Domain, "exterior cycle isostable must be below C");
    q = 1.0 - s / p.C;
  }
  double sm = std::sqrt(p.mu);
  double r = std::sqrt(p.mu / q);
  double theta = std::arg(z) + p.alpha / sm * std::log((sm + r) / r);
  return {r, wrap_angle(theta)};
}

PolarPoint polar_ss_inverse(cplx v, const PolarParams& p) {
  check_polar(p.mu, p.C);
  double s = std::abs(v);
  if (!(s > 0.0)) fail(ErrorKind::Singular, "zero steady-state value has no angle");
  double sm = std::sqrt(p.mu);
  double r = sm * s / std::hypot(p.C, s);
  double q = sm * p.C / std::hypot(p.C, s);  // sqrt(mu - r^2)
  double theta = std::arg(v) + p.alpha / sm * std::log((sm + r) / q);
  return {r, wrap_angle(theta)};
}

cplx transform_Ti(cplx z, double mu, double alpha, double C) {
  check_polar(mu, C);
  double s = std::abs(z);
  if (!(s > 0.0)) fail(ErrorKind::Singular, "T_i is undefined at zero");
  double mag = std::sqrt(C * C * C / s);
  double ph = std::arg(z) + alpha / (2.0 * std::sqrt(mu)) * std::log(s / C);
  return std::polar(mag, ph);
}

cplx transform_Ti_inv(cplx v, double mu, double alpha, double C) {
  check_polar(mu, C);
  double s = std::abs(v);
  if (!(s > 0.0)) fail(ErrorKind::Singular, "inverse of T_i is undefined at zero");
  double mag = C * C * C / (s * s);
  double ph = std::arg(v) - alpha / std::sqrt(mu) * std::log(C / s);
  return std::polar(mag, ph);
}

cplx transform_To_tilde(cplx z, double C) {
  double s = std::abs(z);
  if (s == 0.0) return 0.0;
  return std::polar(C * s / (1.0 + s), std::arg(z));
}

PolarPoint transform_To(const PolarPoint& pt, double mu, double alpha, double C) {
  check_polar(mu, C);
  double sm = std::sqrt(mu);
  if (!(pt.r > 0.0 && pt.r < sm)) fail(ErrorKind::Domain, "T_o needs 0 < r < sqrt(mu)");
  PolarParams p{mu, 1.0, alpha, C};
  cplx z = polar_phi_cycle(pt.r, pt.theta, p);
  return polar_lc_inverse(transform_To_tilde(z, C), Branch::Exterior, p);
}

std::vector<MappedPoint> map_trajectory_outside(const std::vector<PolarPoint>& traj, const PolarParams& p) {
  check_polar(p.mu, p.C);
  const double sm = std::sqrt(p.mu);
  std::vector<MappedPoint> out(traj.size());
  std::size_t regular = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& q = traj[i];
    if (!(q.r > 0.0 && q.r < sm)) {
      out[i].singular = true;
      continue;
    }
    cplx v = polar_phi_steady(q.r, q.theta, p);
    cplx z = transform_Ti_inv(v, p.mu, p.alpha, p.C);
    out[i].point = polar_lc_inverse(transform_To_tilde(z, p.C), Branch::Exterior, p);
    ++regular;
  }
  if (regular == 0) fail(ErrorKind::Domain, "trajectory has no point strictly inside the punctured disk");
  return out;
}

double max_jump_ratio(const std::vector<MappedPoint>& output) {
  std::vector<double> steps;
  auto cart = [](const PolarPoint& q) {
    Vec v(2);
    v << q.r * std::cos(q.theta), q.r * std::sin(q.theta);
    return v;
  };
  const MappedPoint* prev = nullptr;
  for (auto& m : output) {
    if (m.singular) {
      prev = nullptr;
      continue;
    }
    if (prev) steps.push_back((cart(m.point) - cart(prev->point)).norm());
    prev = &m;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    double nb = 0.0;
    int cnt = 0;
    if (i > 0) nb += steps[i - 1], ++cnt;
    if (i + 1 < steps.size()) nb += steps[i + 1], ++cnt;
    if (cnt == 0) continue;
    nb /= cnt;
    if (nb > 0.0) worst = std::max(worst, steps[i] / nb);
  }
  return worst;
}

// ---- fields on grids ----

const char* to_string(PhaseMethod m) { return m == PhaseMethod::Analytic ? "analytic" : "laplace_average"; }
const char* to_string(LaplaceMode m) { return m == LaplaceMode::Floquet ? "floquet" : "rotation"; }

std::vector<double> PhaseField::isostable() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i].singular ? NAN : std::abs(values[i].value);
  return out;
}

std::vector<double> PhaseField::isochron() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = values[i].singular ? NAN : wrap_angle(std::arg(values[i].value));
  return out;
}

PhaseEvaluator make_phase_evaluator(const BenchmarkSystem& sys, const IsofieldConfig& cfg) {
  PhaseEvaluator ev;
  ev.source.method = cfg.method;
  if (cfg.method == PhaseMethod::Analytic) {
    const auto& phi = sys.eigenfunction(cfg.branch);
    ev.eval = phi.eval;
    ev.eigenvalue = phi.eigenvalue;
    ev.source.branch = cfg.branch;
    return ev;
  }
  if (sys.dim() != 2) fail(ErrorKind::Unsupported, "Laplace phase fields are implemented for planar systems");
  Vec guess = cfg.cycle_guess.size() ? cfg.cycle_guess : Vec(Vec::Unit(2, 0) * 2.0);
  CycleInfo cycle = limit_cycle_period(sys.field, guess);
  LaplaceOptions lo;
  lo.step = cfg.step > 0.0 ? cfg.step : cycle.period / 200.0;
  Observable f = observable_by_id(cfg.observable);
  VectorField field = sys.field;
  if (cfg.mode == LaplaceMode::Rotation) {
    lo.horizon = cfg.horizon > 0.0 ? cfg.horizon : 50.0 * cycle.period;
    lo.settle = std::max(cfg.settle, 0.0);
    ev.eigenvalue = cplx(0.0, cycle.omega);
    cplx lambda = ev.eigenvalue;
    ev.eval = [field, f, lambda, lo](const Vec& x) {
      return FieldValue::regular(laplace_average(field, f, lambda, x, lo));
    };
  } else {
    double kappa = floquet_exponent_planar(sys.field, cycle);
    if (!(kappa < 0.0)) fail(ErrorKind::Convergence, "cycle is not attracting; Floquet average diverges");
    // Averaging from t = 0 lets the O(1) transient leak in at order 1/(|kappa| T); start
    // the window once higher Floquet modes have died out and span whole periods.
    lo.settle = cfg.settle >= 0.0 ? cfg.settle : 6.0 / std::abs(kappa);
    lo.horizon = cfg.horizon > 0.0 ? cfg.horizon : 4.0 * cycle.period;
    ev.eigenvalue = cplx(kappa, 0.0);
    ev.eval = [field, cycle, kappa, f, lo](const Vec& x) {
      try {
        return FieldValue::regular(floquet_laplace_average(field, cycle, kappa, f, x, lo));
      } catch (const Error& e) {
        // The steady state and points that never reach the cycle have no phase.
        if (e.kind() != ErrorKind::Convergence) throw;
        return FieldValue::singular_point();
      }
    };
  }
  ev.source.observable = cfg.observable;
  ev.source.mode = cfg.mode;
  ev.source.horizon = lo.horizon;
  ev.source.step = lo.step;
  ev.source.settle = lo.settle;
  ev.cycle = cycle;
  return ev;
}

PhaseField isofield(const BenchmarkSystem& sys, const EvalGrid& grid, const IsofieldConfig& cfg) {
  if (grid.dim() != sys.dim()) fail(ErrorKind::Contract, "grid dimension does not match the system");
  PhaseEvaluator ev = make_phase_evaluator(sys, cfg);
  std::vector<FieldValue> vals(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { vals[i] = ev.eval(grid.point(i)); });
  return PhaseField{grid, std::move(vals), ev.eigenvalue, ev.source, ev.cycle};
}

RelationCheck eigen_relation_check(const PhaseEvaluator& ev, const FlowMap& flow, const std::vector<Vec>& points) {
  const cplx mult = std::exp(ev.eigenvalue * flow.dt);
  std::vector<double> res(points.size(), -1.0), mag(points.size(), -1.0);
  parallel_for(points.size(), [&](std::size_t i) {
    FieldValue a = ev.eval(points[i]);
    if (a.singular) return;
    FieldValue b = ev.eval(koopal::flow(flow, points[i]));
    if (b.singular) return;
    res[i] = std::abs(b.value - mult * a.value);
    mag[i] = std::abs(a.value);
  });
  RelationCheck rc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (res[i] < 0.0) continue;
    rc.max_residual = std::max(rc.max_residual, res[i]);
    rc.max_abs = std::max(rc.max_abs, mag[i]);
    ++rc.checked;
  }
  return rc;
}

std::vector<Vec> annulus_points(const EvalGrid& grid, double rmin, double rmax) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vec x = grid.point(i);
    double r = x.norm();
    if (r >= rmin && r <= rmax) out.push_back(x);
  }
  return out;
}

double min_transversality(const std::function<FieldValue(const Vec&)>& phi, const std::vector<Vec>& points,
                          const std::vector<Vec>& tangents, double h) {
  if (points.size() != tangents.size()) fail(ErrorKind::Contract, "one tangent per manifold point");
  double worst = INFINITY;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int d = static_cast<int>(points[i].size());
    CVec grad(d);
    bool ok = true;
    for (int j = 0; j < d; ++j) {
      Vec e = Vec::Zero(d);
      e[j] = h;
      FieldValue a = phi(points[i] + e), b = phi(points[i] - e);
      if (a.singular || b.singular) {
        ok = false;
        break;
      }
      grad[j] = (a.value - b.value) / (2.0 * h);
    }
    if (!ok) continue;
    double gn = grad.norm(), tn = tangents[i].norm();
    if (!(gn > 0.0 && tn > 0.0)) {
      worst = 0.0;
      continue;
    }
    worst = std::min(worst, std::abs((grad.array() * tangents[i].cast<cplx>().array()).sum()) / (gn * tn));
  }
  return worst;
}

json phase_source_to_json(const PhaseSource& s, cplx eigenvalue) {
  json j{{"method", to_string(s.method)}, {"lambda", {eigenvalue.real(), eigenvalue.imag()}}};
  if (s.method == PhaseMethod::Analytic) {
    j["branch"] = s.branch;
  } else {
    j["observable"] = s.observable;
    j["mode"] = to_string(s.mode);
    j["T"] = s.horizon;
    j["step"] = s.step;
    j["settle"] = s.settle;
  }
  return j;
}

}  // namespace koopal
