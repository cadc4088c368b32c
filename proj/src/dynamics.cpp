#include "koopal/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace koopal {

Vec VectorField::operator()(const Vec& x) const {
  Vec dx(x.size());
  rhs(x, dx);
  return dx;
}

Mat VectorField::jacobian_at(const Vec& x) const {
  if (jacobian) return jacobian(x);
  Mat J(dim, dim);
  Vec xp = x, xm = x, fp(dim), fm(dim);
  for (int k = 0; k < dim; ++k) {
    double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    rhs(xp, fp);
    rhs(xm, fm);
    J.col(k) = (fp - fm) / (2.0 * h);
    xp[k] = xm[k] = x[k];
  }
  return J;
}

const char* to_string(FlowMethod m) {
  switch (m) {
    case FlowMethod::Exact: return "exact";
    case FlowMethod::Euler: return "euler";
    case FlowMethod::Rk45: return "rk45";
  }
  return "?";
}

FlowMethod flow_method_from_string(const std::string& s) {
  if (s == "exact") return FlowMethod::Exact;
  if (s == "euler") return FlowMethod::Euler;
  if (s == "rk45") return FlowMethod::Rk45;
  fail(ErrorKind::Config, "unknown flow method '" + s + "'");
}

Vec flow_for(const FlowMap& map, const Vec& x, double t) {
  if (x.size() != map.field.dim) fail(ErrorKind::Contract, "state dimension mismatch");
  if (t == 0.0) return x;
  switch (map.method) {
    case FlowMethod::Exact: {
      if (!map.field.exact) fail(ErrorKind::Config, "no closed-form flow for this system");
      Vec y = map.field.exact(x, t);
      if (!y.allFinite() || y.norm() > map.rk45.divergence_radius)
        fail(ErrorKind::Divergence, "closed-form flow left the finite domain");
      return y;
    }
    case FlowMethod::Euler:
      return euler_integrate(map.field.rhs, x, t, map.euler_step, map.rk45.divergence_radius);
    case FlowMethod::Rk45:
      return rk45_integrate(map.field.rhs, x, t, map.rk45);
  }
  fail(ErrorKind::Internal, "unreachable flow method");
}

Vec flow(const FlowMap& map, const Vec& x) { return flow_for(map, x, map.dt); }

std::vector<Vec> flow_on_points(const FlowMap& map, const std::vector<Vec>& points) {
  std::vector<Vec> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) { out[i] = flow(map, points[i]); });
  return out;
}

double integration_error_sup(const std::vector<Vec>& numeric, const std::vector<Vec>& exact) {
  if (numeric.size() != exact.size()) fail(ErrorKind::Contract, "image count mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) m = std::max(m, (numeric[i] - exact[i]).norm());
  return m;
}

double integration_error_sup(const FlowMap& numeric, const FlowMap& exact, const EvalGrid& grid) {
  if (numeric.dt != exact.dt) fail(ErrorKind::Contract, "flow maps use different time steps");
  auto pts = grid.points();
  return integration_error_sup(flow_on_points(numeric, pts), flow_on_points(exact, pts));
}

Vec find_steady_state(const VectorField& field, const Vec& guess, double tol, int max_iter) {
  Vec x = guess;
  for (int it = 0; it < max_iter; ++it) {
    Vec fx = field(x);
    if (fx.norm() <= tol) return x;
    Mat J = field.jacobian_at(x);
    Vec dx = J.colPivHouseholderQr().solve(-fx);
    x += dx;
    if (!x.allFinite()) break;
    if (dx.norm() <= tol * std::max(1.0, x.norm())) return x;
  }
  fail(ErrorKind::Convergence, "steady state search did not converge");
}

}  // namespace koopal
