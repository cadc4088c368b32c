#include "koopal/systems.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace koopal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double param(const SystemParams& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) fail(ErrorKind::Config, "missing system parameter '" + key + "'");
  return it->second;
}

AnalyticEigenfunction real_eigenfunction(std::string name, double lambda,
                                         std::function<double(const Vec&)> f,
                                         std::function<double(const Vec&)> dist) {
  AnalyticEigenfunction e;
  e.name = std::move(name);
  e.eigenvalue = cplx(lambda, 0.0);
  e.eval = [f = std::move(f)](const Vec& x) {
    double v = f(x);
    if (!std::isfinite(v)) return FieldValue::singular_point();
    return FieldValue::regular(cplx(v, 0.0));
  };
  e.singular_distance = dist ? std::move(dist) : [](const Vec&) { return kInf; };
  return e;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inv(double y) {
  if (!(y > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return y > 30.0 ? y : y + std::log(-std::expm1(-y));
}

// Left eigenvectors of a real matrix with a real spectrum, sorted by
// ascending eigenvalue, unit norm, first nonzero entry positive.
std::vector<std::pair<double, Vec>> real_left_eigenvectors(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A.transpose());
  std::vector<std::pair<double, Vec>> out;
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    cplx l = es.eigenvalues()[k];
    if (std::abs(l.imag()) > 1e-12)
      fail(ErrorKind::Config, "linear system has a complex spectrum");
    Vec w = es.eigenvectors().col(k).real();
    w.normalize();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (std::abs(w[i]) > 1e-12) {
        if (w[i] < 0) w = -w;
        break;
      }
    }
    out.emplace_back(l.real(), w);
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.first < b.first; });
  return out;
}

Mat matrix_from_params(const SystemParams& p) {
  Mat A(2, 2);
  A << param(p, "a11"), param(p, "a12"), param(p, "a21"), param(p, "a22");
  return A;
}

BenchmarkSystem cubic1d(const SystemParams& p) {
  double a = param(p, "a"), b = param(p, "b"), c = param(p, "c");
  if (!(a < b && b < c)) fail(ErrorKind::Config, "cubic1d needs a < b < c");
  BenchmarkSystem s;
  s.field.dim = 1;
  s.field.rhs = [a, b, c](const Vec& x, Vec& dx) { dx[0] = (x[0] - a) * (x[0] - b) * (x[0] - c); };
  s.field.jacobian = [a, b, c](const Vec& x) {
    Mat J(1, 1);
    double y = x[0];
    J(0, 0) = (y - b) * (y - c) + (y - a) * (y - c) + (y - a) * (y - b);
    return J;
  };
  // Partial fractions of 1/f give the exponents of |x - root| in each eigenfunction.
  const double roots[3] = {a, b, c};
  const double coef[3] = {1.0 / ((a - b) * (a - c)), 1.0 / ((b - a) * (b - c)),
                          1.0 / ((c - a) * (c - b))};
  auto dist = [a, b, c](const Vec& x) {
    return std::min({std::abs(x[0] - a), std::abs(x[0] - b), std::abs(x[0] - c)});
  };
  const char* names[3] = {"phi1", "phi2", "phi3"};
  for (int s_idx = 0; s_idx < 3; ++s_idx) {
    double lambda = 1.0 / coef[s_idx];  // f'(root)
    std::array<double, 3> ex{lambda * coef[0], lambda * coef[1], lambda * coef[2]};
    std::array<double, 3> rt{roots[0], roots[1], roots[2]};
    auto e = real_eigenfunction(
        names[s_idx], lambda,
        [ex, rt](const Vec& x) {
          double v = 1.0;
          for (int k = 0; k < 3; ++k) {
            double d = std::abs(x[0] - rt[k]);
            if (d == 0.0 && ex[k] < 0) return kInf;
            v *= std::pow(d, ex[k]);
          }
          return v;
        },
        dist);
    for (int k = 0; k < 3; ++k)
      if (ex[k] > 0) e.zeros.push_back(Vec::Constant(1, rt[k]));
    s.eigenfunctions.push_back(std::move(e));
  }
  for (double r : roots) s.steady_states.push_back(Vec::Constant(1, r));
  s.sample_lo = Vec::Constant(1, a - 1.0);
  s.sample_hi = Vec::Constant(1, c + 1.0);
  return s;
}

BenchmarkSystem quad1d(const SystemParams& p) {
  double a = param(p, "a"), b = param(p, "b");
  if (a == b) fail(ErrorKind::Config, "quad1d needs a != b");
  BenchmarkSystem s;
  s.field.dim = 1;
  s.field.rhs = [a, b](const Vec& x, Vec& dx) { dx[0] = (x[0] - a) * (x[0] - b); };
  s.field.jacobian = [a, b](const Vec& x) { return Mat::Constant(1, 1, 2.0 * x[0] - a - b); };
  // u = (x-a)/(x-b) evolves as u0 exp((a-b) t).
  s.field.exact = [a, b](const Vec& x, double t) {
    Vec y(1);
    if (x[0] == b) {
      y[0] = b;
      return y;
    }
    double u0 = (x[0] - a) / (x[0] - b);
    double u = u0 * std::exp((a - b) * t);
    if ((u0 - 1.0) * (u - 1.0) <= 0.0) fail(ErrorKind::Divergence, "quad1d trajectory escapes to infinity");
    y[0] = (a - b * u) / (1.0 - u);
    return y;
  };
  auto dist = [a, b](const Vec& x) { return std::min(std::abs(x[0] - a), std::abs(x[0] - b)); };
  auto e1 = real_eigenfunction("phi_k1", a - b,
                               [a, b](const Vec& x) {
                                 if (x[0] == b) return kInf;
                                 return (x[0] - a) / (x[0] - b);
                               },
                               dist);
  e1.zeros.push_back(Vec::Constant(1, a));
  auto e2 = real_eigenfunction("phi_k2", b - a,
                               [a, b](const Vec& x) {
                                 if (x[0] == a) return kInf;
                                 return (x[0] - b) / (x[0] - a);
                               },
                               dist);
  e2.zeros.push_back(Vec::Constant(1, b));
  s.eigenfunctions = {e1, e2};
  s.steady_states = {Vec::Constant(1, a), Vec::Constant(1, b)};
  s.sample_lo = Vec::Constant(1, std::min(a, b) - 1.0);
  s.sample_hi = Vec::Constant(1, std::max(a, b) + 1.0);
  return s;
}

BenchmarkSystem linear2d(const SystemParams& p) {
  BenchmarkSystem s = make_linear_system(matrix_from_params(p));
  s.id = SystemId::Linear2d;
  return s;
}

BenchmarkSystem softplus2d(const SystemParams& p) {
  Mat A = matrix_from_params(p);
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [A](const Vec& y, Vec& dy) {
    Vec x(2);
    x << softplus_inv(y[0]), softplus_inv(y[1]);
    Vec ax = A * x;
    dy[0] = -std::expm1(-y[0]) * ax[0];
    dy[1] = -std::expm1(-y[1]) * ax[1];
  };
  s.field.exact = [A](const Vec& y, double t) {
    Vec x(2);
    x << softplus_inv(y[0]), softplus_inv(y[1]);
    if (!x.allFinite()) fail(ErrorKind::Domain, "softplus2d state must be positive");
    Vec xt = (A * t).exp() * x;
    Vec out(2);
    out << softplus(xt[0]), softplus(xt[1]);
    return out;
  };
  s.from_latent = [](const Vec& x) {
    Vec y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = softplus(x[i]);
    return y;
  };
  auto dist = [](const Vec& y) { return std::min(y[0], y[1]); };
  int k = 1;
  for (auto& [lambda, w] : real_left_eigenvectors(A)) {
    Vec wc = w;
    s.eigenfunctions.push_back(real_eigenfunction(
        "phi" + std::to_string(k++), lambda,
        [wc](const Vec& y) {
          if (!(y[0] > 0.0 && y[1] > 0.0)) return kInf;
          return wc[0] * softplus_inv(y[0]) + wc[1] * softplus_inv(y[1]);
        },
        dist));
  }
  s.steady_states = {Vec::Constant(2, std::log(2.0))};
  s.sample_lo = Vec::Constant(2, 0.2);
  s.sample_hi = Vec::Constant(2, 2.2);
  return s;
}

BenchmarkSystem lin5d(const SystemParams& p) {
  double a = param(p, "a"), b = param(p, "b");
  if (b == 0.0 || b == 2.0 * a) fail(ErrorKind::Config, "lin5d needs b != 0 and b != 2a");
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [a, b](const Vec& x, Vec& dx) {
    dx[0] = a * x[0];
    dx[1] = b * (x[1] - x[0] * x[0]);
  };
  s.field.jacobian = [a, b](const Vec& x) {
    Mat J(2, 2);
    J << a, 0.0, -2.0 * b * x[0], b;
    return J;
  };
  const double g = (2.0 * a - b) / b;
  s.field.exact = [a, b, g](const Vec& x, double t) {
    Vec y(2);
    double phi4 = g * x[1] + x[0] * x[0];
    y[0] = x[0] * std::exp(a * t);
    y[1] = (std::exp(b * t) * phi4 - y[0] * y[0]) / g;
    return y;
  };
  auto none = std::function<double(const Vec&)>{};
  s.eigenfunctions = {
      real_eigenfunction("phi1", a, [](const Vec& x) { return x[0]; },
                         [](const Vec& x) { return std::abs(x[0]); }),
      real_eigenfunction("phi2", 2 * a, [](const Vec& x) { return x[0] * x[0]; },
                         [](const Vec& x) { return std::abs(x[0]); }),
      real_eigenfunction("phi3", 3 * a, [](const Vec& x) { return x[0] * x[0] * x[0]; },
                         [](const Vec& x) { return std::abs(x[0]); }),
      real_eigenfunction("phi4", b, [g](const Vec& x) { return g * x[1] + x[0] * x[0]; }, none),
      real_eigenfunction("phi5", a + b,
                         [g](const Vec& x) { return g * x[0] * x[1] + x[0] * x[0] * x[0]; }, none),
  };
  for (int i = 0; i < 3; ++i) s.eigenfunctions[i].zeros.push_back(Vec::Zero(2));
  s.steady_states = {Vec::Zero(2)};
  s.sample_lo = Vec::Constant(2, -2.0);
  s.sample_hi = Vec::Constant(2, 2.0);
  return s;
}

BenchmarkSystem polar_lc(const SystemParams& params) {
  PolarParams p = polar_params(params);
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [p](const Vec& x, Vec& dx) {
    double r = std::hypot(x[0], x[1]);
    double radial = p.mu - r * r;
    double th = p.omega + p.alpha * (r - std::sqrt(p.mu));
    dx[0] = x[0] * radial - x[1] * th;
    dx[1] = x[1] * radial + x[0] * th;
  };
  s.field.exact = [p](const Vec& x, double t) { return polar_exact_flow(x, t, p); };
  const double sm = std::sqrt(p.mu);
  AnalyticEigenfunction lc;
  lc.name = "phi_cycle";
  lc.eigenvalue = cplx(-2.0 * p.mu, p.omega);
  lc.eval = [p](const Vec& x) {
    double r = std::hypot(x[0], x[1]);
    if (r == 0.0) return FieldValue::singular_point();
    return FieldValue::regular(polar_phi_cycle(r, std::atan2(x[1], x[0]), p));
  };
  lc.singular_distance = [sm](const Vec& x) {
    double r = std::hypot(x[0], x[1]);
    return std::min(r, std::abs(r - sm));
  };
  AnalyticEigenfunction ss;
  ss.name = "phi_steady";
  ss.eigenvalue = cplx(p.mu, p.omega - p.alpha * sm);
  ss.eval = [p, sm](const Vec& x) {
    double r = std::hypot(x[0], x[1]);
    if (r >= sm) return FieldValue::singular_point();
    return FieldValue::regular(polar_phi_steady(r, std::atan2(x[1], x[0]), p));
  };
  ss.singular_distance = [sm](const Vec& x) {
    double r = std::hypot(x[0], x[1]);
    return r < sm ? std::min(r, sm - r) : 0.0;
  };
  ss.zeros.push_back(Vec::Zero(2));
  s.eigenfunctions = {lc, ss};
  s.steady_states = {Vec::Zero(2)};
  s.sample_lo = Vec::Constant(2, -2.0 * sm);
  s.sample_hi = Vec::Constant(2, 2.0 * sm);
  return s;
}

BenchmarkSystem vanderpol(const SystemParams& p) {
  double mu = param(p, "mu");
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [mu](const Vec& x, Vec& dx) {
    dx[0] = x[1];
    dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
  };
  s.field.jacobian = [mu](const Vec& x) {
    Mat J(2, 2);
    J << 0.0, 1.0, -2.0 * mu * x[0] * x[1] - 1.0, mu * (1.0 - x[0] * x[0]);
    return J;
  };
  s.steady_states = {Vec::Zero(2)};
  s.sample_lo = Vec::Constant(2, -3.0);
  s.sample_hi = Vec::Constant(2, 3.0);
  return s;
}

Mat rotation(double angle) {
  Mat R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return R;
}

BenchmarkSystem saddle2d(const SystemParams& p) {
  double l1 = param(p, "lambda1"), l2 = param(p, "lambda2");
  double angle = param(p, "angle_deg") * std::numbers::pi / 180.0;
  const Mat R = rotation(angle);
  const double pi = std::numbers::pi;
  // z = exp(R x / pi) - 1 elementwise, with xdot = diag(l1, l2) x.
  auto to_latent = [R, pi](const Vec& z) -> Vec {
    Vec lz(2);
    lz << std::log1p(z[0]), std::log1p(z[1]);
    return pi * R.transpose() * lz;
  };
  auto from_latent = [R, pi](const Vec& x) -> Vec {
    Vec u = R * x / pi;
    Vec z(2);
    z << std::expm1(u[0]), std::expm1(u[1]);
    return z;
  };
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [=](const Vec& z, Vec& dz) {
    Vec x = to_latent(z);
    Vec xd(2);
    xd << l1 * x[0], l2 * x[1];
    Vec u = R * xd / pi;
    dz[0] = (1.0 + z[0]) * u[0];
    dz[1] = (1.0 + z[1]) * u[1];
  };
  s.field.exact = [=](const Vec& z, double t) {
    if (!(z[0] > -1.0 && z[1] > -1.0)) fail(ErrorKind::Domain, "saddle2d needs z > -1");
    Vec x = to_latent(z);
    x[0] *= std::exp(l1 * t);
    x[1] *= std::exp(l2 * t);
    return from_latent(x);
  };
  s.from_latent = from_latent;
  auto dist = [](const Vec& z) { return std::min(z[0] + 1.0, z[1] + 1.0); };
  s.eigenfunctions = {
      real_eigenfunction("phi1", l1,
                         [=](const Vec& z) {
                           if (!(z[0] > -1.0 && z[1] > -1.0)) return kInf;
                           return to_latent(z)[0];
                         },
                         dist),
      real_eigenfunction("phi2", l2,
                         [=](const Vec& z) {
                           if (!(z[0] > -1.0 && z[1] > -1.0)) return kInf;
                           return to_latent(z)[1];
                         },
                         dist),
  };
  s.steady_states = {Vec::Zero(2)};
  s.sample_lo = Vec::Constant(2, -0.6);
  s.sample_hi = Vec::Constant(2, 0.8);
  return s;
}

// y -> x = 2 (y1 + y1^4 + 2 y1^2 y2 + y2^2, y1^2 + y2) and its polynomial inverse.
Vec bistable_h(const Vec& y) {
  Vec x(2);
  double q = y[0] * y[0] + y[1];
  x[0] = 2.0 * (y[0] + q * q);
  x[1] = 2.0 * q;
  return x;
}

Vec bistable_h_inv(const Vec& x) {
  Vec y(2);
  double h1 = x[0] / 2.0, h2 = x[1] / 2.0;
  y[0] = h1 - h2 * h2;
  y[1] = h2 - y[0] * y[0];
  return y;
}

BenchmarkSystem bistable2d(const SystemParams&) {
  BenchmarkSystem s;
  s.field.dim = 2;
  auto ydot = [](const Vec& y) {
    Vec d(2);
    d[0] = -(y[0] - 0.25) * (y[0] + 0.25) * y[0];
    d[1] = -y[1];
    return d;
  };
  s.field.rhs = [ydot](const Vec& x, Vec& dx) {
    Vec y = bistable_h_inv(x);
    Vec yd = ydot(y);
    Mat J(2, 2);
    J << 2.0 * (1.0 + 4.0 * y[0] * (y[0] * y[0] + y[1])), 4.0 * (y[0] * y[0] + y[1]),
        4.0 * y[0], 2.0;
    dx = J * yd;
  };
  // s = 1/y1^2 satisfies sdot = 2 - s/8.
  s.field.exact = [](const Vec& x, double t) {
    Vec y = bistable_h_inv(x);
    Vec yt(2);
    if (y[0] == 0.0) {
      yt[0] = 0.0;
    } else {
      double s0 = 1.0 / (y[0] * y[0]);
      double st = 16.0 + (s0 - 16.0) * std::exp(-t / 8.0);
      if (!(st > 0.0)) fail(ErrorKind::Divergence, "bistable2d trajectory escapes to infinity");
      yt[0] = std::copysign(1.0 / std::sqrt(st), y[0]);
    }
    yt[1] = y[1] * std::exp(-t);
    return bistable_h(yt);
  };
  s.from_latent = bistable_h;
  auto ratio = [](const Vec& x) {
    Vec y = bistable_h_inv(x);
    if (y[0] == 0.0) return kInf;
    return std::abs((y[0] - 0.25) * (y[0] + 0.25) / (y[0] * y[0]));
  };
  auto dist1 = [](const Vec& x) {
    Vec y = bistable_h_inv(x);
    return std::min({std::abs(y[0]), std::abs(y[0] - 0.25), std::abs(y[0] + 0.25)});
  };
  s.eigenfunctions = {
      real_eigenfunction("phi_node", -1.0 / 8.0, ratio, dist1),
      real_eigenfunction("phi_saddle", 1.0 / 16.0,
                         [ratio](const Vec& x) {
                           double r = ratio(x);
                           if (r == 0.0) return kInf;
                           return std::pow(r, -0.5);
                         },
                         dist1),
      real_eigenfunction("phi_y2", -1.0, [](const Vec& x) { return std::abs(bistable_h_inv(x)[1]); },
                         [](const Vec& x) { return std::abs(bistable_h_inv(x)[1]); }),
  };
  Vec n1(2), n2(2);
  n1 << 0.25, 0.0;
  n2 << -0.25, 0.0;
  s.eigenfunctions[0].zeros = {bistable_h(n1), bistable_h(n2)};
  s.steady_states = {Vec::Zero(2), bistable_h(n1), bistable_h(n2)};
  s.sample_lo = Vec::Constant(2, -1.0);
  s.sample_hi = Vec::Constant(2, 1.0);
  return s;
}

BenchmarkSystem duffing(const SystemParams& p) {
  double delta = param(p, "delta"), beta = param(p, "beta"), alpha = param(p, "alpha");
  BenchmarkSystem s;
  s.field.dim = 2;
  s.field.rhs = [=](const Vec& x, Vec& dx) {
    dx[0] = x[1];
    dx[1] = -delta * x[1] - x[0] * (beta + alpha * x[0] * x[0]);
  };
  s.field.jacobian = [=](const Vec& x) {
    Mat J(2, 2);
    J << 0.0, 1.0, -(beta + 3.0 * alpha * x[0] * x[0]), -delta;
    return J;
  };
  s.steady_states = {Vec::Zero(2)};
  if (alpha != 0.0 && -beta / alpha > 0.0) {
    double r = std::sqrt(-beta / alpha);
    for (double sgn : {1.0, -1.0}) {
      Vec g(2);
      g << sgn * r, 0.0;
      s.steady_states.push_back(find_steady_state(s.field, g));
    }
  }
  s.sample_lo = Vec::Constant(2, -6.0);
  s.sample_hi = Vec::Constant(2, 6.0);
  return s;
}

}  // namespace

const char* to_string(SystemId id) {
  switch (id) {
    case SystemId::Cubic1d: return "cubic1d";
    case SystemId::Quad1d: return "quad1d";
    case SystemId::Linear2d: return "linear2d";
    case SystemId::Softplus2d: return "softplus2d";
    case SystemId::Lin5d: return "lin5d";
    case SystemId::PolarLC: return "polarLC";
    case SystemId::VanDerPol: return "vanderpol";
    case SystemId::Saddle2d: return "saddle2d";
    case SystemId::Bistable2d: return "bistable2d";
    case SystemId::Duffing: return "duffing";
  }
  return "?";
}

SystemId system_from_string(const std::string& s) {
  for (SystemId id : {SystemId::Cubic1d, SystemId::Quad1d, SystemId::Linear2d, SystemId::Softplus2d,
                      SystemId::Lin5d, SystemId::PolarLC, SystemId::VanDerPol, SystemId::Saddle2d,
                      SystemId::Bistable2d, SystemId::Duffing})
    if (s == to_string(id)) return id;
  fail(ErrorKind::Config, "unknown system '" + s + "'");
}

SystemParams default_params(SystemId id) {
  switch (id) {
    case SystemId::Cubic1d: return {{"a", -1.0}, {"b", 0.0}, {"c", 3.0}};
    case SystemId::Quad1d: return {{"a", 2.0}, {"b", 3.0}};
    case SystemId::Linear2d:
    case SystemId::Softplus2d:
      return {{"a11", -0.9}, {"a12", 0.1}, {"a21", 0.0}, {"a22", -0.8}};
    case SystemId::Lin5d: return {{"a", -0.05}, {"b", -1.0}};
    case SystemId::PolarLC: return {{"mu", 1.0}, {"omega", 1.0}, {"alpha", 1.0}, {"C", 1.0}};
    case SystemId::VanDerPol: return {{"mu", 0.3}};
    case SystemId::Saddle2d: return {{"lambda1", -1.0}, {"lambda2", 1.5}, {"angle_deg", 60.0}};
    case SystemId::Bistable2d: return {};
    case SystemId::Duffing: return {{"delta", 0.5}, {"beta", -1.0}, {"alpha", 0.1}};
  }
  return {};
}

BenchmarkSystem make_system(SystemId id, const SystemParams& overrides) {
  SystemParams p = default_params(id);
  for (auto& [k, v] : overrides) {
    if (!p.count(k)) fail(ErrorKind::Config, std::string("unknown parameter '") + k + "' for " + to_string(id));
    if (!std::isfinite(v)) fail(ErrorKind::Config, "parameter '" + k + "' must be finite");
    p[k] = v;
  }
  BenchmarkSystem s;
  switch (id) {
    case SystemId::Cubic1d: s = cubic1d(p); break;
    case SystemId::Quad1d: s = quad1d(p); break;
    case SystemId::Linear2d: s = linear2d(p); break;
    case SystemId::Softplus2d: s = softplus2d(p); break;
    case SystemId::Lin5d: s = lin5d(p); break;
    case SystemId::PolarLC: s = polar_lc(p); break;
    case SystemId::VanDerPol: s = vanderpol(p); break;
    case SystemId::Saddle2d: s = saddle2d(p); break;
    case SystemId::Bistable2d: s = bistable2d(p); break;
    case SystemId::Duffing: s = duffing(p); break;
  }
  s.id = id;
  s.params = p;
  return s;
}

BenchmarkSystem make_linear_system(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) fail(ErrorKind::Config, "linear system needs a square matrix");
  BenchmarkSystem s;
  s.id = SystemId::Linear2d;
  int d = static_cast<int>(A.rows());
  s.field.dim = d;
  s.field.rhs = [A](const Vec& x, Vec& dx) { dx.noalias() = A * x; };
  s.field.jacobian = [A](const Vec&) { return A; };
  s.field.exact = [A](const Vec& x, double t) -> Vec { return (A * t).exp() * x; };
  int k = 1;
  for (auto& [lambda, w] : real_left_eigenvectors(A)) {
    Vec wc = w;
    s.eigenfunctions.push_back(real_eigenfunction(
        "phi" + std::to_string(k++), lambda, [wc](const Vec& x) { return wc.dot(x); }, {}));
    s.eigenfunctions.back().zeros.push_back(Vec::Zero(d));
  }
  s.steady_states = {Vec::Zero(d)};
  s.sample_lo = Vec::Constant(d, -2.0);
  s.sample_hi = Vec::Constant(d, 2.0);
  return s;
}

const AnalyticEigenfunction& BenchmarkSystem::eigenfunction(const std::string& name) const {
  for (auto& e : eigenfunctions)
    if (e.name == name) return e;
  fail(ErrorKind::Config, "no analytic eigenfunction named '" + name + "'");
}

double pde_residual_max(const BenchmarkSystem& sys, const AnalyticEigenfunction& phi, int n_points,
                        std::uint64_t seed, double margin) {
  std::mt19937_64 rng(seed);
  int d = sys.dim();
  double worst = 0.0;
  int accepted = 0, attempts = 0;
  while (accepted < n_points) {
    if (++attempts > 1000 * n_points) fail(ErrorKind::EmptySupport, "no regular sample points found");
    Vec x(d);
    for (int k = 0; k < d; ++k) {
      std::uniform_real_distribution<double> u(sys.sample_lo[k], sys.sample_hi[k]);
      x[k] = u(rng);
    }
    double dist = phi.singular_distance(x);
    if (dist < margin) continue;
    FieldValue v = phi.eval(x);
    if (v.singular) continue;
    // Fourth-order central differences.
    CVec grad(d);
    bool ok = true;
    for (int k = 0; k < d && ok; ++k) {
      // Step scaled to the distance from the singular set keeps truncation small.
      double h = 1e-3 * std::min(dist, std::max(1.0, std::abs(x[k])));
      cplx vals[4];
      const double offs[4] = {-2.0, -1.0, 1.0, 2.0};
      for (int j = 0; j < 4; ++j) {
        Vec xs = x;
        xs[k] += offs[j] * h;
        FieldValue fv = phi.eval(xs);
        if (fv.singular) ok = false;
        vals[j] = fv.value;
      }
      grad[k] = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h);
    }
    if (!ok) continue;
    Vec f = sys.field(x);
    cplx lhs(0.0, 0.0);
    for (int k = 0; k < d; ++k) lhs += grad[k] * f[k];
    double res = std::abs(lhs - phi.eigenvalue * v.value) / (1.0 + std::abs(v.value));
    worst = std::max(worst, res);
    ++accepted;
  }
  return worst;
}

FlowMap make_flow(const BenchmarkSystem& sys, double dt, FlowMethod method, double euler_step,
                  const Rk45Options& rk45) {
  if (method == FlowMethod::Exact && !sys.field.exact)
    fail(ErrorKind::Config, std::string("no closed-form flow for ") + to_string(sys.id));
  FlowMap m;
  m.field = sys.field;
  m.dt = dt;
  m.method = method;
  m.euler_step = euler_step;
  m.rk45 = rk45;
  return m;
}

FlowMap best_flow(const BenchmarkSystem& sys, double dt, double rtol, double atol) {
  Rk45Options o;
  o.rtol = rtol;
  o.atol = atol;
  return make_flow(sys, dt, sys.field.exact ? FlowMethod::Exact : FlowMethod::Rk45, 1e-3, o);
}

SnapshotSet sample_snapshots(const BenchmarkSystem& sys, const SamplingOptions& opt) {
  int d = sys.dim();
  // An empty box means the system's default sampling region.
  const Vec& box_lo = opt.box_lo.size() ? opt.box_lo : sys.sample_lo;
  const Vec& box_hi = opt.box_hi.size() ? opt.box_hi : sys.sample_hi;
  if (box_lo.size() != d || box_hi.size() != d)
    fail(ErrorKind::Config, "sampling box dimension does not match the system");
  if (opt.samples_per_traj < 2) fail(ErrorKind::Config, "need at least two samples per trajectory");
  if (!(opt.dt > 0.0)) fail(ErrorKind::Config, "sampling interval must be positive");
  if (opt.latent_box && !sys.from_latent)
    fail(ErrorKind::Config, "system has no latent coordinates to sample in");
  FlowMap map = make_flow(sys, opt.dt, opt.method, opt.euler_step, opt.rk45);
  std::size_t per = static_cast<std::size_t>(opt.samples_per_traj - 1);
  std::size_t n_traj = (opt.n_pairs + per - 1) / per;

  std::vector<std::vector<Vec>> trajs(n_traj);
  parallel_for(n_traj, [&](std::size_t j) {
    Vec x(d);
    for (int k = 0; k < d; ++k) {
      double u = counter_uniform(opt.seed, j, static_cast<std::uint64_t>(k));
      x[k] = box_lo[k] + u * (box_hi[k] - box_lo[k]);
    }
    if (opt.latent_box) x = sys.from_latent(x);
    std::vector<Vec> states{x};
    try {
      for (std::size_t s = 0; s < per; ++s) states.push_back(flow(map, states.back()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Divergence && e.kind() != ErrorKind::Domain) throw;
    }
    trajs[j] = std::move(states);
  });

  SnapshotSet out;
  out.dt = opt.dt;
  out.system_id = to_string(sys.id);
  out.seed = opt.seed;
  out.box_lo = box_lo;
  out.box_hi = box_hi;
  std::vector<std::pair<Vec, Vec>> pairs;
  std::size_t planned = 0;
  for (auto& t : trajs) {
    for (std::size_t s = 0; s < per && planned < opt.n_pairs; ++s, ++planned) {
      if (s + 1 < t.size()) pairs.emplace_back(t[s], t[s + 1]);
      else out.dropped++;
    }
  }
  out.X.resize(d, static_cast<Eigen::Index>(pairs.size()));
  out.Y.resize(d, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    out.X.col(static_cast<Eigen::Index>(j)) = pairs[j].first;
    out.Y.col(static_cast<Eigen::Index>(j)) = pairs[j].second;
  }
  return out;
}

namespace {

bool inside(const Vec& x, const Vec& lo, const Vec& hi) {
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] < lo[k] || x[k] > hi[k]) return false;
  return true;
}

// Point where segment a->b crosses the window boundary (a inside, b outside).
Vec clip_to_window(const Vec& a, const Vec& b, const Vec& lo, const Vec& hi) {
  double t = 1.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    double d = b[k] - a[k];
    if (b[k] > hi[k] && d != 0.0) t = std::min(t, (hi[k] - a[k]) / d);
    if (b[k] < lo[k] && d != 0.0) t = std::min(t, (lo[k] - a[k]) / d);
  }
  return a + std::max(0.0, t) * (b - a);
}

std::vector<Vec> resample_arclength(const std::vector<Vec>& line, std::size_t m) {
  std::vector<Vec> out;
  if (m == 0) return out;
  if (m == 1 || line.size() == 1) {
    out.assign(m == 1 ? 1 : m, line.front());
    return out;
  }
  std::vector<double> s(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) s[i] = s[i - 1] + (line[i] - line[i - 1]).norm();
  double total = s.back();
  std::size_t seg = 0;
  for (std::size_t k = 0; k < m; ++k) {
    double target = total * static_cast<double>(k) / static_cast<double>(m - 1);
    while (seg + 2 < line.size() && s[seg + 1] < target) ++seg;
    double len = s[seg + 1] - s[seg];
    double w = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(line[seg] + w * (line[seg + 1] - line[seg]));
  }
  return out;
}

}  // namespace

ManifoldSample unstable_manifold_sample(const BenchmarkSystem& sys, std::size_t n, const Vec& lo,
                                        const Vec& hi, const Vec& saddle_guess, double seed_offset) {
  if (n == 0) fail(ErrorKind::Config, "need at least one manifold sample");
  ManifoldSample ms;
  ms.saddle = find_steady_state(sys.field, saddle_guess);
  Mat J = sys.field.jacobian_at(ms.saddle);
  Eigen::EigenSolver<Mat> es(J);
  int unstable = -1, count = 0;
  for (Eigen::Index k = 0; k < J.rows(); ++k) {
    cplx l = es.eigenvalues()[k];
    if (l.real() > 0.0 && std::abs(l.imag()) < 1e-12) {
      unstable = static_cast<int>(k);
      ++count;
    }
  }
  if (count != 1) fail(ErrorKind::Config, "steady state is not a saddle with one unstable direction");
  double lu = es.eigenvalues()[unstable].real();
  ms.unstable_direction = es.eigenvectors().col(unstable).real().normalized();
  if (!inside(ms.saddle, lo, hi)) fail(ErrorKind::Config, "saddle lies outside the sampling window");

  Rk45Options opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const double t_max = 60.0 / lu;
  const double dtau = std::min(0.05, 0.05 / lu);
  std::vector<Vec> branches[2];
  for (int b = 0; b < 2; ++b) {
    double sgn = b == 0 ? 1.0 : -1.0;
    Vec x = ms.saddle + sgn * seed_offset * ms.unstable_direction;
    std::vector<Vec>& line = branches[b];
    line.push_back(x);
    Vec dx(x.size());
    for (double t = 0.0; t < t_max; t += dtau) {
      Vec y = rk45_integrate(sys.field.rhs, x, dtau, opt);
      if (!inside(y, lo, hi)) {
        line.push_back(clip_to_window(x, y, lo, hi));
        break;
      }
      line.push_back(y);
      x = y;
      sys.field.rhs(x, dx);
      if (dx.norm() < 1e-9 && (x - ms.saddle).norm() > 10.0 * seed_offset) break;
    }
  }
  std::size_t n0 = (n + 1) / 2, n1 = n / 2;
  for (int b = 0; b < 2; ++b) {
    auto pts = resample_arclength(branches[b], b == 0 ? n0 : n1);
    for (auto& p : pts) {
      ms.points.push_back(p);
      ms.branch.push_back(b);
    }
  }
  return ms;
}

PolarParams polar_params(const SystemParams& sp) {
  PolarParams p;
  p.mu = param(sp, "mu");
  p.omega = param(sp, "omega");
  p.alpha = param(sp, "alpha");
  p.C = param(sp, "C");
  if (!(p.mu > 0.0 && p.omega > 0.0 && p.C > 0.0))
    fail(ErrorKind::Config, "polar system needs mu, omega, C > 0");
  return p;
}

cplx polar_phi_cycle(double r, double theta, const PolarParams& p) {
  if (!(r > 0.0)) fail(ErrorKind::Domain, "limit-cycle eigenfunction needs r > 0");
  double sm = std::sqrt(p.mu);
  double mag = p.C * std::abs(p.mu - r * r) / (r * r);
  double ph = theta - p.alpha / sm * std::log((sm + r) / r);
  return std::polar(mag, ph);
}

cplx polar_phi_steady(double r, double theta, const PolarParams& p) {
  double sm = std::sqrt(p.mu);
  if (!(r >= 0.0 && r < sm)) fail(ErrorKind::Domain, "steady-state eigenfunction needs 0 <= r < sqrt(mu)");
  double q = std::sqrt(p.mu - r * r);
  double mag = p.C * r / q;
  double ph = theta - p.alpha / sm * std::log((sm + r) / q);
  return std::polar(mag, ph);
}

Vec polar_exact_flow(const Vec& x, double t, const PolarParams& p) {
  double r0 = std::hypot(x[0], x[1]);
  Vec out(2);
  if (r0 == 0.0) {
    out.setZero();
    return out;
  }
  double th0 = std::atan2(x[1], x[0]);
  double sm = std::sqrt(p.mu);
  // With K = mu/r0^2 - 1, r(t) = sqrt(mu) / sqrt(1 + K exp(-2 mu t)).
  double K = p.mu / (r0 * r0) - 1.0;
  double denom = 1.0 + K * std::exp(-2.0 * p.mu * t);
  if (!(denom > 0.0)) fail(ErrorKind::Divergence, "polar trajectory escapes to infinity");
  double r = sm / std::sqrt(denom);
  // The integral of (r - sqrt(mu)) from 0 to t, in closed form.
  double drift = (std::log1p(std::sqrt(denom)) - std::log1p(std::sqrt(1.0 + K))) / sm;
  double th = th0 + p.omega * t + p.alpha * drift;
  out << r * std::cos(th), r * std::sin(th);
  return out;
}

}  // namespace koopal
