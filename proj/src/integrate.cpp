#include "koopal/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace koopal {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// Difference between the 5th and 4th order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

void check_divergence(const Vec& x, double radius) {
  if (!x.allFinite() || x.norm() > radius) {
    std::ostringstream os;
    os << "state norm exceeded " << radius;
    fail(ErrorKind::Divergence, os.str());
  }
}

class Stepper {
 public:
  Stepper(const Rhs& f, int n, const Rk45Options& opt)
      : f_(f), opt_(opt), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n) {}

  // Advances x from t to t_end in place.
  void run(Vec& x, double duration, double& h, bool& fresh, Rk45Stats* stats) {
    if (duration == 0.0) return;
    double dir = duration > 0 ? 1.0 : -1.0;
    double t = 0.0;
    if (fresh) {
      f_(x, k1);
      fresh = false;
    }
    if (h <= 0.0) h = initial_step(x, std::abs(duration));
    long steps = 0;
    while (dir * (duration - t) > 0.0) {
      if (++steps > opt_.max_steps) fail(ErrorKind::Convergence, "rk45 step budget exhausted");
      double remaining = std::abs(duration - t);
      double hs = std::min(h, remaining);
      if (opt_.max_step > 0.0) hs = std::min(hs, opt_.max_step);
      bool last = hs >= remaining;
      double hh = dir * hs;

      tmp = x + hh * (a21 * k1);
      f_(tmp, k2);
      tmp = x + hh * (a31 * k1 + a32 * k2);
      f_(tmp, k3);
      tmp = x + hh * (a41 * k1 + a42 * k2 + a43 * k3);
      f_(tmp, k4);
      tmp = x + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      f_(tmp, k5);
      tmp = x + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      f_(tmp, k6);
      ynew = x + hh * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      f_(ynew, k7);
      err = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double acc = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        double sc = opt_.atol + opt_.rtol * std::max(std::abs(x[i]), std::abs(ynew[i]));
        double r = err[i] / sc;
        acc += r * r;
      }
      double en = std::sqrt(acc / static_cast<double>(x.size()));
      if (!std::isfinite(en)) {
        h = hs * 0.2;
        if (h < 1e-300) fail(ErrorKind::Divergence, "rk45 produced non-finite state");
        continue;
      }
      if (en <= 1.0) {
        t = last ? duration : t + hh;
        x = ynew;
        k1 = k7;
        check_divergence(x, opt_.divergence_radius);
        if (stats) {
          stats->accepted++;
          stats->last_step = hs;
        }
        double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        // Do not let a short final step shrink the next interval's step.
        if (!last) h = hs * fac;
        else h = std::max(h, hs * fac);
      } else {
        if (stats) stats->rejected++;
        h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
          fail(ErrorKind::Convergence, "rk45 step size underflow");
      }
    }
  }

 private:
  double initial_step(const Vec& x, double span) {
    if (opt_.initial_step > 0.0) return opt_.initial_step;
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double sc = opt_.atol + opt_.rtol * std::abs(x[i]);
      d0 += (x[i] / sc) * (x[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / x.size());
    d1 = std::sqrt(d1 / x.size());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h0, span);
  }

  const Rhs& f_;
  Rk45Options opt_;
  Vec k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
};

}  // namespace

Vec rk45_integrate(const Rhs& f, const Vec& x0, double duration, const Rk45Options& opt,
                   Rk45Stats* stats) {
  Vec x = x0;
  check_divergence(x, opt.divergence_radius);
  Stepper s(f, static_cast<int>(x.size()), opt);
  double h = 0.0;
  bool fresh = true;
  s.run(x, duration, h, fresh, stats);
  return x;
}

std::vector<Vec> rk45_sample(const Rhs& f, const Vec& x0, const std::vector<double>& times,
                             const Rk45Options& opt) {
  std::vector<Vec> out;
  out.reserve(times.size());
  Vec x = x0;
  check_divergence(x, opt.divergence_radius);
  Stepper s(f, static_cast<int>(x.size()), opt);
  double h = 0.0;
  bool fresh = true;
  double t = 0.0;
  for (double ti : times) {
    if (ti < t) fail(ErrorKind::Contract, "sample times must be non-decreasing and non-negative");
    s.run(x, ti - t, h, fresh, nullptr);
    t = ti;
    out.push_back(x);
  }
  return out;
}

Vec euler_integrate(const Rhs& f, const Vec& x0, double duration, double step,
                    double divergence_radius) {
  if (!(step > 0.0)) fail(ErrorKind::Config, "euler step must be positive");
  double ratio = std::abs(duration) / step;
  double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "euler step " << step << " does not divide the interval " << duration;
    fail(ErrorKind::Config, os.str());
  }
  double hh = duration >= 0 ? step : -step;
  Vec x = x0, dx(x0.size());
  long steps = static_cast<long>(n);
  for (long i = 0; i < steps; ++i) {
    f(x, dx);
    x += hh * dx;
    check_divergence(x, divergence_radius);
  }
  return x;
}

}  // namespace koopal
