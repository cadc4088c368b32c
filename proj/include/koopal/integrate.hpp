#pragma once

#include "koopal/core.hpp"

namespace koopal {

// Right-hand side writes f(x) into dx; dx is preallocated to the state size.
using Rhs = std::function<void(const Vec& x, Vec& dx)>;

struct Rk45Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 picks a step from the local derivative scale
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 2'000'000;
  double divergence_radius = 1e8;
};

struct Rk45Stats {
  long accepted = 0;
  long rejected = 0;
  double last_step = 0.0;
};

// Adaptive Dormand-Prince 5(4) from t = 0 to t = duration (duration may be
// negative). Throws Divergence when |x| exceeds the radius.
Vec rk45_integrate(const Rhs& f, const Vec& x0, double duration, const Rk45Options& opt = {},
                   Rk45Stats* stats = nullptr);

// Integrates once and reports the state at each requested time, which must be
// non-decreasing and non-negative.
std::vector<Vec> rk45_sample(const Rhs& f, const Vec& x0, const std::vector<double>& times,
                             const Rk45Options& opt = {});

// Fixed-step forward Euler; duration / step must be an integer within 1e-9.
Vec euler_integrate(const Rhs& f, const Vec& x0, double duration, double step,
                    double divergence_radius = 1e8);

}  // namespace koopal
