#pragma once

#include "koopal/core.hpp"
#include "koopal/integrate.hpp"

#include <optional>
#include <string>

namespace koopal {

// Closed-form time-t map, when one is known.
using ExactFlow = std::function<Vec(const Vec& x, double t)>;

struct VectorField {
  int dim = 0;
  Rhs rhs;
  std::function<Mat(const Vec&)> jacobian;  // may be empty; finite differences are used then
  ExactFlow exact;                          // may be empty

  Vec operator()(const Vec& x) const;
  Mat jacobian_at(const Vec& x) const;
};

enum class FlowMethod { Exact, Euler, Rk45 };
const char* to_string(FlowMethod m);
FlowMethod flow_method_from_string(const std::string& s);

struct FlowMap {
  VectorField field;
  double dt = 0.0;
  FlowMethod method = FlowMethod::Rk45;
  double euler_step = 1e-3;
  Rk45Options rk45{};
};

// F^dt(x) with the configured integrator.
Vec flow(const FlowMap& map, const Vec& x);
// F^t(x) for an arbitrary t using the map's integrator settings.
Vec flow_for(const FlowMap& map, const Vec& x, double t);
// Flow image of every grid point, evaluated in parallel.
std::vector<Vec> flow_on_points(const FlowMap& map, const std::vector<Vec>& points);

// Max over the grid of |numeric(x) - exact(x)|.
double integration_error_sup(const FlowMap& numeric, const FlowMap& exact, const EvalGrid& grid);
double integration_error_sup(const std::vector<Vec>& numeric, const std::vector<Vec>& exact);

struct SnapshotSet {
  Mat X;  // d x n, columns are states
  Mat Y;  // d x n, Y[:,j] = F^dt(X[:,j])
  double dt = 0.0;
  std::string system_id;
  std::uint64_t seed = 0;
  Vec box_lo, box_hi;
  std::size_t dropped = 0;  // pairs lost to divergence

  std::size_t size() const { return static_cast<std::size_t>(X.cols()); }
  int dim() const { return static_cast<int>(X.rows()); }
};

// Newton iteration on f(x) = 0.
Vec find_steady_state(const VectorField& field, const Vec& guess, double tol = 1e-12,
                      int max_iter = 100);

}  // namespace koopal
