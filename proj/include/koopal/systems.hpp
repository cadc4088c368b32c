#pragma once

#include "koopal/dynamics.hpp"

#include <map>
#include <string>

namespace koopal {

enum class SystemId {
  Cubic1d,
  Quad1d,
  Linear2d,
  Softplus2d,
  Lin5d,
  PolarLC,
  VanDerPol,
  Saddle2d,
  Bistable2d,
  Duffing,
};

const char* to_string(SystemId id);
SystemId system_from_string(const std::string& s);

using SystemParams = std::map<std::string, double>;

// Closed-form eigenfunction of the continuous-time generator: grad(phi).f = lambda*phi.
struct AnalyticEigenfunction {
  std::string name;
  cplx eigenvalue;  // continuous-time
  std::function<FieldValue(const Vec&)> eval;
  // Distance from x to the set where the function is undefined, zero or
  // not smooth; infinity when there is none.
  std::function<double(const Vec&)> singular_distance;
  // Points where the function vanishes, for masking negative powers.
  std::vector<Vec> zeros;
};

struct BenchmarkSystem {
  SystemId id;
  SystemParams params;
  VectorField field;
  std::vector<AnalyticEigenfunction> eigenfunctions;
  std::vector<Vec> steady_states;
  Vec sample_lo, sample_hi;  // region where oracle checks are meaningful
  // Optional smooth change of coordinates from a simpler latent system; used
  // when snapshots are sampled uniformly in latent coordinates.
  std::function<Vec(const Vec&)> from_latent;

  int dim() const { return field.dim; }
  const AnalyticEigenfunction& eigenfunction(const std::string& name) const;
};

SystemParams default_params(SystemId id);
BenchmarkSystem make_system(SystemId id, const SystemParams& overrides = {});
// Linear system xdot = A x with its closed-form flow and left-eigenvector
// eigenfunctions (real spectrum only).
BenchmarkSystem make_linear_system(const Mat& A);

// Largest |grad(phi).f - lambda*phi| / (1 + |phi|) over random points in the
// sample box that are at least `margin` away from the singular set.
double pde_residual_max(const BenchmarkSystem& sys, const AnalyticEigenfunction& phi, int n_points,
                        std::uint64_t seed, double margin = 0.05);

struct SamplingOptions {
  std::size_t n_pairs = 400;
  double dt = 0.2;
  Vec box_lo, box_hi;
  std::uint64_t seed = 0;
  int samples_per_traj = 2;  // states per trajectory; pairs per trajectory = samples - 1
  bool latent_box = false;   // sample the box in latent coordinates, then map
  FlowMethod method = FlowMethod::Exact;
  double euler_step = 1e-3;
  Rk45Options rk45{};
};

// Seeded snapshot pairs; divergent trajectories are dropped and counted.
SnapshotSet sample_snapshots(const BenchmarkSystem& sys, const SamplingOptions& opt);

FlowMap make_flow(const BenchmarkSystem& sys, double dt, FlowMethod method, double euler_step = 1e-3,
                  const Rk45Options& rk45 = {});
// Exact flow if one exists, else RK45 with the given tolerances.
FlowMap best_flow(const BenchmarkSystem& sys, double dt, double rtol = 1e-10, double atol = 1e-12);

struct ManifoldSample {
  std::vector<Vec> points;   // branch 0 outward from the saddle, then branch 1 outward
  std::vector<int> branch;   // 0 or 1 per point
  Vec saddle;
  Vec unstable_direction;
};

// Samples the unstable manifold of the saddle nearest `saddle_guess` inside the
// window [lo, hi], arclength-resampled to n points.
ManifoldSample unstable_manifold_sample(const BenchmarkSystem& sys, std::size_t n, const Vec& lo,
                                        const Vec& hi, const Vec& saddle_guess,
                                        double seed_offset = 1e-6);

// Planar system rdot = r(mu - r^2), thetadot = omega + alpha (r - sqrt(mu)).
struct PolarParams {
  double mu = 1.0;
  double omega = 1.0;
  double alpha = 1.0;
  double C = 1.0;
};
PolarParams polar_params(const SystemParams& p);

// Limit-cycle eigenfunction, eigenvalue -2 mu + i omega, defined for r > 0.
cplx polar_phi_cycle(double r, double theta, const PolarParams& p);
// Steady-state eigenfunction, eigenvalue mu + i (omega - alpha sqrt(mu)), 0 <= r < sqrt(mu).
cplx polar_phi_steady(double r, double theta, const PolarParams& p);
// Closed-form flow in Cartesian coordinates.
Vec polar_exact_flow(const Vec& x, double t, const PolarParams& p);

}  // namespace koopal
