#pragma once

#include "koopal/systems.hpp"

#include <json.hpp>

#include <optional>

namespace koopal {

using Observable = std::function<cplx(const Vec&)>;

// Known observables by id: "sin_x1_plus_x2", "x1", "x2", "norm_sq".
Observable observable_by_id(const std::string& id);

struct LaplaceOptions {
  double horizon = 0.0;  // T, length of the averaging window
  double step = 0.0;     // quadrature spacing; T / step is rounded to an integer count
  double settle = 0.0;   // window starts here; the result is scaled by exp(-lambda settle)
  double divergence = 1e8;
  Rk45Options rk45{1e-10, 1e-12};
};

// (1/T) * trapezoid of f(F^t x) exp(-lambda t) over [settle, settle + T] along an RK45
// trajectory; with settle = 0 this is the plain Laplace average.
cplx laplace_average(const VectorField& field, const Observable& f, cplx lambda, const Vec& x,
                     const LaplaceOptions& opt);

struct CycleInfo {
  double period = 0.0;
  double omega = 0.0;
  Vec point;   // on the cycle, also the section origin
  Vec normal;  // section normal, the flow direction at point
  double extent = 0.0;  // largest distance from point along the cycle
  int newton_iterations = 0;
};

// Settles x0 onto the cycle, then solves F^T(x) = x on the section through the
// settled point with Newton.
CycleInfo limit_cycle_period(const VectorField& field, const Vec& x0, double transient = 100.0,
                             double max_return = 1000.0);

// Nontrivial Floquet exponent of a planar cycle: mean divergence over one period.
double floquet_exponent_planar(const VectorField& field, const CycleInfo& cycle, int samples = 2000);

// Time s in [0, period) such that x is asymptotically in phase with F^s(cycle.point).
double asymptotic_phase_time(const VectorField& field, const CycleInfo& cycle, const Vec& x,
                             double settle_periods = 40.0);

// Isostable coordinate from f(F^t x) - f(F^{t+s} cycle.point), whose decay rate is kappa.
cplx floquet_laplace_average(const VectorField& field, const CycleInfo& cycle, double kappa, const Observable& f,
                             const Vec& x, const LaplaceOptions& opt);

// ---- polar example ----

struct PolarPoint {
  double r = 0.0;
  double theta = 0.0;
};

// Domain: interior (0, sqrt mu) or exterior (sqrt mu, inf).
enum class Branch { Interior, Exterior };

struct BranchedEigenfunction {
  std::function<FieldValue(double r, double theta)> interior;
  std::function<FieldValue(double r, double theta)> exterior;  // empty when the function has no exterior branch
  std::string boundary_description;
  double boundary_radius = 0.0;  // sqrt(mu)
  cplx eigenvalue;

  // Dispatch on r; the boundary circle itself evaluates to the closed-form limit.
  FieldValue operator()(double r, double theta) const;
  FieldValue at(const Vec& x) const;
};

struct PolarEigenfunctions {
  PolarParams params;
  BranchedEigenfunction phi_lc;  // eigenvalue -2 mu + i omega
  BranchedEigenfunction phi_ss;  // eigenvalue mu + i (omega - alpha sqrt mu), interior only
};

PolarEigenfunctions polar_eigenfunctions(double mu, double omega, double alpha, double C);
PolarEigenfunctions polar_eigenfunctions(const PolarParams& p);

// Inverses of the branch restrictions: eigenfunction value -> (r, theta).
PolarPoint polar_lc_inverse(cplx z, Branch branch, const PolarParams& p);
PolarPoint polar_ss_inverse(cplx v, const PolarParams& p);

// Steady-state values from cycle values inside the cycle, and back.
cplx transform_Ti(cplx z, double mu, double alpha, double C);
cplx transform_Ti_inv(cplx v, double mu, double alpha, double C);

// Interior cycle isostable s -> C s / (1 + s) on the exterior range; the argument is unchanged.
cplx transform_To_tilde(cplx z, double C);

// Interior point to the exterior point with the matching isochron.
PolarPoint transform_To(const PolarPoint& p, double mu, double alpha, double C);

struct MappedPoint {
  PolarPoint point;
  bool singular = false;
};

// Pointwise (phi_lc|ext)^-1 o To_tilde o Ti^-1 o phi_ss. Points on r = 0 or r = sqrt mu come back
// singular; a trajectory with no interior point at all is a domain error.
std::vector<MappedPoint> map_trajectory_outside(const std::vector<PolarPoint>& traj, const PolarParams& p);

// Largest step between consecutive regular mapped points relative to the mean of
// its neighbouring steps; a branch jump shows up as a spike.
double max_jump_ratio(const std::vector<MappedPoint>& output);

// ---- fields on grids ----

enum class PhaseMethod { LaplaceAverage, Analytic };
enum class LaplaceMode { Rotation, Floquet };  // lambda = i omega, or the Floquet exponent

const char* to_string(PhaseMethod m);
const char* to_string(LaplaceMode m);

struct IsofieldConfig {
  PhaseMethod method = PhaseMethod::LaplaceAverage;
  std::string branch = "phi_cycle";                // analytic eigenfunction name
  std::string observable = "sin_x1_plus_x2";
  LaplaceMode mode = LaplaceMode::Rotation;
  Vec cycle_guess;                                  // start for the period search; (2, 0) when empty
  double horizon = 0.0;                             // 0: 50 periods (rotation) or 4 periods (Floquet)
  double settle = -1.0;                             // < 0: none (rotation) or 6 / |kappa| (Floquet)
  double step = 0.0;                                // 0: period / 200
};

struct PhaseSource {
  PhaseMethod method = PhaseMethod::Analytic;
  std::string observable;  // laplace only
  LaplaceMode mode = LaplaceMode::Rotation;
  double horizon = 0.0, step = 0.0, settle = 0.0;
  std::string branch;  // analytic only
};

struct PhaseField {
  EvalGrid grid;
  std::vector<FieldValue> values;
  cplx eigenvalue;  // continuous-time
  PhaseSource source;
  std::optional<CycleInfo> cycle;

  std::vector<double> isostable() const;  // |phi|, NaN where singular
  std::vector<double> isochron() const;   // principal argument, NaN where singular
};

// Evaluator for one point with everything (period, phase reference) fixed up front.
struct PhaseEvaluator {
  std::function<FieldValue(const Vec&)> eval;
  cplx eigenvalue;
  PhaseSource source;
  std::optional<CycleInfo> cycle;
};

PhaseEvaluator make_phase_evaluator(const BenchmarkSystem& sys, const IsofieldConfig& cfg);

PhaseField isofield(const BenchmarkSystem& sys, const EvalGrid& grid, const IsofieldConfig& cfg);

struct RelationCheck {
  double max_residual = 0.0;  // max |phi(F^dt x) - e^{lambda dt} phi(x)|
  double max_abs = 0.0;       // max |phi(x)| over the checked points
  std::size_t checked = 0;
};

// Eigen-relation on the given points; singular values on either side are skipped.
RelationCheck eigen_relation_check(const PhaseEvaluator& ev, const FlowMap& flow, const std::vector<Vec>& points);

// Points of a grid with rmin <= |x| <= rmax.
std::vector<Vec> annulus_points(const EvalGrid& grid, double rmin, double rmax);

// Smallest |grad phi . t| / (|grad phi| |t|) over manifold points with tangents t; central differences.
double min_transversality(const std::function<FieldValue(const Vec&)>& phi, const std::vector<Vec>& points,
                          const std::vector<Vec>& tangents, double h = 1e-6);

nlohmann::json phase_source_to_json(const PhaseSource& s, cplx eigenvalue);

}  // namespace koopal
