#pragma once

#include "koopal/extend.hpp"
#include "koopal/regression.hpp"

#include <json.hpp>

#include <optional>

namespace koopal {

// Eigenfunctions fitted from data near one steady state.
struct LocalFamily {
  Vec anchor;
  Vec box_lo, box_hi;  // sampling region
  std::optional<KoopmanModel> model;  // of the time-reversed flow when time_reversed
  bool time_reversed = false;
  std::vector<EigenfunctionExpr> members;  // ascending |log|lambda||, trivial eigenvalue dropped
  std::vector<double> member_errors;       // p = 1 trajectory error on the sampling region
  std::size_t rejected_complex = 0;
  std::size_t rejected_spurious = 0;
  std::string diagnostics;
};

struct LocalFamilyOptions {
  double radius = 0.8;
  std::size_t n_pairs = 400;
  double dt = 0.1;
  int n_centers = 60;
  double centers_lo = 1.0, centers_hi = 4.0;  // one-dimensional systems only
  double bandwidth = 0.05;
  double ridge = 1e-10;
  double spurious_threshold = 1e-2;
  double slope = 1.0;  // |grad phi(anchor)| after pinning
  int error_points = 401;
  bool auto_reverse = true;  // fit backward in time around repelling states
  std::uint64_t seed = 0;
};

LocalFamily fit_local_family(const BenchmarkSystem& sys, const Vec& anchor, const LocalFamilyOptions& opt);
// Closed-form members, in the given order.
LocalFamily analytic_family(const BenchmarkSystem& sys, const Vec& anchor, const std::vector<std::string>& names,
                            double dt);

struct BridgeMap {
  double c_forward = 0.0;   // log|right| ~ c_forward log|left|
  double c_backward = 0.0;  // log|left| ~ c_backward log|right|
  double residual_forward = 0.0, residual_backward = 0.0;  // log-space RMS
  double overlap_forward = 0.0, overlap_backward = 0.0;    // relative RMS of magnitudes
  double window_lo = 0.0, window_hi = 0.0;
  double tikhonov = 0.0;
  std::size_t left_index = 0, right_index = 0;
  std::size_t samples = 0, masked = 0;
};

constexpr int kBridgeSamples = 256;

// Fits both directions on equispaced samples of a one-dimensional window.
BridgeMap fit_bridge(const EigenfunctionExpr& left, const EigenfunctionExpr& right, double window_lo,
                     double window_hi, double tikhonov = 1e-8, int samples = kBridgeSamples);
BridgeMap fit_bridge(const LocalFamily& left, const LocalFamily& right, double window_lo, double window_hi,
                     double tikhonov = 1e-8, std::size_t left_index = 0, std::size_t right_index = 0);

// exp(c log|partner|) on the points; singular where the partner vanishes or is singular.
std::vector<FieldValue> continue_across(const EigenfunctionExpr& partner, double c, const std::vector<Vec>& points);

// Relative RMS of |a| - |b| over points where both are regular, normalized by |b|.
double relative_magnitude_error(const std::vector<FieldValue>& a, const std::vector<FieldValue>& b);

nlohmann::json bridge_to_json(const BridgeMap& m);

}  // namespace koopal
