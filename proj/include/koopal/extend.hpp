#pragma once

#include "koopal/dictionary.hpp"
#include "koopal/dynamics.hpp"
#include "koopal/eigensolve.hpp"
#include "koopal/systems.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace koopal {

// A base eigenfunction: w^T Psi(x) over a dictionary, or a closed-form evaluator.
// The eigenvalue is the per-step multiplier (e^{lambda dt} for flows).
struct BaseEigenfunction {
  std::string name;
  cplx eigenvalue{1.0, 0.0};
  std::optional<Dictionary> dict;
  CVec weights;
  std::function<FieldValue(const Vec&)> analytic;
  std::vector<Vec> zeros;

  FieldValue eval(const Vec& x) const;
};

// Product of real powers of base eigenfunctions.
class EigenfunctionExpr {
 public:
  struct Factor {
    std::shared_ptr<const BaseEigenfunction> base;
    double exponent = 1.0;
  };

  EigenfunctionExpr() = default;
  static EigenfunctionExpr from_weights(const Dictionary& dict, CVec weights, cplx eigenvalue,
                                        std::string name = "phi");
  // Closed-form eigenfunction of a flow sampled every dt.
  static EigenfunctionExpr from_analytic(const AnalyticEigenfunction& f, double dt);
  static EigenfunctionExpr from_function(std::string name, cplx eigenvalue,
                                         std::function<FieldValue(const Vec&)> f, std::vector<Vec> zeros = {});

  const std::vector<Factor>& factors() const { return factors_; }
  cplx eigenvalue() const;
  std::string provenance() const;

  FieldValue eval(const Vec& x) const;
  std::vector<FieldValue> eval_points(const std::vector<Vec>& pts) const;

  // Same expression with the single dictionary base rescaled by c.
  EigenfunctionExpr scaled(cplx c) const;

  friend EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p);
  friend EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p, const EigenfunctionExpr& b, double q);

 private:
  std::vector<Factor> factors_;
};

EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p);
EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p, const EigenfunctionExpr& b, double q);

// Real p with principal_pow(source, p) = target, both on the unit circle.
double real_exponent_match(cplx source, cplx target);

// Grid points paired with their images under one flow step.
struct GridFlow {
  std::vector<Vec> points;
  std::vector<Vec> images;
};
GridFlow grid_flow(const EvalGrid& grid, const FlowMap& flow);

struct GridError {
  double value = 0.0;
  std::size_t excluded = 0;  // singular points left out of the norm
};

// |phi(F x) - lambda phi(x)|_G^{1/p} over the non-singular points.
GridError trajectory_error(const EigenfunctionExpr& expr, const GridFlow& gf, double p);

struct TruthError {
  double value = 0.0;
  cplx c_mode{1.0, 0.0};
  cplx c_median{1.0, 0.0};
  std::size_t excluded = 0;
};

// |truth - c expr|_G^{1/p} with c the histogram mode of truth/expr, skipping
// points where either side is below eps_exclude in modulus.
TruthError truth_error(const EigenfunctionExpr& expr, const std::function<FieldValue(const Vec&)>& truth,
                       const std::vector<Vec>& points, double p, double eps_exclude);

// Densest-bin center of a 101-bin histogram over the 0.5%-99.5% quantile range.
double histogram_mode(std::vector<double> values, int bins = 101);

// Per-point ingredients of the eigenvector-error constant, reused across powers.
class CfgTable {
 public:
  CfgTable(const Dictionary& dict, const GridFlow& gf, cplx lambda_bar);
  double operator()(int p) const;  // C_FG(p, lambda_bar)

 private:
  Vec resid_, a_, c_;
};

double bound_constant_CFG(const Dictionary& dict, const GridFlow& gf, cplx lambda_bar, int p);
double discrete_bound(double delta_w_norm, double C_FG, int p);
// lambda_m = |lambda_bar| M
double continuous_bound(double lambda_bar_abs, double M, double L, double eps_G, int p);
// Largest eps_G keeping the continuous bound at or below epsilon.
double continuous_budget(double epsilon, double lambda_bar_abs, double M, double L, int p);
double discrete_budget(double epsilon, double C_FG, int p);

struct ExtendedEigenfunction {
  int power = 1;
  EigenfunctionExpr expr;
  cplx eigenvalue;
  ErrorReport report;  // trajectory_error is NaN when no flow data was supplied
  double budget = 0.0;
  std::size_t excluded = 0;
};

struct ExtensionResult {
  std::string name;
  cplx eigenvalue;
  std::vector<ExtendedEigenfunction> items;
  std::string status;
  int max_power() const { return items.empty() ? 0 : items.back().power; }
};

constexpr int kDefaultPMax = 64;

ExtensionResult extend_discrete(const EigenfunctionExpr& base, const Dictionary& dict, const GridFlow& gf,
                                double epsilon, double delta_w_norm, int p_max = kDefaultPMax);
ExtensionResult extend_continuous(const EigenfunctionExpr& base, const GridFlow* gf, double epsilon,
                                  double eps_G, double L, double M, int p_max = kDefaultPMax);

// w^T Psi from the left vector of a pair; w scaled to unit 2-norm with its
// largest entry real positive.
EigenfunctionExpr expr_from_left(const Dictionary& dict, const Eigenpair& pair, std::string name = "phi");
// Rescale so the grid norm over the points is one.
EigenfunctionExpr normalize_on(const EigenfunctionExpr& e, const std::vector<Vec>& points);

struct IterativeResult {
  std::vector<Eigenpair> pairs;
  std::vector<ExtensionResult> extensions;
};

// n dominant pairs by deflation, each extended with the continuous budget.
IterativeResult iterative_koopman_eigensolver(const Mat& K, const Dictionary& dict, int n, double epsilon,
                                              double eps_G, double L, double M, const GridFlow* gf = nullptr,
                                              const DeflationOptions& opt = {}, int p_max = kDefaultPMax);

struct PrincipalFilter {
  int rank = 0;
  Vec singular_values;
  Mat basis;   // orthonormal columns spanning the log fields
  Mat coords;  // rank x n_fields
};

// Fields are log-magnitudes sampled on a common masked set of points.
PrincipalFilter principal_filter(const std::vector<Vec>& log_fields, double rel_tol = 1e-8);
Vec log_abs_field(const EigenfunctionExpr& e, const std::vector<Vec>& points);

nlohmann::json extension_to_json(const std::vector<ExtensionResult>& results);

}  // namespace koopal
