#include "koopal/extend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace koopal {

using nlohmann::json;

namespace {

bool is_integer(double m) { return std::abs(m - std::round(m)) == 0.0 && std::abs(m) < 1e9; }

cplx real_power(cplx z, double m) {
  return is_integer(m) ? int_pow(z, static_cast<int>(std::lround(m))) : principal_pow(z, m);
}

std::string fmt_exp(double m) {
  std::ostringstream os;
  os << m;
  return os.str();
}

constexpr double kZeroCollar = 1e-6;

}  // namespace

FieldValue BaseEigenfunction::eval(const Vec& x) const {
  if (dict) {
    Vec psi = dict->eval(x);
    cplx v = weights.transpose() * psi.cast<cplx>();
    return FieldValue::regular(v);
  }
  if (analytic) return analytic(x);
  fail(ErrorKind::Internal, "base eigenfunction has no evaluator");
}

EigenfunctionExpr EigenfunctionExpr::from_weights(const Dictionary& dict, CVec weights, cplx eigenvalue,
                                                  std::string name) {
  if (weights.size() != dict.size()) fail(ErrorKind::Contract, "weight vector does not match the dictionary");
  auto b = std::make_shared<BaseEigenfunction>();
  b->name = std::move(name);
  b->eigenvalue = eigenvalue;
  b->dict = dict;
  b->weights = std::move(weights);
  EigenfunctionExpr e;
  e.factors_.push_back({b, 1.0});
  return e;
}

EigenfunctionExpr EigenfunctionExpr::from_analytic(const AnalyticEigenfunction& f, double dt) {
  return from_function(f.name, std::exp(f.eigenvalue * dt), f.eval, f.zeros);
}

EigenfunctionExpr EigenfunctionExpr::from_function(std::string name, cplx eigenvalue,
                                                   std::function<FieldValue(const Vec&)> f,
                                                   std::vector<Vec> zeros) {
  auto b = std::make_shared<BaseEigenfunction>();
  b->name = std::move(name);
  b->eigenvalue = eigenvalue;
  b->analytic = std::move(f);
  b->zeros = std::move(zeros);
  EigenfunctionExpr e;
  e.factors_.push_back({b, 1.0});
  return e;
}

cplx EigenfunctionExpr::eigenvalue() const {
  cplx l(1.0, 0.0);
  for (auto& f : factors_) l *= real_power(f.base->eigenvalue, f.exponent);
  return l;
}

std::string EigenfunctionExpr::provenance() const {
  if (factors_.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (i) s += "*";
    s += factors_[i].base->name;
    if (factors_[i].exponent != 1.0) s += "^" + fmt_exp(factors_[i].exponent);
  }
  return s;
}

FieldValue EigenfunctionExpr::eval(const Vec& x) const {
  cplx val(1.0, 0.0);
  for (auto& f : factors_) {
    const double m = f.exponent;
    if (m < 0.0) {
      for (auto& z : f.base->zeros)
        if ((x - z).norm() < kZeroCollar) return FieldValue::singular_point();
    }
    FieldValue b = f.base->eval(x);
    if (b.singular) return b;
    if (b.value == cplx(0.0, 0.0)) {
      if (m < 0.0) return FieldValue::singular_point();
      if (m > 0.0) val = 0.0;
      continue;
    }
    val *= real_power(b.value, m);
  }
  if (!std::isfinite(val.real()) || !std::isfinite(val.imag())) return FieldValue::singular_point();
  return FieldValue::regular(val);
}

std::vector<FieldValue> EigenfunctionExpr::eval_points(const std::vector<Vec>& pts) const {
  std::vector<FieldValue> out(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { out[i] = eval(pts[i]); });
  return out;
}

EigenfunctionExpr EigenfunctionExpr::scaled(cplx c) const {
  if (factors_.size() != 1 || factors_[0].exponent != 1.0)
    fail(ErrorKind::Contract, "only a single unpowered eigenfunction can be rescaled");
  auto b = std::make_shared<BaseEigenfunction>(*factors_[0].base);
  if (b->dict) {
    b->weights *= c;
  } else {
    auto inner = b->analytic;
    b->analytic = [inner, c](const Vec& x) {
      FieldValue v = inner(x);
      if (!v.singular) v.value *= c;
      return v;
    };
  }
  EigenfunctionExpr e;
  e.factors_.push_back({b, 1.0});
  return e;
}

EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p) {
  if (!std::isfinite(p)) fail(ErrorKind::Contract, "exponent must be finite");
  EigenfunctionExpr e;
  for (auto& f : a.factors_)
    if (f.exponent * p != 0.0) e.factors_.push_back({f.base, f.exponent * p});
  return e;
}

EigenfunctionExpr monomial(const EigenfunctionExpr& a, double p, const EigenfunctionExpr& b, double q) {
  EigenfunctionExpr e = monomial(a, p);
  for (auto& f : monomial(b, q).factors_) {
    auto it = std::find_if(e.factors_.begin(), e.factors_.end(),
                           [&](const EigenfunctionExpr::Factor& g) { return g.base == f.base; });
    if (it == e.factors_.end()) {
      e.factors_.push_back(f);
    } else {
      it->exponent += f.exponent;
      if (it->exponent == 0.0) e.factors_.erase(it);
    }
  }
  return e;
}

double real_exponent_match(cplx source, cplx target) {
  if (std::abs(std::abs(source) - 1.0) > 1e-10 || std::abs(std::abs(target) - 1.0) > 1e-10)
    fail(ErrorKind::Contract, "exponent matching needs eigenvalues on the unit circle");
  double as = std::arg(source);
  if (std::abs(as) < 1e-14) fail(ErrorKind::Domain, "source eigenvalue is 1; no exponent reaches another value");
  double at = std::arg(target);
  // std::arg returns -pi for negative reals with a negative-zero imaginary part.
  if (as == -M_PI) as = M_PI;
  if (at == -M_PI) at = M_PI;
  return at / as;
}

GridFlow grid_flow(const EvalGrid& grid, const FlowMap& flow) {
  GridFlow gf;
  gf.points = grid.points();
  gf.images = flow_on_points(flow, gf.points);
  return gf;
}

GridError trajectory_error(const EigenfunctionExpr& expr, const GridFlow& gf, double p) {
  if (gf.points.size() != gf.images.size()) fail(ErrorKind::Contract, "points and images differ in count");
  if (!(p > 0.0)) fail(ErrorKind::Contract, "power must be positive");
  const cplx lambda = expr.eigenvalue();
  const std::size_t n = gf.points.size();
  std::vector<double> sq(n, 0.0);
  std::vector<char> bad(n, 0);
  parallel_for(n, [&](std::size_t i) {
    FieldValue a = expr.eval(gf.points[i]);
    FieldValue b = expr.eval(gf.images[i]);
    if (a.singular || b.singular) {
      bad[i] = 1;
      return;
    }
    sq[i] = std::norm(b.value - lambda * a.value);
  });
  std::vector<double> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!bad[i]) kept.push_back(sq[i]);
  if (kept.empty()) fail(ErrorKind::EmptySupport, "every grid point is singular for this eigenfunction");
  double ms = pairwise_sum(kept) / static_cast<double>(kept.size());
  return {std::pow(std::sqrt(ms), 1.0 / p), n - kept.size()};
}

double histogram_mode(std::vector<double> v, int bins) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) fail(ErrorKind::EmptySupport, "no finite values for the histogram");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  double lo = v[static_cast<std::size_t>(std::floor(0.005 * static_cast<double>(n - 1)))];
  double hi = v[static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(n - 1)))];
  if (hi - lo <= 1e-15 * std::max(1.0, std::abs(lo))) return 0.5 * (lo + hi);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  double w = (hi - lo) / bins;
  for (double x : v) {
    if (x < lo || x > hi) continue;
    auto k = static_cast<std::size_t>(std::min<double>(bins - 1, std::floor((x - lo) / w)));
    ++count[k];
  }
  auto best = std::max_element(count.begin(), count.end()) - count.begin();
  return lo + (static_cast<double>(best) + 0.5) * w;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TruthError truth_error(const EigenfunctionExpr& expr, const std::function<FieldValue(const Vec&)>& truth,
                       const std::vector<Vec>& points, double p, double eps_exclude) {
  const std::size_t n = points.size();
  std::vector<cplx> t(n), e(n);
  std::vector<char> keep(n, 0);
  parallel_for(n, [&](std::size_t i) {
    FieldValue a = truth(points[i]);
    FieldValue b = expr.eval(points[i]);
    if (a.singular || b.singular) return;
    if (std::abs(a.value) < eps_exclude || std::abs(b.value) < eps_exclude) return;
    t[i] = a.value;
    e[i] = b.value;
    keep[i] = 1;
  });
  std::vector<double> re, im;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    cplx r = t[i] / e[i];
    re.push_back(r.real());
    im.push_back(r.imag());
  }
  if (re.empty()) fail(ErrorKind::EmptySupport, "no grid points left after excluding near-zero values");
  TruthError out;
  out.c_mode = cplx(histogram_mode(re), histogram_mode(im));
  out.c_median = cplx(median(re), median(im));
  std::vector<double> sq;
  sq.reserve(re.size());
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) sq.push_back(std::norm(t[i] - out.c_mode * e[i]));
  out.excluded = n - sq.size();
  out.value = std::pow(std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size())), 1.0 / p);
  return out;
}

CfgTable::CfgTable(const Dictionary& dict, const GridFlow& gf, cplx lambda_bar) {
  const std::size_t n = gf.points.size();
  if (gf.images.size() != n) fail(ErrorKind::Contract, "points and images differ in count");
  resid_.resize(static_cast<Eigen::Index>(n));
  a_.resize(static_cast<Eigen::Index>(n));
  c_.resize(static_cast<Eigen::Index>(n));
  const double lam = std::abs(lambda_bar);
  parallel_for(n, [&](std::size_t i) {
    Vec px = dict.eval(gf.points[i]);
    Vec py = dict.eval(gf.images[i]);
    auto k = static_cast<Eigen::Index>(i);
    resid_[k] = (py.cast<cplx>() - lambda_bar * px.cast<cplx>()).norm();
    a_[k] = py.norm();
    c_[k] = px.norm() * lam;
  });
}

double CfgTable::operator()(int p) const {
  if (p < 1) fail(ErrorKind::Contract, "power must be at least one");
  std::vector<double> sq(static_cast<std::size_t>(resid_.size()));
  for (Eigen::Index i = 0; i < resid_.size(); ++i) {
    // S_1 = 1, S_{k+1} = a S_k + c^k
    double s = 1.0, ck = 1.0;
    for (int k = 1; k < p; ++k) {
      ck *= c_[i];
      s = a_[i] * s + ck;
    }
    double v = resid_[i] * s;
    sq[static_cast<std::size_t>(i)] = v * v;
  }
  if (sq.empty()) return 0.0;
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

double bound_constant_CFG(const Dictionary& dict, const GridFlow& gf, cplx lambda_bar, int p) {
  return CfgTable(dict, gf, lambda_bar)(p);
}

double discrete_bound(double delta_w_norm, double C_FG, int p) {
  if (delta_w_norm < 0.0 || C_FG < 0.0 || p < 1) fail(ErrorKind::Contract, "bound inputs must be nonnegative");
  return std::pow(C_FG * delta_w_norm, 1.0 / p);
}

double continuous_bound(double lambda_bar_abs, double M, double L, double eps_G, int p) {
  if (lambda_bar_abs < 0.0 || M < 0.0 || L < 0.0 || eps_G < 0.0 || p < 1)
    fail(ErrorKind::Contract, "bound inputs must be nonnegative");
  double a = lambda_bar_abs * M, b = L * eps_G;
  if (b == 0.0) return 0.0;
  if (a == 0.0) return b;
  // ((a + b)^p - a^p)^{1/p} without cancellation
  return a * std::pow(std::expm1(p * std::log1p(b / a)), 1.0 / p);
}

double continuous_budget(double epsilon, double lambda_bar_abs, double M, double L, int p) {
  if (epsilon < 0.0 || lambda_bar_abs < 0.0 || M < 0.0 || !(L > 0.0) || p < 1)
    fail(ErrorKind::Contract, "budget inputs must be nonnegative with L > 0");
  double a = lambda_bar_abs * M;
  if (a == 0.0) return epsilon / L;
  if (epsilon == 0.0) return 0.0;
  // (epsilon^p + a^p)^{1/p} - a, factored around the larger term
  if (epsilon >= a) return (epsilon * std::exp(std::log1p(std::pow(a / epsilon, p)) / p) - a) / L;
  return a * std::expm1(std::log1p(std::pow(epsilon / a, p)) / p) / L;
}

double discrete_budget(double epsilon, double C_FG, int p) {
  if (C_FG == 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(epsilon, p) / C_FG;
}

namespace {

std::string exceeded_status(int p) {
  if (p == 1) return "first power already exceeds the error budget";
  return "budget exceeded at p=" + std::to_string(p);
}

std::string capped_status(int p_max) {
  return "budget never exceeded (capped at p_max=" + std::to_string(p_max) + ")";
}

}  // namespace

ExtensionResult extend_discrete(const EigenfunctionExpr& base, const Dictionary& dict, const GridFlow& gf,
                                double epsilon, double delta_w_norm, int p_max) {
  if (!(epsilon > 0.0)) fail(ErrorKind::Config, "epsilon must be positive");
  if (delta_w_norm < 0.0) fail(ErrorKind::Config, "eigenvector error must be nonnegative");
  ExtensionResult r;
  r.name = base.provenance();
  r.eigenvalue = base.eigenvalue();
  CfgTable cfg(dict, gf, r.eigenvalue);
  r.status = capped_status(p_max);
  for (int p = 1; p <= p_max; ++p) {
    double C = cfg(p);
    double budget = discrete_budget(epsilon, C, p);
    if (delta_w_norm > budget) {
      r.status = exceeded_status(p);
      break;
    }
    ExtendedEigenfunction item;
    item.power = p;
    item.expr = monomial(base, p);
    item.eigenvalue = item.expr.eigenvalue();
    GridError te = trajectory_error(item.expr, gf, p);
    item.report = {p, te.value, discrete_bound(delta_w_norm, C, p), BoundKind::Eigenvector};
    item.budget = budget;
    item.excluded = te.excluded;
    r.items.push_back(std::move(item));
  }
  return r;
}

ExtensionResult extend_continuous(const EigenfunctionExpr& base, const GridFlow* gf, double epsilon,
                                  double eps_G, double L, double M, int p_max) {
  if (!(epsilon > 0.0)) fail(ErrorKind::Config, "epsilon must be positive");
  if (eps_G < 0.0) fail(ErrorKind::Config, "integration error must be nonnegative");
  ExtensionResult r;
  r.name = base.provenance();
  r.eigenvalue = base.eigenvalue();
  const double lam = std::abs(r.eigenvalue);
  r.status = capped_status(p_max);
  for (int p = 1; p <= p_max; ++p) {
    double budget = continuous_budget(epsilon, lam, M, L, p);
    if (eps_G > budget) {
      r.status = exceeded_status(p);
      break;
    }
    ExtendedEigenfunction item;
    item.power = p;
    item.expr = monomial(base, p);
    item.eigenvalue = item.expr.eigenvalue();
    double te = std::numeric_limits<double>::quiet_NaN();
    if (gf) {
      GridError g = trajectory_error(item.expr, *gf, p);
      te = g.value;
      item.excluded = g.excluded;
    }
    item.report = {p, te, continuous_bound(lam, M, L, eps_G, p), BoundKind::Integration};
    item.budget = budget;
    r.items.push_back(std::move(item));
  }
  return r;
}

EigenfunctionExpr expr_from_left(const Dictionary& dict, const Eigenpair& pair, std::string name) {
  if (pair.left.size() != dict.size()) fail(ErrorKind::Contract, "left eigenvector does not match the dictionary");
  CVec w = pair.left / pair.left.norm();
  Eigen::Index idx = 0;
  w.cwiseAbs().maxCoeff(&idx);
  w *= std::conj(w[idx] / std::abs(w[idx]));
  w[idx] = cplx(w[idx].real(), 0.0);
  return EigenfunctionExpr::from_weights(dict, w, pair.lambda, std::move(name));
}

EigenfunctionExpr normalize_on(const EigenfunctionExpr& e, const std::vector<Vec>& points) {
  auto vals = e.eval_points(points);
  std::vector<double> sq;
  for (auto& v : vals)
    if (!v.singular) sq.push_back(std::norm(v.value));
  if (sq.empty()) fail(ErrorKind::EmptySupport, "eigenfunction is singular on every point");
  double nrm = std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
  if (nrm == 0.0) fail(ErrorKind::Singular, "eigenfunction vanishes on the grid");
  return e.scaled(1.0 / nrm);
}

IterativeResult iterative_koopman_eigensolver(const Mat& K, const Dictionary& dict, int n, double epsilon,
                                              double eps_G, double L, double M, const GridFlow* gf,
                                              const DeflationOptions& opt, int p_max) {
  if (K.rows() != K.cols() || K.rows() != dict.size())
    fail(ErrorKind::Contract, "Koopman matrix does not match the dictionary");
  if (n < 0 || n > K.rows()) fail(ErrorKind::Config, "number of eigenpairs exceeds the matrix dimension");
  IterativeResult out;
  Mat work = K;
  int index = 0;
  while (static_cast<int>(out.pairs.size()) < n) {
    auto step = deflation_step(work, K, opt, index++);
    for (auto& pr : step) {
      if (static_cast<int>(out.pairs.size()) >= n) break;
      std::string name = "phi" + std::to_string(out.pairs.size() + 1);
      out.extensions.push_back(extend_continuous(expr_from_left(dict, pr, name), gf, epsilon, eps_G, L, M, p_max));
      out.pairs.push_back(pr);
    }
  }
  return out;
}

PrincipalFilter principal_filter(const std::vector<Vec>& log_fields, double rel_tol) {
  if (log_fields.empty() || log_fields[0].size() == 0)
    fail(ErrorKind::EmptySupport, "no masked points for the log fields");
  const Eigen::Index np = log_fields[0].size();
  Mat Lm(np, static_cast<Eigen::Index>(log_fields.size()));
  for (std::size_t j = 0; j < log_fields.size(); ++j) {
    if (log_fields[j].size() != np) fail(ErrorKind::Contract, "log fields have different lengths");
    if (!log_fields[j].allFinite()) fail(ErrorKind::Domain, "log field has non-finite entries");
    Lm.col(static_cast<Eigen::Index>(j)) = log_fields[j];
  }
  Eigen::BDCSVD<Mat> svd(Lm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PrincipalFilter f;
  f.singular_values = svd.singularValues();
  double s0 = f.singular_values.size() ? f.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < f.singular_values.size(); ++i)
    if (f.singular_values[i] > rel_tol * s0) ++f.rank;
  f.basis = svd.matrixU().leftCols(f.rank);
  f.coords = f.singular_values.head(f.rank).asDiagonal() * svd.matrixV().leftCols(f.rank).transpose();
  return f;
}

Vec log_abs_field(const EigenfunctionExpr& e, const std::vector<Vec>& points) {
  auto vals = e.eval_points(points);
  Vec out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i].singular || vals[i].value == cplx(0.0, 0.0))
      fail(ErrorKind::Domain, "log field requested at a zero or singular point");
    out[static_cast<Eigen::Index>(i)] = std::log(std::abs(vals[i].value));
  }
  return out;
}

json extension_to_json(const std::vector<ExtensionResult>& results) {
  json arr = json::array();
  for (auto& r : results) {
    json items = json::array();
    for (auto& it : r.items) {
      json j{{"p", it.power},
             {"re", it.eigenvalue.real()},
             {"im", it.eigenvalue.imag()},
             {"bound", it.report.bound},
             {"bound_kind", to_string(it.report.bound_kind)},
             {"budget", it.budget},
             {"excluded_points", it.excluded}};
      j["trajectory_error"] = std::isfinite(it.report.trajectory_error) ? json(it.report.trajectory_error) : json();
      items.push_back(j);
    }
    arr.push_back({{"name", r.name},
                   {"re", r.eigenvalue.real()},
                   {"im", r.eigenvalue.imag()},
                   {"max_power", r.max_power()},
                   {"status", r.status},
                   {"powers", items}});
  }
  return arr;
}

}  // namespace koopal
