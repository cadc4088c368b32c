#include "koopal/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace koopal {

using nlohmann::json;

namespace {

std::vector<Vec> sample_points(const Vec& lo, const Vec& hi, int n1d) {
  if (lo.size() == 1) {
    std::vector<Vec> pts;
    for (int i = 0; i < n1d; ++i) pts.push_back(Vec::Constant(1, lo[0] + (hi[0] - lo[0]) * i / (n1d - 1)));
    return pts;
  }
  double h = (hi - lo).maxCoeff() / 20.0;
  return EvalGrid(lo, hi, std::min(h, 0.999)).points();
}

}  // namespace

LocalFamily fit_local_family(const BenchmarkSystem& sys, const Vec& anchor, const LocalFamilyOptions& opt) {
  const int d = sys.dim();
  if (anchor.size() != d) fail(ErrorKind::Contract, "anchor dimension does not match the system");
  if (!(opt.radius > 0.0)) fail(ErrorKind::Config, "radius must be positive");
  if ((sys.field(anchor)).norm() > 1e-8 * (1.0 + anchor.norm()))
    fail(ErrorKind::Config, "anchor is not a steady state");

  LocalFamily fam;
  fam.anchor = anchor;
  fam.box_lo = anchor.array() - opt.radius;
  fam.box_hi = anchor.array() + opt.radius;

  // Near a repelling state the forward map sharpens Gaussian features, so fit the
  // time-reversed flow there; eigenfunctions agree and multipliers invert.
  BenchmarkSystem fit_sys = sys;
  if (opt.auto_reverse) {
    Eigen::EigenSolver<Mat> es(sys.field.jacobian_at(anchor));
    fam.time_reversed = es.eigenvalues().real().minCoeff() > 0.0;
  }
  if (fam.time_reversed) {
    auto rhs = sys.field.rhs;
    fit_sys.field.rhs = [rhs](const Vec& x, Vec& dx) {
      rhs(x, dx);
      dx = -dx;
    };
    fit_sys.field.jacobian = nullptr;
    if (sys.field.exact) {
      auto ex = sys.field.exact;
      fit_sys.field.exact = [ex](const Vec& x, double t) { return ex(x, -t); };
    }
  }

  SamplingOptions so;
  so.n_pairs = opt.n_pairs;
  so.dt = opt.dt;
  so.box_lo = fam.box_lo;
  so.box_hi = fam.box_hi;
  so.seed = opt.seed;
  so.method = sys.field.exact ? FlowMethod::Exact : FlowMethod::Rk45;
  so.rk45.rtol = 1e-10;
  so.rk45.atol = 1e-12;
  SnapshotSet data = sample_snapshots(fit_sys, so);

  Dictionary dict = d == 1 ? rbf_dictionary_uniform(opt.centers_lo, opt.centers_hi, opt.n_centers, opt.bandwidth)
                           : rbf_dictionary(data.X, opt.n_centers, opt.bandwidth, opt.seed);
  fam.model = fit_edmd(data, dict, {opt.ridge, false});

  std::vector<Vec> pts = sample_points(fam.box_lo, fam.box_hi, opt.error_points);
  GridFlow gf{pts, flow_on_points(best_flow(fit_sys, opt.dt), pts)};

  struct Member {
    double key;
    EigenfunctionExpr expr;
    double err;
  };
  std::vector<Member> kept;
  for (auto& pr : dense_eigenpairs(fam.model->K)) {
    if (std::abs(pr.lambda.imag()) > 1e-8) {
      ++fam.rejected_complex;
      continue;
    }
    if (std::abs(pr.lambda - 1.0) <= 1e-6 || pr.lambda.real() <= 0.0) continue;  // constant mode, or no flow log
    Eigenpair rp = pr;
    rp.lambda = cplx(pr.lambda.real(), 0.0);
    EigenfunctionExpr e = normalize_on(expr_from_left(dict, rp), pts);
    double err = trajectory_error(e, gf, 1).value;
    if (!(err <= opt.spurious_threshold)) {
      ++fam.rejected_spurious;
      continue;
    }
    const auto& w = e.factors()[0].base->weights;
    CVec grad = dict.jacobian(anchor).transpose().cast<cplx>() * w;
    double gn = grad.norm();
    if (!(gn > 0.0)) {
      ++fam.rejected_spurious;
      continue;
    }
    CVec wp = w * (opt.slope / gn);
    double mult = fam.time_reversed ? 1.0 / rp.lambda.real() : rp.lambda.real();
    kept.push_back({std::abs(std::log(mult)), EigenfunctionExpr::from_weights(dict, wp, mult), err});
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Member& a, const Member& b) { return a.key < b.key; });
  for (std::size_t i = 0; i < kept.size(); ++i) {
    fam.members.push_back(kept[i].expr);
    fam.member_errors.push_back(kept[i].err);
  }
  std::ostringstream os;
  os << fam.members.size() << " members kept, " << fam.rejected_complex << " complex and "
     << fam.rejected_spurious << " spurious eigenfunctions rejected";
  fam.diagnostics = os.str();
  return fam;
}

LocalFamily analytic_family(const BenchmarkSystem& sys, const Vec& anchor, const std::vector<std::string>& names,
                            double dt) {
  LocalFamily fam;
  fam.anchor = anchor;
  fam.box_lo = sys.sample_lo;
  fam.box_hi = sys.sample_hi;
  for (auto& n : names) {
    fam.members.push_back(EigenfunctionExpr::from_analytic(sys.eigenfunction(n), dt));
    fam.member_errors.push_back(0.0);
  }
  fam.diagnostics = "closed-form members";
  return fam;
}

namespace {

double log_abs(const FieldValue& v) {
  if (v.singular) return NAN;
  double m = std::abs(v.value);
  return m > 0.0 ? std::log(m) : NAN;
}

double rel_rms(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : INFINITY;
}

}  // namespace

BridgeMap fit_bridge(const EigenfunctionExpr& left, const EigenfunctionExpr& right, double window_lo,
                     double window_hi, double tikhonov, int samples) {
  if (!(window_hi > window_lo)) fail(ErrorKind::Config, "bridge window must have positive length");
  if (tikhonov < 0.0) fail(ErrorKind::Config, "Tikhonov weight must be nonnegative");
  if (samples < 2) fail(ErrorKind::Config, "bridge needs at least two samples");
  std::vector<Vec> pts;
  for (int i = 0; i < samples; ++i)
    pts.push_back(Vec::Constant(1, window_lo + (window_hi - window_lo) * i / (samples - 1)));
  auto lv = left.eval_points(pts), rv = right.eval_points(pts);
  std::vector<double> l, r;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double a = log_abs(lv[i]), b = log_abs(rv[i]);
    if (std::isfinite(a) && std::isfinite(b)) {
      l.push_back(a);
      r.push_back(b);
    }
  }
  if (l.empty()) fail(ErrorKind::EmptySupport, "both eigenfunctions are never regular and nonzero on the window");

  BridgeMap m;
  m.window_lo = window_lo;
  m.window_hi = window_hi;
  m.tikhonov = tikhonov;
  m.samples = pts.size();
  m.masked = pts.size() - l.size();
  double ll = 0.0, rr = 0.0, lr = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    ll += l[i] * l[i];
    rr += r[i] * r[i];
    lr += l[i] * r[i];
  }
  if (ll + tikhonov == 0.0 || rr + tikhonov == 0.0)
    fail(ErrorKind::Singular, "log field vanishes on the window; the map is undetermined");
  m.c_forward = lr / (ll + tikhonov);
  m.c_backward = lr / (rr + tikhonov);

  std::vector<double> fr, bl, mf, mb, al, ar;
  double sf = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    sf += std::pow(m.c_forward * l[i] - r[i], 2);
    sb += std::pow(m.c_backward * r[i] - l[i], 2);
    mf.push_back(std::exp(m.c_forward * l[i]));
    ar.push_back(std::exp(r[i]));
    mb.push_back(std::exp(m.c_backward * r[i]));
    al.push_back(std::exp(l[i]));
  }
  double n = static_cast<double>(l.size());
  m.residual_forward = std::sqrt(sf / n);
  m.residual_backward = std::sqrt(sb / n);
  m.overlap_forward = rel_rms(mf, ar);
  m.overlap_backward = rel_rms(mb, al);
  return m;
}

BridgeMap fit_bridge(const LocalFamily& left, const LocalFamily& right, double window_lo, double window_hi,
                     double tikhonov, std::size_t left_index, std::size_t right_index) {
  if (left_index >= left.members.size() || right_index >= right.members.size())
    fail(ErrorKind::EmptySupport, "selected family member does not exist (" + left.diagnostics + "; " +
                                      right.diagnostics + ")");
  if (left.anchor.size() != 1) fail(ErrorKind::Unsupported, "bridging is implemented for one-dimensional systems");
  double a = std::min(left.anchor[0], right.anchor[0]), b = std::max(left.anchor[0], right.anchor[0]);
  if (!(window_lo > a && window_hi < b)) fail(ErrorKind::Config, "bridge window must lie strictly between the anchors");
  BridgeMap m = fit_bridge(left.members[left_index], right.members[right_index], window_lo, window_hi, tikhonov);
  m.left_index = left_index;
  m.right_index = right_index;
  return m;
}

std::vector<FieldValue> continue_across(const EigenfunctionExpr& partner, double c, const std::vector<Vec>& points) {
  auto v = partner.eval_points(points);
  std::vector<FieldValue> out(points.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double lg = log_abs(v[i]);
    double val = std::exp(c * lg);
    out[i] = std::isfinite(lg) && std::isfinite(val) ? FieldValue::regular(val) : FieldValue::singular_point();
  }
  return out;
}

double relative_magnitude_error(const std::vector<FieldValue>& a, const std::vector<FieldValue>& b) {
  if (a.size() != b.size()) fail(ErrorKind::Contract, "fields differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].singular || b[i].singular) continue;
    x.push_back(std::abs(a[i].value));
    y.push_back(std::abs(b[i].value));
  }
  if (x.empty()) fail(ErrorKind::EmptySupport, "no regular points to compare");
  return rel_rms(x, y);
}

json bridge_to_json(const BridgeMap& m) {
  return {{"c_forward", m.c_forward},
          {"c_backward", m.c_backward},
          {"residuals", {m.residual_forward, m.residual_backward}},
          {"overlap_errors", {m.overlap_forward, m.overlap_backward}},
          {"window", {m.window_lo, m.window_hi}},
          {"tikhonov", m.tikhonov},
          {"member_indices", {m.left_index, m.right_index}},
          {"samples", m.samples},
          {"masked", m.masked}};
}

}  // namespace koopal
