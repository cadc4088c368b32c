#include "koopal/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace koopal {

using nlohmann::json;

namespace {

Vec random_unit(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v / v.norm();
}

void require_square(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) fail(ErrorKind::Contract, "matrix must be square and non-empty");
  if (!A.allFinite()) fail(ErrorKind::Contract, "matrix has non-finite entries");
}

}  // namespace

PowerResult power_iteration(const Mat& A, double tol, int max_iter, std::uint64_t seed) {
  require_square(A);
  Vec v = random_unit(A.rows(), seed);
  const double anorm = A.norm();
  double lambda = 0.0, prev = std::numeric_limits<double>::quiet_NaN();
  Eigen2d last_ritz{};
  bool have_ritz = false;
  for (int k = 1; k <= max_iter; ++k) {
    Vec y = A * v;
    double ny = y.norm();
    lambda = v.dot(y);
    if (ny == 0.0) return {0.0, v, k};
    if (std::abs(lambda - prev) < tol && (y - lambda * v).norm() <= std::sqrt(tol) * anorm) return {lambda, v, k};
    prev = lambda;
    v = y / ny;
    if (k % 1000 == 0) {
      // A stable complex Ritz pair on span{v, Av} means the iteration is rotating.
      Vec y2 = A * v;
      Vec q = y2 - v.dot(y2) * v;
      if (q.norm() > 1e-12 * y2.norm()) {
        Mat V(v.size(), 2);
        V.col(0) = v;
        V.col(1) = q / q.norm();
        Eigen2d r = eigen2d(V.transpose() * A * V);
        if (std::abs(r.lambda1.imag()) > 1e-8 * std::abs(r.lambda1)) {
          if (have_ritz && std::abs(r.lambda1 - last_ritz.lambda1) < 1e-6 * std::abs(r.lambda1)) {
            std::ostringstream os;
            os << "power iteration oscillates; dominant pair near " << r.lambda1.real() << " +/- "
               << std::abs(r.lambda1.imag()) << "i";
            fail(ErrorKind::ComplexPair, os.str());
          }
          last_ritz = r;
          have_ritz = true;
        }
      }
    }
  }
  std::ostringstream os;
  os << "power iteration did not converge in " << max_iter << " steps (last estimate " << lambda << ")";
  fail(ErrorKind::Convergence, os.str());
}

Eigen2d eigen2d(const Mat& h) {
  if (h.rows() != 2 || h.cols() != 2) fail(ErrorKind::Contract, "eigen2d needs a 2x2 matrix");
  double a = h(0, 0), b = h(0, 1), c = h(1, 0), d = h(1, 1);
  double half_tr = 0.5 * (a + d);
  double det = a * d - b * c;
  // Discriminant in a form that avoids cancellation for nearly equal diagonals.
  double hd = 0.5 * (a - d);
  double disc = hd * hd + b * c;
  double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d), 1e-300});
  Eigen2d out;
  if (disc >= 0.0) {
    double s = std::sqrt(disc);
    double q = half_tr + (half_tr >= 0.0 ? s : -s);
    double l1 = q, l2 = q != 0.0 ? det / q : half_tr - (half_tr >= 0.0 ? s : -s);
    if (std::abs(l2) > std::abs(l1)) std::swap(l1, l2);
    out.lambda1 = cplx(l1, 0.0);
    out.lambda2 = cplx(l2, 0.0);
  } else {
    double s = std::sqrt(-disc);
    out.lambda1 = cplx(half_tr, s);
    out.lambda2 = cplx(half_tr, -s);
  }
  bool scalar = std::abs(b) <= 1e-14 * scale && std::abs(c) <= 1e-14 * scale;
  out.defective = std::abs(disc) <= 1e-14 * scale * scale && !scalar;
  return out;
}

CVec eigvector2d(const Mat& h, cplx lambda) {
  if (h.rows() != 2 || h.cols() != 2) fail(ErrorKind::Contract, "eigvector2d needs a 2x2 matrix");
  // Each row of (h - lambda I) is orthogonal to the eigenvector; use the larger one.
  CVec r1(2), r2(2);
  r1 << cplx(h(0, 1)), lambda - h(0, 0);
  r2 << lambda - h(1, 1), cplx(h(1, 0));
  CVec v = r1.norm() >= r2.norm() ? r1 : r2;
  if (v.norm() == 0.0) {
    v << 1.0, 0.0;
  }
  return v / v.norm();
}

Eigenpair power_iteration_complex(const Mat& A, const ComplexPowerOptions& opt) {
  require_square(A);
  const Eigen::Index n = A.rows();
  const double anorm = A.norm();
  const double breakdown = 1e-14 * std::max(anorm, 1e-300);
  Vec x = random_unit(n, opt.seed);
  if (n == 1) {
    Eigenpair p;
    p.lambda = A(0, 0);
    p.right = CVec::Ones(1);
    return p;
  }
  for (int k = 0; k < opt.warm_start; ++k) {
    Vec y = A * x;
    double ny = y.norm();
    if (ny <= breakdown) fail(ErrorKind::KrylovBreakdown, "power iterate vanished during warm start");
    x = y / ny;
  }
  cplx lambda_old(std::numeric_limits<double>::quiet_NaN(), 0.0);
  Eigenpair best;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Vec y = A * x;
    double ny = y.norm();
    if (ny <= breakdown) fail(ErrorKind::KrylovBreakdown, "Krylov vector vanished");
    Vec q = y - x.dot(y) * x;
    q -= x.dot(q) * x;  // second Gram-Schmidt pass
    double nq = q.norm();
    Eigenpair p;
    p.iterations = it;
    if (nq <= 1e-14 * ny) {
      // x is already an eigenvector to working precision.
      p.lambda = cplx(x.dot(y), 0.0);
      p.right = x.cast<cplx>();
    } else {
      Mat V(n, 2);
      V.col(0) = x;
      V.col(1) = q / nq;
      Mat h = V.transpose() * A * V;
      Eigen2d e = eigen2d(h);
      p.lambda = e.lambda1;  // largest modulus; positive imaginary part on ties
      p.defective = e.defective;
      CVec w = eigvector2d(h, p.lambda);
      p.right = V.cast<cplx>() * w;
      p.right /= p.right.norm();
    }
    double res = (A.cast<cplx>() * p.right - p.lambda * p.right).norm();
    if (res <= opt.tol * std::max(anorm, 1e-300) ||
        (std::abs(p.lambda - lambda_old) < opt.tol * 1e-3 * std::max(anorm, 1e-300) && res <= 1e3 * opt.tol * anorm)) {
      return p;
    }
    lambda_old = p.lambda;
    best = p;
    x = y / ny;
  }
  std::ostringstream os;
  os << "complex power iteration did not converge in " << opt.max_iter << " steps (last estimate "
     << best.lambda.real() << (best.lambda.imag() >= 0 ? "+" : "") << best.lambda.imag() << "i)";
  fail(ErrorKind::Convergence, os.str());
}

bool spectrum_order(cplx a, cplx b) {
  double ma = std::abs(a), mb = std::abs(b);
  double sc = std::max({ma, mb, 1e-300});
  if (std::abs(ma - mb) > 1e-12 * sc) return ma > mb;
  if (std::abs(a.real() - b.real()) > 1e-12 * sc) return a.real() > b.real();
  return a.imag() > b.imag();
}

void sort_spectrum(std::vector<Eigenpair>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Eigenpair& a, const Eigenpair& b) { return spectrum_order(a.lambda, b.lambda); });
}

namespace {

void phase_fix(CVec& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  cplx ph = v[idx] / std::abs(v[idx]);
  v *= std::conj(ph);
  v[idx] = cplx(v[idx].real(), 0.0);
}

}  // namespace

void normalize_pair(Eigenpair& p) {
  if (p.right.size()) {
    p.right /= p.right.norm();
    phase_fix(p.right);
  }
  if (p.left.size()) {
    if (p.right.size()) {
      cplx s = p.left.transpose() * p.right;
      p.left /= s;
    } else {
      p.left /= p.left.norm();
      phase_fix(p.left);
    }
  }
}

std::array<double, 2> eigen_residuals(const Mat& A, const Eigenpair& p) {
  std::array<double, 2> r{0.0, 0.0};
  CMat Ac = A.cast<cplx>();
  if (p.right.size()) r[0] = (Ac * p.right - p.lambda * p.right).norm() / p.right.norm();
  if (p.left.size()) r[1] = (Ac.transpose() * p.left - p.lambda * p.left).norm() / p.left.norm();
  return r;
}

namespace {

// Inverse iteration with a two-sided Rayleigh quotient on the original matrix.
bool refine_pair(const Mat& A0, Eigenpair& p, int steps) {
  const Eigen::Index n = A0.rows();
  CMat Ac = A0.cast<cplx>();
  CVec v = p.right / p.right.norm(), w = p.left / p.left.norm();
  cplx lambda = p.lambda;
  for (int s = 0; s < steps; ++s) {
    CMat M = Ac - lambda * CMat::Identity(n, n);
    Eigen::PartialPivLU<CMat> lu(M);
    CVec v2 = lu.solve(v);
    CVec w2 = lu.transpose().solve(w);
    if (!v2.allFinite() || !w2.allFinite() || v2.norm() == 0.0 || w2.norm() == 0.0) break;
    v = v2 / v2.norm();
    w = w2 / w2.norm();
    cplx den = w.transpose() * v;
    if (std::abs(den) < 1e-300) break;
    cplx num = w.transpose() * (Ac * v);
    lambda = num / den;
  }
  double scale = std::max(1.0, std::abs(p.lambda));
  if (std::abs(lambda - p.lambda) > 1e-6 * scale) return false;
  Eigenpair q = p;
  q.lambda = lambda;
  q.right = v;
  q.left = w;
  auto before = eigen_residuals(A0, p);
  auto after = eigen_residuals(A0, q);
  if (after[0] + after[1] <= before[0] + before[1]) {
    p = q;
    return true;
  }
  return false;
}

CVec inverse_iteration_left(const Mat& A, cplx lambda, std::uint64_t seed) {
  const Eigen::Index n = A.rows();
  CMat M = A.transpose().cast<cplx>() - lambda * CMat::Identity(n, n);
  Eigen::PartialPivLU<CMat> lu(M);
  CVec w = random_unit(n, seed).cast<cplx>();
  for (int s = 0; s < 4; ++s) {
    CVec w2 = lu.solve(w);
    if (!w2.allFinite() || w2.norm() == 0.0) break;
    w = w2 / w2.norm();
  }
  return w;
}

}  // namespace

std::vector<Eigenpair> deflation_step(Mat& work, const Mat& original, const DeflationOptions& opt,
                                      int index) {
  ComplexPowerOptions po = opt.power;
  po.seed = opt.power.seed + 2 * static_cast<std::uint64_t>(index);
  Eigenpair right = power_iteration_complex(work, po);
  po.seed += 1;
  Mat wt = work.transpose();
  Eigenpair leftp = power_iteration_complex(wt, po);

  Eigenpair p;
  p.lambda = right.lambda;
  p.right = right.right;
  p.iterations = right.iterations + leftp.iterations;
  p.defective = right.defective;
  double scale = std::max(std::abs(p.lambda), 1e-300);
  if (std::abs(leftp.lambda - p.lambda) <= opt.pairing_tol * scale) {
    p.left = leftp.right;
  } else if (std::abs(std::conj(leftp.lambda) - p.lambda) <= opt.pairing_tol * scale) {
    p.left = leftp.right.conjugate();
  } else {
    // The transposed iteration settled on a different eigenvalue of equal modulus.
    p.left = inverse_iteration_left(work, p.lambda, po.seed + 7919);
  }
  cplx overlap = (p.left / p.left.norm()).transpose() * (p.right / p.right.norm());
  // A defective 2x2 Ritz block leaves |w^T v| at the square root of roundoff,
  // so the looser threshold applies there.
  if (std::abs(overlap) < 1e-12 || (p.defective && std::abs(overlap) < 1e-6)) {
    std::ostringstream os;
    os << "left and right eigenvectors are nearly orthogonal (|w^T v| = " << std::abs(overlap)
       << ") for eigenvalue " << p.lambda.real() << (p.lambda.imag() >= 0 ? "+" : "") << p.lambda.imag() << "i";
    fail(ErrorKind::NearDefective, os.str());
  }
  if (opt.refine) refine_pair(original, p, opt.refine_steps);
  normalize_pair(p);

  std::vector<Eigenpair> out{p};
  CMat rank1 = p.lambda * (p.right * p.left.transpose());
  if (p.lambda.imag() > 1e-6) {
    Eigenpair c;
    c.lambda = std::conj(p.lambda);
    c.right = p.right.conjugate();
    c.left = p.left.conjugate();
    c.iterations = p.iterations;
    c.defective = p.defective;
    out.push_back(c);
    work -= 2.0 * rank1.real();
  } else {
    work -= rank1.real();
  }
  return out;
}

std::vector<Eigenpair> deflate_spectrum(const Mat& A, int n_pairs, const DeflationOptions& opt) {
  require_square(A);
  if (n_pairs < 0 || n_pairs > A.rows()) fail(ErrorKind::Config, "requested more eigenpairs than the dimension");
  Mat work = A;
  std::vector<Eigenpair> out;
  int index = 0;
  while (static_cast<int>(out.size()) < n_pairs) {
    auto step = deflation_step(work, A, opt, index++);
    for (auto& p : step)
      if (static_cast<int>(out.size()) < n_pairs) out.push_back(std::move(p));
  }
  sort_spectrum(out);
  return out;
}

Mat qr_iteration(const Mat& A, int n_steps) {
  require_square(A);
  Mat T = A;
  for (int k = 0; k < n_steps; ++k) {
    Eigen::HouseholderQR<Mat> qr(T);
    Mat Q = qr.householderQ();
    Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    T = R * Q;
  }
  return T;
}

namespace {

// Returns false while some 2x2 block still couples to a neighbour.
bool read_blocks(const Mat& T, double thr, std::vector<cplx>& ev) {
  ev.clear();
  const Eigen::Index n = T.rows();
  bool clean = true;
  Eigen::Index i = 0;
  while (i < n) {
    if (i + 1 < n && std::abs(T(i + 1, i)) > thr) {
      if (i + 2 < n && std::abs(T(i + 2, i + 1)) > thr) clean = false;
      Eigen2d e = eigen2d(T.block(i, i, 2, 2));
      ev.push_back(e.lambda1);
      ev.push_back(e.lambda2);
      i += 2;
    } else {
      ev.push_back(cplx(T(i, i), 0.0));
      i += 1;
    }
  }
  return clean;
}

}  // namespace

std::vector<cplx> qr_eigenvalues(const Mat& A, int max_steps, double tol) {
  require_square(A);
  Mat T = A;
  const double thr = tol * std::max(A.norm(), 1e-300);
  std::vector<cplx> ev, prev;
  for (int k = 0; k <= max_steps; k += 5) {
    bool clean = read_blocks(T, thr, ev);
    if (clean && !prev.empty() && prev.size() == ev.size()) {
      double change = 0.0;
      for (std::size_t i = 0; i < ev.size(); ++i) change = std::max(change, std::abs(ev[i] - prev[i]));
      if (change <= thr) {
        std::sort(ev.begin(), ev.end(), spectrum_order);
        return ev;
      }
    }
    prev = ev;
    T = qr_iteration(T, 5);
  }
  fail(ErrorKind::Convergence, "QR iteration did not settle");
}

std::vector<Eigenpair> dense_eigenpairs(const Mat& A) {
  require_square(A);
  Eigen::EigenSolver<Mat> er(A), el(A.transpose());
  if (er.info() != Eigen::Success || el.info() != Eigen::Success)
    fail(ErrorKind::Convergence, "dense eigensolver failed");
  const Eigen::Index n = A.rows();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::vector<Eigenpair> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx l = er.eigenvalues()[i];
    Eigen::Index best = -1;
    double bd = INFINITY;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      double d = std::abs(el.eigenvalues()[j] - l);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    Eigenpair p;
    p.lambda = l;
    p.right = er.eigenvectors().col(i);
    p.left = el.eigenvectors().col(best);
    cplx overlap = (p.left / p.left.norm()).transpose() * (p.right / p.right.norm());
    if (std::abs(overlap) < 1e-12) p.defective = true;
    else normalize_pair(p);
    out.push_back(std::move(p));
  }
  sort_spectrum(out);
  return out;
}

json spectrum_to_json(const Mat& A, const std::vector<Eigenpair>& pairs) {
  json arr = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto r = eigen_residuals(A, p);
    arr.push_back({{"index", i},
                   {"re", p.lambda.real()},
                   {"im", p.lambda.imag()},
                   {"modulus", std::abs(p.lambda)},
                   {"residual", std::max(r[0], r[1])},
                   {"residual_right", r[0]},
                   {"residual_left", r[1]},
                   {"iterations", p.iterations},
                   {"defective", p.defective}});
  }
  return {{"dimension", A.rows()}, {"eigenpairs", arr}};
}

}  // namespace koopal
