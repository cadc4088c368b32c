#include <doctest.h>

#include "koopal/eigensolve.hpp"

#include <cmath>
#include <random>

using namespace koopal;

namespace {

Mat rot_block(double modulus, double angle) {
  Mat b(2, 2);
  b << modulus * std::cos(angle), -modulus * std::sin(angle), modulus * std::sin(angle),
      modulus * std::cos(angle);
  return b;
}

Mat random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(M);
  return qr.householderQ();
}

// P B P^-1 with singular values of P in [1, 3].
Mat conjugate_by_well_conditioned(const Mat& B, std::mt19937_64& rng) {
  int n = static_cast<int>(B.rows());
  std::uniform_real_distribution<double> u(1.0, 3.0);
  Vec s(n);
  for (int i = 0; i < n; ++i) s[i] = u(rng);
  Mat P = random_orthogonal(n, rng) * s.asDiagonal() * random_orthogonal(n, rng).transpose();
  return P * B * P.inverse();
}

// Random test spectrum: moduli 2*0.8^k with random signs and some rotation blocks.
Mat random_spectrum_matrix(int n, std::mt19937_64& rng, std::vector<cplx>& expected) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat B = Mat::Zero(n, n);
  expected.clear();
  int i = 0, k = 0;
  while (i < n) {
    double mod = 2.0 * std::pow(0.8, k++);
    if (i + 1 < n && u(rng) < 0.4) {
      double ang = 0.3 + 2.5 * u(rng);
      B.block(i, i, 2, 2) = rot_block(mod, ang);
      expected.push_back(std::polar(mod, ang));
      expected.push_back(std::polar(mod, -ang));
      i += 2;
    } else {
      double sgn = u(rng) < 0.5 ? -1.0 : 1.0;
      B(i, i) = sgn * mod;
      expected.push_back(cplx(sgn * mod, 0.0));
      i += 1;
    }
  }
  std::sort(expected.begin(), expected.end(), spectrum_order);
  return conjugate_by_well_conditioned(B, rng);
}

}  // namespace

TEST_CASE("eigen2d closed form") {
  Mat h(2, 2);
  h << 1, 4, 1, 1;
  Eigen2d e = eigen2d(h);
  CHECK(e.lambda1.real() == doctest::Approx(3.0));
  CHECK(e.lambda2.real() == doctest::Approx(-1.0));
  CHECK(e.lambda1.imag() == 0.0);

  h << 0.5, -1, 1, 0.5;
  e = eigen2d(h);
  CHECK(e.lambda1.real() == doctest::Approx(0.5));
  CHECK(e.lambda1.imag() == doctest::Approx(1.0));
  CHECK(e.lambda2.imag() == doctest::Approx(-1.0));

  h << 1, 1, 0, 1;
  CHECK(eigen2d(h).defective);
  h << 2, 0, 0, 2;
  CHECK_FALSE(eigen2d(h).defective);

  // Tiny eigenvalue next to a large one keeps full relative accuracy.
  h << 1e8, 1, 0, 1e-8;
  e = eigen2d(h);
  CHECK(e.lambda2.real() == doctest::Approx(1e-8).epsilon(1e-12));
}

TEST_CASE("eigvector2d satisfies the eigen relation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    Mat h(2, 2);
    h << g(rng), g(rng), g(rng), g(rng);
    Eigen2d e = eigen2d(h);
    for (cplx l : {e.lambda1, e.lambda2}) {
      CVec v = eigvector2d(h, l);
      CHECK((h.cast<cplx>() * v - l * v).norm() <= 1e-12 * (1 + h.norm()));
    }
  }
}

TEST_CASE("real power iteration") {
  Mat A = Vec::LinSpaced(3, 3.0, 0.5).asDiagonal();
  PowerResult r = power_iteration(A, 1e-12, 100000, 1);
  CHECK(r.lambda == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::abs(r.vector[0]) == doctest::Approx(1.0).epsilon(1e-5));

  Mat R = rot_block(2.0, 0.7);
  try {
    power_iteration(R, 1e-10, 20000, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ComplexPair);
  }

  // +-2 share the top modulus: no complex pair, just no convergence.
  Mat D = Vec::LinSpaced(2, 2.0, -2.0).asDiagonal();
  try {
    power_iteration(D, 1e-10, 5000, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Convergence);
  }
}

TEST_CASE("Krylov power iteration finds a dominant complex pair") {
  double th = 0.3;
  Mat C = Mat::Zero(3, 3);
  C(0, 0) = 2 * std::cos(th);
  C(0, 1) = -1;
  C(1, 0) = 1;
  C(2, 2) = 0.5;
  Eigenpair p = power_iteration_complex(C);
  CHECK(std::abs(p.lambda - std::polar(1.0, th)) <= 1e-9);
  CHECK(eigen_residuals(C, p)[0] <= 1e-9 * C.norm());

  Mat H(2, 2);
  H << 0.5, -1, 1, 0.5;
  p = power_iteration_complex(H);
  CHECK(std::abs(p.lambda - cplx(0.5, 1.0)) <= 1e-12);

  Mat Z = Mat::Zero(3, 3);
  Z(0, 1) = 1.0;  // nilpotent
  CHECK_THROWS_AS(power_iteration_complex(Z), Error);
}

TEST_CASE("deflation recovers a 6x6 spectrum with mixed pairs") {
  Mat B = Mat::Zero(6, 6);
  B.block(0, 0, 2, 2) = rot_block(2.0, 1.1);
  B(2, 2) = -1.5;
  B.block(3, 3, 2, 2) = rot_block(1.2, 0.4);
  B(5, 5) = 0.6;
  std::mt19937_64 rng(11);
  Mat A = conjugate_by_well_conditioned(B, rng);
  auto pairs = deflate_spectrum(A, 6);
  REQUIRE(pairs.size() == 6);
  std::vector<cplx> want{std::polar(2.0, 1.1), std::polar(2.0, -1.1), cplx(-1.5, 0),
                         std::polar(1.2, 0.4), std::polar(1.2, -0.4), cplx(0.6, 0)};
  for (std::size_t i = 0; i < 6; ++i) {
    INFO(i);
    CHECK(std::abs(pairs[i].lambda - want[i]) <= 1e-8);
    auto r = eigen_residuals(A, pairs[i]);
    CHECK(r[0] <= 1e-8 * A.norm());
    CHECK(r[1] <= 1e-8 * A.norm());
    cplx wv = pairs[i].left.transpose() * pairs[i].right;
    CHECK(std::abs(wv - 1.0) <= 1e-10);
    CHECK(pairs[i].right.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("deflation and QR agree with the constructed spectrum on random matrices") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 3 + trial % 8;
    std::vector<cplx> expected;
    Mat A = random_spectrum_matrix(n, rng, expected);
    INFO("trial " << trial << " n " << n);
    auto pairs = deflate_spectrum(A, n);
    auto qr = qr_eigenvalues(A);
    REQUIRE(qr.size() == expected.size());
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(pairs[i].lambda - expected[i]) <= 1e-8);
      CHECK(std::abs(qr[i] - expected[i]) <= 1e-8);
      auto r = eigen_residuals(A, pairs[i]);
      CHECK(std::max(r[0], r[1]) <= 1e-8 * A.norm());
    }
  }
}

TEST_CASE("nearly defective input is reported") {
  Mat J(2, 2);
  J << 1, 1, 0, 1;
  try {
    deflate_spectrum(J, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::NearDefective || e.kind() == ErrorKind::Convergence));
  }
}

TEST_CASE("dense solver matches deflation normalization and order") {
  std::mt19937_64 rng(5);
  std::vector<cplx> expected;
  Mat A = random_spectrum_matrix(7, rng, expected);
  auto d = dense_eigenpairs(A);
  auto p = deflate_spectrum(A, 7);
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(d[i].lambda - p[i].lambda) <= 1e-9);
    CHECK((d[i].right - p[i].right).norm() <= 1e-6);
    cplx wv = d[i].left.transpose() * d[i].right;
    CHECK(std::abs(wv - 1.0) <= 1e-10);
  }
}

TEST_CASE("spectrum ordering") {
  CHECK(spectrum_order(cplx(2, 0), cplx(1, 0)));
  CHECK(spectrum_order(cplx(1, 0), cplx(-1, 0)));
  CHECK(spectrum_order(cplx(0.6, 0.8), cplx(0.6, -0.8)));
  CHECK_FALSE(spectrum_order(cplx(0.6, -0.8), cplx(0.6, 0.8)));
}

TEST_CASE("QR iteration on a symmetric matrix") {
  Mat S(3, 3);
  S << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  auto ev = qr_eigenvalues(S);
  CHECK(ev[0].real() == doctest::Approx(2 + std::sqrt(2.0)).epsilon(1e-12));
  CHECK(ev[1].real() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ev[2].real() == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-12));
  Mat T = qr_iteration(S, 200);
  CHECK(std::abs(T(1, 0)) < 1e-10);
}

TEST_CASE("spectrum json") {
  Mat A = Vec::LinSpaced(2, 2.0, 1.0).asDiagonal();
  auto pairs = deflate_spectrum(A, 2);
  auto j = spectrum_to_json(A, pairs);
  CHECK(j["eigenpairs"].size() == 2);
  CHECK(j["eigenpairs"][0]["re"].get<double>() == doctest::Approx(2.0));
}
