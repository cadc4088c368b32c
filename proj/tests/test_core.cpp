#include <doctest.h>

#include "koopal/core.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace koopal;

TEST_CASE("grid enumerates row-major with the last dimension fastest") {
  EvalGrid g(-1.0, 1.0, 0.01, 2);
  CHECK(g.size() == 201u * 201u);
  Vec p0 = g.point(0), p1 = g.point(1), plast = g.point(g.size() - 1);
  CHECK(p0[0] == doctest::Approx(-1.0));
  CHECK(p0[1] == doctest::Approx(-1.0));
  CHECK(p1[0] == doctest::Approx(-1.0));
  CHECK(p1[1] == doctest::Approx(-0.99));
  CHECK(plast[0] == doctest::Approx(1.0));
  CHECK(plast[1] == doctest::Approx(1.0));
  Vec p201 = g.point(201);
  CHECK(p201[0] == doctest::Approx(-0.99));
  CHECK(p201[1] == doctest::Approx(-1.0));
}

TEST_CASE("grid count floors the last partial step") {
  EvalGrid g(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), 0.3);
  CHECK(g.size() == 4u);  // 0, 0.3, 0.6, 0.9
  CHECK_THROWS_AS(EvalGrid(0.0, 1.0, 1.5, 1), Error);
  CHECK_THROWS_AS(EvalGrid(0.0, 1.0, 0.0, 1), Error);
  CHECK_THROWS_AS(EvalGrid(1.0, 0.0, 0.1, 1), Error);
}

TEST_CASE("grid norm of a hand example") {
  EvalGrid g(0.0, 0.3, 0.1, 1);
  REQUIRE(g.size() == 4u);
  std::vector<double> v{1, 2, 2, 1};
  CHECK(grid_norm(v, g) == doctest::Approx(std::sqrt(10.0 / 4.0)).epsilon(1e-15));
  std::vector<double> short_v{1, 2, 2};
  try {
    grid_norm(short_v, g);
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
}

TEST_CASE("grid norm is homogeneous and uses the complex modulus") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  EvalGrid g(0.0, 0.99, 0.01, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<cplx> v(g.size());
    for (auto& z : v) z = {n01(rng), n01(rng)};
    cplx c(n01(rng), n01(rng));
    std::vector<cplx> cv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) cv[i] = c * v[i];
    CHECK(grid_norm(cv, g) == doctest::Approx(std::abs(c) * grid_norm(v, g)).epsilon(1e-13));
  }
}

TEST_CASE("principal log and power") {
  cplx l = principal_log(cplx(-1.0, 0.0));
  CHECK(l.real() == doctest::Approx(0.0));
  CHECK(l.imag() == doctest::Approx(std::numbers::pi));
  cplx lneg0 = principal_log(cplx(-1.0, -0.0));
  CHECK(lneg0.imag() == doctest::Approx(std::numbers::pi));
  try {
    principal_log(cplx(0.0, 0.0));
    FAIL("expected singular");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Singular);
  }
  CHECK(principal_pow(cplx(0.0, 0.0), 0.5) == cplx(0.0, 0.0));
  CHECK_THROWS_AS(principal_pow(cplx(0.0, 0.0), 0.0), Error);
  CHECK_THROWS_AS(principal_pow(cplx(0.0, 0.0), -1.0), Error);
  cplx s = principal_pow(cplx(-4.0, 0.0), 0.5);
  CHECK(s.real() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.imag() == doctest::Approx(2.0));
}

TEST_CASE("a fractional power of exp(4ix) is not exp(2ix) once 4x leaves the principal strip") {
  // 4x = 4 rad lies outside (-pi, pi]; its principal argument is 4 - 2 pi, so
  // the half power is exp(i(2 - pi)) = -exp(2i).
  double x = 1.0;
  cplx e3 = principal_pow(std::exp(cplx(0.0, 4.0 * x)), 0.5);
  cplx e1 = std::exp(cplx(0.0, 2.0 * x));
  CHECK(std::abs(e3 - e1) > 1.0);
  CHECK(std::abs(e3 + e1) < 1e-14);
  // Inside the strip the identities agree.
  x = 0.5;
  e3 = principal_pow(std::exp(cplx(0.0, 4.0 * x)), 0.5);
  CHECK(std::abs(e3 - std::exp(cplx(0.0, 2.0 * x))) < 1e-14);
}

TEST_CASE("property: exp(log z) recovers z over many decades") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lmag(std::log(1e-6), std::log(1e6));
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 2000; ++i) {
    cplx z = std::polar(std::exp(lmag(rng)), ang(rng));
    cplx back = std::exp(principal_log(z));
    CHECK(std::abs(back - z) <= 1e-12 * std::abs(z));
    double a = principal_log(z).imag();
    CHECK(a > -std::numbers::pi);
    CHECK(a <= std::numbers::pi);
  }
}

TEST_CASE("property: integer principal powers match repeated multiplication") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> m(-6, 6);
  for (int i = 0; i < 2000; ++i) {
    cplx z(u(rng), u(rng));
    if (std::abs(z) < 1e-3) continue;
    int k = m(rng);
    cplx rep(1.0, 0.0);
    for (int j = 0; j < std::abs(k); ++j) rep *= z;
    if (k < 0) rep = 1.0 / rep;
    cplx p = principal_pow(z, k);
    CHECK(std::abs(p - rep) <= 1e-10 * std::max(1.0, std::abs(rep)));
    CHECK(std::abs(int_pow(z, k) - rep) <= 1e-12 * std::max(1.0, std::abs(rep)));
  }
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3.0 * std::numbers::pi / 2.0) == doctest::Approx(-std::numbers::pi / 2.0));
}

TEST_CASE("pairwise summation keeps roundoff small") {
  std::vector<double> v(1'000'000, 0.1);
  double s = pairwise_sum(v);
  CHECK(std::abs(s - 100000.0) < 1e-8);
  CHECK(std::abs(kahan_sum(v) - 100000.0) < 1e-8);
}

TEST_CASE("counter uniforms are order independent and in [0, 1)") {
  double a = counter_uniform(42, 3, 9);
  double b = counter_uniform(42, 3, 9);
  CHECK(a == b);
  CHECK(counter_uniform(42, 3, 10) != a);
  CHECK(counter_uniform(43, 3, 9) != a);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double x = counter_uniform(1, 0, i);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("parallel_for fills every slot regardless of thread count") {
  std::vector<double> one(1000), many(1000);
  set_num_threads(1);
  parallel_for(one.size(), [&](std::size_t i) { one[i] = std::sin(double(i)); });
  set_num_threads(4);
  parallel_for(many.size(), [&](std::size_t i) { many[i] = std::sin(double(i)); });
  set_num_threads(1);
  CHECK(one == many);
  set_num_threads(3);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 5) fail(ErrorKind::Internal, "boom");
                  }),
                  Error);
  set_num_threads(1);
}
