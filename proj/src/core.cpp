#include "koopal/core.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace koopal {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Config: return "config";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::NearDefective: return "near-defective";
    case ErrorKind::KrylovBreakdown: return "krylov-breakdown";
    case ErrorKind::ComplexPair: return "complex-pair-suspected";
    case ErrorKind::EmptySupport: return "empty-support";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* to_string(BoundKind kind) {
  return kind == BoundKind::Integration ? "integration" : "eigenvector";
}

namespace {

std::size_t axis_count(double lo, double hi, double h) {
  // Tolerate (hi - lo)/h landing a hair below an integer.
  double n = std::floor((hi - lo) / h + 1e-9);
  return static_cast<std::size_t>(n) + 1;
}

}  // namespace

EvalGrid::EvalGrid(Vec lo, Vec hi, double h) : lo_(std::move(lo)), hi_(std::move(hi)), h_(h) {
  if (lo_.size() == 0 || lo_.size() != hi_.size())
    fail(ErrorKind::Config, "grid bounds must be non-empty and of equal dimension");
  if (!(h > 0.0 && h < 1.0))
    fail(ErrorKind::Config, "grid spacing must lie in (0, 1)");
  total_ = 1;
  for (Eigen::Index k = 0; k < lo_.size(); ++k) {
    if (!std::isfinite(lo_[k]) || !std::isfinite(hi_[k]) || !(lo_[k] <= hi_[k]))
      fail(ErrorKind::Config, "grid bounds must satisfy lo <= hi");
    counts_.push_back(axis_count(lo_[k], hi_[k], h_));
    total_ *= counts_.back();
  }
}

EvalGrid::EvalGrid(double lo, double hi, double h, int dim)
    : EvalGrid(Vec::Constant(dim, lo), Vec::Constant(dim, hi), h) {}

Vec EvalGrid::point(std::size_t index) const {
  if (index >= total_) fail(ErrorKind::Contract, "grid index out of range");
  Vec x(lo_.size());
  for (Eigen::Index k = lo_.size() - 1; k >= 0; --k) {
    std::size_t c = counts_[static_cast<std::size_t>(k)];
    std::size_t n = index % c;
    index /= c;
    x[k] = lo_[k] + static_cast<double>(n) * h_;
  }
  return x;
}

std::vector<Vec> EvalGrid::points() const {
  std::vector<Vec> out;
  out.reserve(total_);
  for (std::size_t i = 0; i < total_; ++i) out.push_back(point(i));
  return out;
}

namespace {

double pairwise_impl(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t m = n / 2;
  return pairwise_impl(x, m) + pairwise_impl(x + m, n - m);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) { return pairwise_impl(xs.data(), xs.size()); }

double kahan_sum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

double rms(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::EmptySupport, "norm of an empty sample");
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = values[i] * values[i];
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size()));
}

double rms(std::span<const cplx> values) {
  if (values.empty()) fail(ErrorKind::EmptySupport, "norm of an empty sample");
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = std::norm(values[i]);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size()));
}

double grid_norm(std::span<const double> values, const EvalGrid& grid) {
  if (values.size() != grid.size()) {
    std::ostringstream os;
    os << "grid norm: " << values.size() << " values for " << grid.size() << " grid points";
    fail(ErrorKind::Contract, os.str());
  }
  return rms(values);
}

double grid_norm(std::span<const cplx> values, const EvalGrid& grid) {
  if (values.size() != grid.size()) {
    std::ostringstream os;
    os << "grid norm: " << values.size() << " values for " << grid.size() << " grid points";
    fail(ErrorKind::Contract, os.str());
  }
  return rms(values);
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  double r = std::remainder(a, 2.0 * pi);  // [-pi, pi]
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

cplx principal_log(cplx z) {
  if (z == cplx(0.0, 0.0)) fail(ErrorKind::Singular, "logarithm of zero");
  double a = std::arg(z);
  if (a <= -std::numbers::pi) a = std::numbers::pi;  // -1 - 0i still maps to i*pi
  return {std::log(std::abs(z)), a};
}

cplx principal_pow(cplx z, double alpha) {
  if (z == cplx(0.0, 0.0)) {
    if (alpha > 0.0) return {0.0, 0.0};
    fail(ErrorKind::Singular, "non-positive power of zero");
  }
  return std::exp(alpha * principal_log(z));
}

cplx int_pow(cplx z, int m) {
  if (m == 0) return {1.0, 0.0};
  if (m < 0) {
    if (z == cplx(0.0, 0.0)) fail(ErrorKind::Singular, "negative power of zero");
    return cplx(1.0, 0.0) / int_pow(z, -m);
  }
  cplx r(1.0, 0.0);
  for (int i = 0; i < m; ++i) r *= z;
  return r;
}

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int t = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), std::max<std::size_t>(n, 1));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace koopal
