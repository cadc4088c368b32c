#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace koopal {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class ErrorKind {
  Contract,
  Config,
  Singular,
  Domain,
  Divergence,
  Convergence,
  IllConditioned,
  NearDefective,
  KrylovBreakdown,
  ComplexPair,
  EmptySupport,
  Unsupported,
  Io,
  Internal,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this one type so callers can
// switch on the kind and still get a readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// A field value that may be undefined at a point (pole of a negatively
// powered base, outside a branch domain).
struct FieldValue {
  cplx value{0.0, 0.0};
  bool singular = false;

  static FieldValue regular(cplx v) { return {v, false}; }
  static FieldValue singular_point() { return {cplx(0.0, 0.0), true}; }
};

// Regular grid with spacing h in each dimension; points are lo + n*h inside
// [lo, hi], enumerated row-major with the last dimension fastest.
class EvalGrid {
 public:
  EvalGrid(Vec lo, Vec hi, double h);
  EvalGrid(double lo, double hi, double h, int dim);

  int dim() const { return static_cast<int>(lo_.size()); }
  std::size_t size() const { return total_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  double spacing() const { return h_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  Vec point(std::size_t index) const;
  std::vector<Vec> points() const;

 private:
  Vec lo_, hi_;
  double h_;
  std::vector<std::size_t> counts_;
  std::size_t total_;
};

double pairwise_sum(std::span<const double> xs);
double kahan_sum(std::span<const double> xs);

// sqrt(mean |v|^2) over the grid; the grid only fixes the expected length.
double grid_norm(std::span<const double> values, const EvalGrid& grid);
double grid_norm(std::span<const cplx> values, const EvalGrid& grid);
// Same norm without a grid, over whatever samples are supplied.
double rms(std::span<const double> values);
double rms(std::span<const cplx> values);

// Principal branch with arg in (-pi, pi].
cplx principal_log(cplx z);
cplx principal_pow(cplx z, double alpha);
cplx int_pow(cplx z, int m);
double wrap_angle(double a);  // into (-pi, pi]

enum class BoundKind { Integration, Eigenvector };
const char* to_string(BoundKind kind);

struct ErrorReport {
  int power = 1;
  double trajectory_error = 0.0;
  double bound = 0.0;
  BoundKind bound_kind = BoundKind::Eigenvector;
};

// Process-wide worker count used by parallel_for. Results never depend on it:
// every index writes its own slot and reductions happen afterwards in order.
void set_num_threads(int n);
int num_threads();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Counter-based generator: the value for (seed, stream, index) does not depend
// on evaluation order.
std::uint64_t splitmix64(std::uint64_t x);
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace koopal
