#pragma once

#include "koopal/core.hpp"

#include <json.hpp>

#include <array>

namespace koopal {

// Right vector v (A v = lambda v) and left vector w (w^T A = lambda w^T);
// either may be empty. When both are present, v has unit norm with its
// largest-modulus entry real positive, and w^T v = 1.
struct Eigenpair {
  cplx lambda{0.0, 0.0};
  CVec right;
  CVec left;
  int iterations = 0;
  bool defective = false;
};

struct PowerResult {
  double lambda = 0.0;
  Vec vector;
  int iterations = 0;
};

// Real power iteration with Rayleigh quotients. A dominant complex pair shows
// up as non-convergence and is reported as ComplexPair.
PowerResult power_iteration(const Mat& A, double tol = 1e-10, int max_iter = 100000,
                            std::uint64_t seed = 0);

struct Eigen2d {
  cplx lambda1, lambda2;  // descending modulus, positive imaginary part first
  bool defective = false;
};

// Closed-form spectrum of a 2x2 matrix using the cancellation-free quadratic formula.
Eigen2d eigen2d(const Mat& h);
// Unit right eigenvector of a 2x2 matrix for a given eigenvalue.
CVec eigvector2d(const Mat& h, cplx lambda);

struct ComplexPowerOptions {
  double tol = 1e-10;     // stop once |A v - lambda v| <= tol |A|_F
  int max_iter = 200000;
  int warm_start = 500;   // plain power steps before the Krylov loop
  std::uint64_t seed = 0;
};

// Power iteration with a two-dimensional Krylov projection each step, so a
// dominant complex conjugate pair converges too. Returns the right vector.
Eigenpair power_iteration_complex(const Mat& A, const ComplexPowerOptions& opt = {});

struct DeflationOptions {
  ComplexPowerOptions power{};
  bool refine = true;      // polish each pair by inverse iteration on the original matrix
  int refine_steps = 3;
  double pairing_tol = 1e-6;
};

// Dominant eigenpairs one at a time: power iteration on A and A^T, biorthogonal
// normalization, then A <- A - lambda v w^T (and the conjugate for complex pairs).
std::vector<Eigenpair> deflate_spectrum(const Mat& A, int n_pairs, const DeflationOptions& opt = {});

// One step of the deflation loop, exposed so callers can interleave work
// between eigenpairs. `work` is the current deflated matrix and is updated.
// Returns one pair for a real eigenvalue or two (conjugates) for a complex one.
std::vector<Eigenpair> deflation_step(Mat& work, const Mat& original, const DeflationOptions& opt,
                                      int index);

// Unshifted QR iteration A_{k+1} = R_k Q_k, returning A_n.
Mat qr_iteration(const Mat& A, int n_steps);
// Eigenvalues read off the 1x1 and 2x2 diagonal blocks of a QR-iterated matrix.
std::vector<cplx> qr_eigenvalues(const Mat& A, int max_steps = 20000, double tol = 1e-13);

// Full spectrum through a library dense solver, with the same normalization
// and ordering as deflate_spectrum. Used when every eigenpair is wanted.
std::vector<Eigenpair> dense_eigenpairs(const Mat& A);

// |A v - lambda v| / |v| and |A^T w - lambda w| / |w|.
std::array<double, 2> eigen_residuals(const Mat& A, const Eigenpair& p);

// Descending modulus, then descending real part, then positive imaginary first.
bool spectrum_order(cplx a, cplx b);
void sort_spectrum(std::vector<Eigenpair>& pairs);
void normalize_pair(Eigenpair& p);

nlohmann::json spectrum_to_json(const Mat& A, const std::vector<Eigenpair>& pairs);

}  // namespace koopal
