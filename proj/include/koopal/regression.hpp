#pragma once

#include "koopal/dictionary.hpp"
#include "koopal/dynamics.hpp"

#include <optional>

namespace koopal {

struct FitOptions {
  double ridge = 0.0;
  bool fit_decoder = true;  // least-squares decoder when the state is not a feature
};

// Ridge default by dictionary: plain DMD gets none, RBF features a little.
double default_ridge(const Dictionary& dict);

// Finite-dimensional Koopman approximation acting on feature vectors:
// Psi(F(x)) ~ K Psi(x), so eigenfunctions are w^T Psi with w^T K = lambda w^T.
struct KoopmanModel {
  Dictionary dict;
  Mat K;
  double dt = 0.0;
  double ridge = 0.0;
  double fit_residual = 0.0;  // RMS of Psi(y) - K Psi(x) over the training pairs
  std::optional<Mat> decoder;  // d x D, maps features back to the state
  bool decoder_exact = false;
  std::string system_id;
};

// Solves (G + ridge I) K^T = A with G = Psi(X) Psi(X)^T / n and
// A = Psi(X) Psi(Y)^T / n via an SVD pseudo-inverse.
KoopmanModel fit_edmd(const SnapshotSet& data, const Dictionary& dict, const FitOptions& opt = {});

// Objective minimized by fit_edmd: |Psi(Y) - K Psi(X)|_F^2 / n + ridge |K|_F^2.
double training_objective(const Mat& K, const Mat& PsiX, const Mat& PsiY, double ridge);

// States x0, x1, ..., x_n obtained by iterating K on Psi(x0) and decoding.
std::vector<Vec> predict(const KoopmanModel& model, const Vec& x0, int n_steps);
// One-step prediction of every column of X.
Mat reconstruct(const KoopmanModel& model, const Mat& X);

nlohmann::json model_to_json(const KoopmanModel& model);
// K is stored separately; the json carries everything else.
KoopmanModel model_from_json(const nlohmann::json& j, const Mat& K);

}  // namespace koopal
