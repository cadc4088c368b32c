#pragma once

#include "koopal/core.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace koopal {

enum class DictionaryKind { Identity, Rbf, Monomial };
const char* to_string(DictionaryKind k);

// Feature map Psi: R^d -> R^D with its Jacobian.
class Dictionary {
 public:
  static Dictionary identity(int dim);
  // Gaussian features exp(-|x - c|^2 / (2 sigma^2)); centers are columns.
  static Dictionary rbf(Mat centers, double bandwidth);
  // Products of nonnegative integer powers, one exponent vector per feature.
  static Dictionary monomial(std::vector<std::vector<int>> exponents);
  // All monomials of total degree <= max_degree, constant first, graded.
  static Dictionary monomial_total_degree(int dim, int max_degree);

  DictionaryKind kind() const { return kind_; }
  int input_dim() const { return dim_; }
  int size() const;
  double bandwidth() const { return bandwidth_; }
  const Mat& centers() const { return centers_; }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  Vec eval(const Vec& x) const;
  Mat jacobian(const Vec& x) const;  // D x d
  Mat eval_columns(const Mat& X) const;

  // Selection matrix B with B Psi(x) = x when the state appears verbatim
  // among the features.
  std::optional<Mat> exact_decoder() const;

  nlohmann::json to_json() const;
  static Dictionary from_json(const nlohmann::json& j);

 private:
  DictionaryKind kind_ = DictionaryKind::Identity;
  int dim_ = 0;
  Mat centers_;
  double bandwidth_ = 1.0;
  std::vector<std::vector<int>> exponents_;
};

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

// k-means++ seeding followed by Lloyd iterations; data points are columns.
// An empty cluster is re-seeded at the point farthest from its center.
Mat kmeans_centers(const Mat& data, int k, const KMeansOptions& opt = {});

// RBF dictionary with k-means centers fitted on the given points.
Dictionary rbf_dictionary(const Mat& data, int n_centers, double bandwidth, std::uint64_t seed);
// RBF dictionary with n centers evenly spaced on [lo, hi] (one dimension).
Dictionary rbf_dictionary_uniform(double lo, double hi, int n_centers, double bandwidth);

// max over the grid of the largest singular value of the feature Jacobian.
double spectral_norm_bound_L(const Dictionary& dict, const EvalGrid& grid);
// max over the grid of |Psi(x)|.
double feature_sup_M(const Dictionary& dict, const EvalGrid& grid);

}  // namespace koopal
