#include "koopal/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace koopal {

using nlohmann::json;

const char* to_string(DictionaryKind k) {
  switch (k) {
    case DictionaryKind::Identity: return "identity";
    case DictionaryKind::Rbf: return "rbf";
    case DictionaryKind::Monomial: return "monomial";
  }
  return "?";
}

Dictionary Dictionary::identity(int dim) {
  if (dim <= 0) fail(ErrorKind::Config, "dictionary dimension must be positive");
  Dictionary d;
  d.kind_ = DictionaryKind::Identity;
  d.dim_ = dim;
  return d;
}

Dictionary Dictionary::rbf(Mat centers, double bandwidth) {
  if (centers.cols() == 0 || centers.rows() == 0) fail(ErrorKind::Config, "rbf dictionary needs centers");
  if (!(bandwidth > 0.0)) fail(ErrorKind::Config, "rbf bandwidth must be positive");
  Dictionary d;
  d.kind_ = DictionaryKind::Rbf;
  d.dim_ = static_cast<int>(centers.rows());
  d.centers_ = std::move(centers);
  d.bandwidth_ = bandwidth;
  return d;
}

Dictionary Dictionary::monomial(std::vector<std::vector<int>> exponents) {
  if (exponents.empty()) fail(ErrorKind::Config, "monomial dictionary needs at least one term");
  std::size_t dim = exponents.front().size();
  if (dim == 0) fail(ErrorKind::Config, "monomial exponents must not be empty");
  for (auto& e : exponents) {
    if (e.size() != dim) fail(ErrorKind::Config, "monomial exponent vectors differ in length");
    for (int k : e)
      if (k < 0) fail(ErrorKind::Config, "monomial exponents must be nonnegative");
  }
  Dictionary d;
  d.kind_ = DictionaryKind::Monomial;
  d.dim_ = static_cast<int>(dim);
  d.exponents_ = std::move(exponents);
  return d;
}

Dictionary Dictionary::monomial_total_degree(int dim, int max_degree) {
  if (dim <= 0 || max_degree < 0) fail(ErrorKind::Config, "bad monomial dictionary shape");
  std::vector<std::vector<int>> all;
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  // Graded order: degree 0, then 1, ...; within a degree, lexicographic descending.
  for (int deg = 0; deg <= max_degree; ++deg) {
    std::function<void(int, int)> rec = [&](int k, int left) {
      if (k == dim - 1) {
        e[static_cast<std::size_t>(k)] = left;
        all.push_back(e);
        return;
      }
      for (int v = left; v >= 0; --v) {
        e[static_cast<std::size_t>(k)] = v;
        rec(k + 1, left - v);
      }
    };
    rec(0, deg);
  }
  return monomial(all);
}

int Dictionary::size() const {
  switch (kind_) {
    case DictionaryKind::Identity: return dim_;
    case DictionaryKind::Rbf: return static_cast<int>(centers_.cols());
    case DictionaryKind::Monomial: return static_cast<int>(exponents_.size());
  }
  return 0;
}

namespace {

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

Vec Dictionary::eval(const Vec& x) const {
  if (x.size() != dim_) fail(ErrorKind::Contract, "dictionary input dimension mismatch");
  switch (kind_) {
    case DictionaryKind::Identity: return x;
    case DictionaryKind::Rbf: {
      Vec out(centers_.cols());
      double s = 1.0 / (2.0 * bandwidth_ * bandwidth_);
      for (Eigen::Index j = 0; j < centers_.cols(); ++j)
        out[j] = std::exp(-(x - centers_.col(j)).squaredNorm() * s);
      return out;
    }
    case DictionaryKind::Monomial: {
      Vec out(static_cast<Eigen::Index>(exponents_.size()));
      for (std::size_t j = 0; j < exponents_.size(); ++j) {
        double v = 1.0;
        for (int k = 0; k < dim_; ++k) v *= ipow(x[k], exponents_[j][static_cast<std::size_t>(k)]);
        out[static_cast<Eigen::Index>(j)] = v;
      }
      return out;
    }
  }
  return {};
}

Mat Dictionary::jacobian(const Vec& x) const {
  if (x.size() != dim_) fail(ErrorKind::Contract, "dictionary input dimension mismatch");
  switch (kind_) {
    case DictionaryKind::Identity: return Mat::Identity(dim_, dim_);
    case DictionaryKind::Rbf: {
      Mat J(centers_.cols(), dim_);
      double s = 1.0 / (2.0 * bandwidth_ * bandwidth_);
      for (Eigen::Index j = 0; j < centers_.cols(); ++j) {
        Vec diff = x - centers_.col(j);
        double psi = std::exp(-diff.squaredNorm() * s);
        J.row(j) = (-psi / (bandwidth_ * bandwidth_)) * diff.transpose();
      }
      return J;
    }
    case DictionaryKind::Monomial: {
      Mat J = Mat::Zero(static_cast<Eigen::Index>(exponents_.size()), dim_);
      for (std::size_t j = 0; j < exponents_.size(); ++j) {
        const auto& e = exponents_[j];
        for (int k = 0; k < dim_; ++k) {
          int ek = e[static_cast<std::size_t>(k)];
          if (ek == 0) continue;
          double v = ek * ipow(x[k], ek - 1);
          for (int m = 0; m < dim_; ++m)
            if (m != k) v *= ipow(x[m], e[static_cast<std::size_t>(m)]);
          J(static_cast<Eigen::Index>(j), k) = v;
        }
      }
      return J;
    }
  }
  return {};
}

Mat Dictionary::eval_columns(const Mat& X) const {
  Mat out(size(), X.cols());
  parallel_for(static_cast<std::size_t>(X.cols()), [&](std::size_t j) {
    out.col(static_cast<Eigen::Index>(j)) = eval(X.col(static_cast<Eigen::Index>(j)));
  });
  return out;
}

std::optional<Mat> Dictionary::exact_decoder() const {
  if (kind_ == DictionaryKind::Identity) return Mat::Identity(dim_, dim_);
  if (kind_ != DictionaryKind::Monomial) return std::nullopt;
  Mat B = Mat::Zero(dim_, size());
  for (int k = 0; k < dim_; ++k) {
    bool found = false;
    for (std::size_t j = 0; j < exponents_.size() && !found; ++j) {
      const auto& e = exponents_[j];
      bool unit = true;
      for (int m = 0; m < dim_; ++m) unit = unit && (e[static_cast<std::size_t>(m)] == (m == k ? 1 : 0));
      if (unit) {
        B(k, static_cast<Eigen::Index>(j)) = 1.0;
        found = true;
      }
    }
    if (!found) return std::nullopt;
  }
  return B;
}

json Dictionary::to_json() const {
  json j;
  j["kind"] = to_string(kind_);
  j["input_dim"] = dim_;
  if (kind_ == DictionaryKind::Rbf) {
    j["bandwidth"] = bandwidth_;
    json cs = json::array();
    for (Eigen::Index c = 0; c < centers_.cols(); ++c) {
      json col = json::array();
      for (Eigen::Index r = 0; r < centers_.rows(); ++r) col.push_back(centers_(r, c));
      cs.push_back(col);
    }
    j["centers"] = cs;
  }
  if (kind_ == DictionaryKind::Monomial) j["exponents"] = exponents_;
  return j;
}

Dictionary Dictionary::from_json(const json& j) {
  try {
    std::string kind = j.at("kind").get<std::string>();
    int dim = j.at("input_dim").get<int>();
    if (kind == "identity") return identity(dim);
    if (kind == "rbf") {
      const auto& cs = j.at("centers");
      Mat C(dim, static_cast<Eigen::Index>(cs.size()));
      for (std::size_t c = 0; c < cs.size(); ++c) {
        if (cs[c].size() != static_cast<std::size_t>(dim)) fail(ErrorKind::Config, "rbf center has wrong dimension");
        for (int r = 0; r < dim; ++r) C(r, static_cast<Eigen::Index>(c)) = cs[c][static_cast<std::size_t>(r)].get<double>();
      }
      return rbf(C, j.at("bandwidth").get<double>());
    }
    if (kind == "monomial") return monomial(j.at("exponents").get<std::vector<std::vector<int>>>());
    fail(ErrorKind::Config, "unknown dictionary kind '" + kind + "'");
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed dictionary json: ") + e.what());
  }
}

Mat kmeans_centers(const Mat& data, int k, const KMeansOptions& opt) {
  const Eigen::Index n = data.cols();
  if (k <= 0) fail(ErrorKind::Config, "number of centers must be positive");
  {
    std::set<std::vector<double>> distinct;
    for (Eigen::Index j = 0; j < n && static_cast<int>(distinct.size()) < k; ++j)
      distinct.insert(std::vector<double>(data.col(j).data(), data.col(j).data() + data.rows()));
    if (static_cast<int>(distinct.size()) < k)
      fail(ErrorKind::Config, "more centers requested than distinct data points");
  }
  std::mt19937_64 rng(opt.seed);
  Mat C(data.rows(), k);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  C.col(0) = data.col(pick(rng));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      d2[static_cast<std::size_t>(j)] =
          std::min(d2[static_cast<std::size_t>(j)], (data.col(j) - C.col(c - 1)).squaredNorm());
      total += d2[static_cast<std::size_t>(j)];
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    Eigen::Index chosen = n - 1;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += d2[static_cast<std::size_t>(j)];
      if (acc >= r && d2[static_cast<std::size_t>(j)] > 0.0) {
        chosen = j;
        break;
      }
    }
    C.col(c) = data.col(chosen);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < opt.max_iter; ++it) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      int bi = 0;
      for (int c = 0; c < k; ++c) {
        double d = (data.col(j) - C.col(c)).squaredNorm();
        if (d < best) {
          best = d;
          bi = c;
        }
      }
      assign[static_cast<std::size_t>(j)] = bi;
      dist[static_cast<std::size_t>(j)] = best;
    }
    Mat S = Mat::Zero(data.rows(), k);
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      S.col(assign[static_cast<std::size_t>(j)]) += data.col(j);
      count[static_cast<std::size_t>(assign[static_cast<std::size_t>(j)])]++;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      Vec next;
      if (count[static_cast<std::size_t>(c)] == 0) {
        auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
        next = data.col(far);
        dist[static_cast<std::size_t>(far)] = 0.0;
      } else {
        next = S.col(c) / count[static_cast<std::size_t>(c)];
      }
      shift = std::max(shift, (next - C.col(c)).norm());
      C.col(c) = next;
    }
    if (shift < opt.tol) break;
  }
  return C;
}

Dictionary rbf_dictionary(const Mat& data, int n_centers, double bandwidth, std::uint64_t seed) {
  KMeansOptions o;
  o.seed = seed;
  return Dictionary::rbf(kmeans_centers(data, n_centers, o), bandwidth);
}

Dictionary rbf_dictionary_uniform(double lo, double hi, int n_centers, double bandwidth) {
  if (n_centers < 2 || !(hi > lo)) fail(ErrorKind::Config, "uniform centers need n >= 2 and hi > lo");
  Mat C(1, n_centers);
  for (int j = 0; j < n_centers; ++j) C(0, j) = lo + (hi - lo) * j / (n_centers - 1);
  return Dictionary::rbf(C, bandwidth);
}

double spectral_norm_bound_L(const Dictionary& dict, const EvalGrid& grid) {
  if (grid.dim() != dict.input_dim()) fail(ErrorKind::Contract, "grid and dictionary dimensions differ");
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    Mat J = dict.jacobian(grid.point(i));
    Mat JtJ = J.transpose() * J;
    Eigen::SelfAdjointEigenSolver<Mat> es(JtJ, Eigen::EigenvaluesOnly);
    vals[i] = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  });
  return *std::max_element(vals.begin(), vals.end());
}

double feature_sup_M(const Dictionary& dict, const EvalGrid& grid) {
  if (grid.dim() != dict.input_dim()) fail(ErrorKind::Contract, "grid and dictionary dimensions differ");
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { vals[i] = dict.eval(grid.point(i)).norm(); });
  return *std::max_element(vals.begin(), vals.end());
}

}  // namespace koopal
