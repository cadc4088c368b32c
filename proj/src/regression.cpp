#include "koopal/regression.hpp"

#include <cmath>
#include <sstream>

namespace koopal {

using nlohmann::json;

double default_ridge(const Dictionary& dict) {
  return dict.kind() == DictionaryKind::Rbf ? 1e-10 : 0.0;
}

namespace {

// Pseudo-inverse solve M Z = B for symmetric positive semidefinite M.
Mat pinv_solve(const Mat& M, const Mat& B) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  double cutoff = 1e-12 * (s.size() ? s[0] : 0.0);
  Vec inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv[i] = s[i] > cutoff ? 1.0 / s[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * B);
}

}  // namespace

KoopmanModel fit_edmd(const SnapshotSet& data, const Dictionary& dict, const FitOptions& opt) {
  if (data.size() == 0) fail(ErrorKind::EmptySupport, "no snapshot pairs to fit");
  if (data.dim() != dict.input_dim()) fail(ErrorKind::Contract, "snapshot and dictionary dimensions differ");
  if (!(opt.ridge >= 0.0)) fail(ErrorKind::Config, "ridge must be nonnegative");
  const double n = static_cast<double>(data.size());
  Mat PsiX = dict.eval_columns(data.X);
  Mat PsiY = dict.eval_columns(data.Y);
  Mat G = PsiX * PsiX.transpose() / n;
  Mat A = PsiX * PsiY.transpose() / n;
  const Eigen::Index D = G.rows();

  if (opt.ridge == 0.0) {
    Eigen::JacobiSVD<Mat> svd(G);
    const Vec& s = svd.singularValues();
    double smax = s[0], smin = s[s.size() - 1];
    if (!(smin > 1e-12 * smax)) {
      std::ostringstream os;
      os << "Gram matrix is rank deficient (condition number "
         << (smin > 0.0 ? smax / smin : INFINITY) << "); use a positive ridge";
      fail(ErrorKind::IllConditioned, os.str());
    }
  }
  Mat Gr = G + opt.ridge * Mat::Identity(D, D);

  KoopmanModel m;
  m.dict = dict;
  m.K = pinv_solve(Gr, A).transpose();
  m.dt = data.dt;
  m.ridge = opt.ridge;
  m.system_id = data.system_id;
  Mat R = PsiY - m.K * PsiX;
  m.fit_residual = std::sqrt(R.squaredNorm() / n);

  if (auto B = dict.exact_decoder()) {
    m.decoder = *B;
    m.decoder_exact = true;
  } else if (opt.fit_decoder) {
    Mat rhs = PsiX * data.X.transpose() / n;
    m.decoder = pinv_solve(Gr, rhs).transpose();
  }
  return m;
}

double training_objective(const Mat& K, const Mat& PsiX, const Mat& PsiY, double ridge) {
  double n = static_cast<double>(PsiX.cols());
  return (PsiY - K * PsiX).squaredNorm() / n + ridge * K.squaredNorm();
}

std::vector<Vec> predict(const KoopmanModel& model, const Vec& x0, int n_steps) {
  if (!model.decoder) fail(ErrorKind::Unsupported, "model has no decoder back to the state");
  if (n_steps < 0) fail(ErrorKind::Config, "number of prediction steps must be nonnegative");
  std::vector<Vec> out{x0};
  Vec z = model.dict.eval(x0);
  for (int k = 0; k < n_steps; ++k) {
    z = model.K * z;
    out.push_back(*model.decoder * z);
  }
  return out;
}

Mat reconstruct(const KoopmanModel& model, const Mat& X) {
  if (!model.decoder) fail(ErrorKind::Unsupported, "model has no decoder back to the state");
  return *model.decoder * (model.K * model.dict.eval_columns(X));
}

namespace {

json matrix_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

Mat matrix_from(const json& rows) {
  Mat M(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  return M;
}

}  // namespace

json model_to_json(const KoopmanModel& m) {
  json j;
  j["system_id"] = m.system_id;
  j["dt"] = m.dt;
  j["ridge"] = m.ridge;
  j["fit_residual"] = m.fit_residual;
  j["dictionary"] = m.dict.to_json();
  j["feature_count"] = m.dict.size();
  if (m.decoder) {
    j["decoder"] = matrix_json(*m.decoder);
    j["decoder_exact"] = m.decoder_exact;
  }
  return j;
}

KoopmanModel model_from_json(const json& j, const Mat& K) {
  try {
    KoopmanModel m;
    m.dict = Dictionary::from_json(j.at("dictionary"));
    if (K.rows() != m.dict.size() || K.cols() != m.dict.size())
      fail(ErrorKind::Config, "Koopman matrix size does not match the dictionary");
    m.K = K;
    m.system_id = j.value("system_id", "");
    m.dt = j.at("dt").get<double>();
    m.ridge = j.value("ridge", 0.0);
    m.fit_residual = j.value("fit_residual", 0.0);
    if (j.contains("decoder")) {
      m.decoder = matrix_from(j["decoder"]);
      m.decoder_exact = j.value("decoder_exact", false);
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed model json: ") + e.what());
  }
}

}  // namespace koopal
