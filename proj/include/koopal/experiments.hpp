#pragma once

#include "koopal/core.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace koopal {

constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string id;
  nlohmann::json params = nlohmann::json::object();  // every parameter, defaults filled in
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: compute only, write nothing
  std::string format = "csv";  // encoding of curve tables
};

const std::vector<std::string>& experiment_ids();
bool is_experiment(const std::string& id);

struct ParamDoc {
  std::string key;
  nlohmann::json value;
  std::string source;  // where the default comes from, in plain words
};

std::vector<ParamDoc> experiment_params(const std::string& id);
std::string experiment_title(const std::string& id);

ExperimentConfig default_config(const std::string& id);
nlohmann::json config_to_json(const ExperimentConfig& c);
// Missing params take their defaults; unknown keys and a wrong schema version are config errors.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct Criterion {
  std::string name;
  int acceptance = 0;  // acceptance criterion number, 0 for extra checks
  double value = 0.0;
  double threshold = 0.0;
  std::string relation = "<=";  // value relation threshold must hold
  bool pass = false;
  std::string note;
};

Criterion make_criterion(std::string name, int acceptance, double value, const std::string& relation,
                         double threshold, std::string note = {});

struct ExperimentResult {
  std::string id;
  std::vector<Criterion> criteria;
  nlohmann::json report = nlohmann::json::object();  // numbers behind the criteria
  std::vector<std::string> artifacts;                 // file names relative to out_dir
  bool passed() const;
};

// Runs one experiment; writes artifacts plus summary.json and config.json when out_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

nlohmann::json summary_to_json(const ExperimentResult& r);

// deflate_spectrum against qr_eigenvalues on random P B P^-1 matrices with a known
// spectrum; P has singular values in [1, 3].
struct CrossValidationOptions {
  int matrices = 50;
  int dim_lo = 4, dim_hi = 20;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};
ExperimentResult eigensolver_crossvalidation(const CrossValidationOptions& opt, const std::string& out_dir = {},
                                             const std::string& format = "csv");

// Distance between two spectra as multisets: greedy nearest matching, largest gap.
double multiset_distance(const std::vector<cplx>& a, const std::vector<cplx>& b);

}  // namespace koopal
