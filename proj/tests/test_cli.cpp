#include <doctest.h>

#include "cli.hpp"
#include "koopal/io.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace koopal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  int code = cli::run(args, o, e);
  return {code, o.str(), e.str()};
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("koopal_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> files_in(const fs::path& dir) {
  std::vector<std::string> names;
  for (auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

// Splits on commas, newlines and JSON punctuation and compares numbers with a tolerance,
// everything else exactly.
double numeric_gap(const std::string& a, const std::string& b) {
  auto tokens = [](const std::string& s) {
    std::vector<std::string> t;
    std::string cur;
    for (char c : s) {
      if (std::string(",\n[]{}: \"").find(c) != std::string::npos) {
        if (!cur.empty()) t.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) t.push_back(cur);
    return t;
  };
  auto ta = tokens(a), tb = tokens(b);
  if (ta.size() != tb.size()) return INFINITY;
  double gap = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i] == tb[i]) continue;
    char* ea = nullptr;
    char* eb = nullptr;
    double x = std::strtod(ta[i].c_str(), &ea), y = std::strtod(tb[i].c_str(), &eb);
    if (*ea || *eb) return INFINITY;
    gap = std::max(gap, std::abs(x - y) / std::max(1.0, std::abs(y)));
  }
  return gap;
}

}  // namespace

TEST_CASE("unknown flags and missing inputs are usage errors") {
  auto r = call({"lin5d_check", "--bogus"});
  CHECK(r.code == cli::kUsage);
  auto j = nlohmann::json::parse(r.err);
  CHECK(j["error"]["kind"] == "usage");
  CHECK(j["error"]["exit_code"] == 2);

  CHECK(call({}).code == cli::kUsage);
  CHECK(call({"run", "not_an_experiment"}).code == cli::kUsage);
  CHECK(call({"--format", "xml", "lin5d_check"}).code == cli::kUsage);
  CHECK(call({"--threads", "-2", "lin5d_check"}).code == cli::kUsage);
  CHECK(call({"lin5d_check", "--set", "no_such_key=1"}).code == cli::kUsage);
  CHECK(call({"lin5d_check", "--set", "novalue"}).code == cli::kUsage);
  CHECK(call({"simulate"}).code == cli::kUsage);
  CHECK(call({"simulate", "--system", "nosuch"}).code == cli::kUsage);
}

TEST_CASE("a missing config file exits with 2 and a structured error") {
  auto out = scratch_dir("missing");
  auto r = call({"--config", (out / "nope.json").string(), "--out", out.string(), "run"});
  CHECK(r.code == cli::kUsage);
  auto j = nlohmann::json::parse(r.err);
  CHECK(j["error"]["kind"] == "config");
  CHECK(fs::exists(out / "error.json"));
}

TEST_CASE("help lists every default with its source") {
  auto r = call({"--help"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("n_pairs = 400") != std::string::npos);
  CHECK(r.out.find("linear example: sampling interval") != std::string::npos);
  CHECK(r.out.find("duffing_edmd") != std::string::npos);
  for (const char* sub : {"simulate", "fit", "eig", "extend", "bridge", "phase", "run"})
    CHECK(r.out.find(sub) != std::string::npos);
  auto s = call({"bridge1d", "--help"});
  CHECK(s.code == cli::kOk);
  CHECK(s.out.find("overlap_tol = 0.05") != std::string::npos);
}

TEST_CASE("unmet criteria exit with 1") {
  auto r = call({"lin5d_check", "--set", "identity_tol=0"});
  CHECK(r.code == cli::kCriteriaUnmet);
  CHECK(r.out.find("FAIL") != std::string::npos);
}

TEST_CASE("the same seed gives byte-identical files") {
  auto a = scratch_dir("seed_a"), b = scratch_dir("seed_b");
  REQUIRE(call({"--seed", "1", "--out", a.string(), "lin5d_check"}).code == cli::kOk);
  REQUIRE(call({"lin5d_check", "--seed", "1", "--out", b.string()}).code == cli::kOk);
  auto names = files_in(a);
  REQUIRE(names == files_in(b));
  CHECK(names.size() >= 5);
  for (auto& n : names) {
    INFO(n);
    CHECK(read_text((a / n).string()) == read_text((b / n).string()));
  }
  // A different seed changes the data.
  auto c = scratch_dir("seed_c");
  REQUIRE(call({"--seed", "2", "--out", c.string(), "lin5d_check"}).code == cli::kOk);
  CHECK(read_text((a / "K.csv").string()) != read_text((c / "K.csv").string()));
}

TEST_CASE("thread count does not change numeric output") {
  auto a = scratch_dir("thr1"), b = scratch_dir("thr8");
  REQUIRE(call({"--threads", "1", "--out", a.string(), "softplus_edmd"}).code == cli::kOk);
  REQUIRE(call({"--threads", "8", "--out", b.string(), "softplus_edmd"}).code == cli::kOk);
  auto names = files_in(a);
  REQUIRE(names == files_in(b));
  double worst = 0.0;
  for (auto& n : names) worst = std::max(worst, numeric_gap(read_text((a / n).string()), read_text((b / n).string())));
  CHECK(worst <= 1e-13);
}

TEST_CASE("a written config reproduces the run") {
  auto a = scratch_dir("cfg_a"), b = scratch_dir("cfg_b");
  REQUIRE(call({"--seed", "9", "--format", "json", "--out", a.string(), "polar_transforms"}).code == cli::kOk);
  REQUIRE(call({"--config", (a / "config.json").string(), "--out", b.string(), "run"}).code == cli::kOk);
  auto names = files_in(a);
  REQUIRE(names == files_in(b));
  CHECK(std::find(names.begin(), names.end(), "trajectory_mapping.json") != names.end());
  for (auto& n : names) CHECK(read_text((a / n).string()) == read_text((b / n).string()));
  // A config for one experiment cannot run another.
  CHECK(call({"--config", (a / "config.json").string(), "lin5d_check"}).code == cli::kUsage);
}

TEST_CASE("summary mirrors the criteria") {
  auto a = scratch_dir("summary");
  REQUIRE(call({"--out", a.string(), "polar_transforms"}).code == cli::kOk);
  auto j = read_json((a / "summary.json").string());
  CHECK(j["passed"] == true);
  for (auto& c : j["criteria"]) {
    CHECK(c.contains("name"));
    CHECK(c.contains("value"));
    CHECK(c.contains("threshold"));
    bool expect = c["relation"] == "<=" ? c["value"].get<double>() <= c["threshold"].get<double>()
                                        : c["value"].get<double>() >= c["threshold"].get<double>();
    CHECK(c["pass"] == expect);
  }
}

TEST_CASE("simulate, fit, eig, extend chain through files") {
  auto d = scratch_dir("chain");
  REQUIRE(call({"--out", d.string(), "simulate", "--system", "linear2d", "--dt", "0.2", "--pairs", "100"}).code ==
          cli::kOk);
  CHECK(fs::exists(d / "snapshots.csv"));
  CHECK(fs::exists(d / "snapshots.json"));
  REQUIRE(call({"--out", d.string(), "fit", "--snapshots", (d / "snapshots.csv").string()}).code == cli::kOk);
  auto spec = read_json((d / "spectrum.json").string());
  REQUIRE(spec.contains("eigenpairs"));
  auto e = call({"eig", "--matrix", (d / "K.csv").string(), "--solver", "qr"});
  CHECK(e.code == cli::kOk);
  auto ej = nlohmann::json::parse(e.out);
  CHECK(ej["eigenvalues"].size() == 2);
  auto x = call({"--out", d.string(), "extend", "--model", (d / "model.json").string(), "--eigenpairs", "2",
                 "--epsilon", "0.1", "--grid-lo", "-1", "--grid-hi", "1", "--grid-h", "0.1", "--method", "euler"});
  CHECK(x.code == cli::kOk);
  CHECK(fs::exists(d / "extension.json"));
}

TEST_CASE("bridge and phase subcommands write their reports") {
  auto d = scratch_dir("bp");
  REQUIRE(call({"--out", d.string(), "bridge"}).code == cli::kOk);
  auto b = read_json((d / "bridge.json").string());
  CHECK(b["c_forward"].get<double>() == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(call({"bridge", "--system", "linear2d"}).code == cli::kUsage);
  REQUIRE(call({"--out", d.string(), "phase", "--system", "polarLC", "--method", "analytic", "--grid-n", "11"}).code ==
          cli::kOk);
  auto text = read_text((d / "phase.csv").string());
  CHECK(text.rfind("x1,x2,abs,arg,singular\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 121);
  auto src = read_json((d / "phase_source.json").string());
  CHECK(src.contains("method"));
}

TEST_CASE("eig without a matrix runs the cross-validation") {
  auto r = call({"eig", "--matrices", "5", "--dim-hi", "8"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("#11") != std::string::npos);
}
