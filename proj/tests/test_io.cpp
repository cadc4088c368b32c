#include <doctest.h>

#include "koopal/experiments.hpp"
#include "koopal/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

using namespace koopal;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("koopal_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double parse(const std::string& s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  REQUIRE(r.ec == std::errc());
  return v;
}

}  // namespace

TEST_CASE("format_double round-trips random doubles bit for bit") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20000; ++i) {
    std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    double back = parse(format_double(v));
    std::uint64_t b2;
    std::memcpy(&b2, &back, sizeof back);
    REQUIRE(b2 == bits);
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("snapshot files round-trip with their metadata") {
  auto dir = scratch_dir("snap");
  SnapshotSet s;
  s.system_id = "linear2d";
  s.dt = 0.2;
  s.seed = 42;
  s.box_lo = Vec::Constant(2, -2.0);
  s.box_hi = Vec::Constant(2, 2.0);
  s.dropped = 3;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  s.X.resize(2, 17);
  s.Y.resize(2, 17);
  for (int j = 0; j < 17; ++j)
    for (int i = 0; i < 2; ++i) {
      s.X(i, j) = n(rng);
      s.Y(i, j) = n(rng) * 1e-300;
    }
  auto path = (dir / "s.csv").string();
  write_snapshots(path, s);
  CHECK(fs::exists(dir / "s.json"));
  SnapshotSet r = read_snapshots(path);
  CHECK(r.system_id == "linear2d");
  CHECK(r.dt == 0.2);
  CHECK(r.seed == 42u);
  CHECK(r.dropped == 3u);
  CHECK(r.box_lo == s.box_lo);
  CHECK(r.X == s.X);
  CHECK(r.Y == s.Y);
}

TEST_CASE("matrix files round-trip and reject ragged rows") {
  auto dir = scratch_dir("mat");
  Mat m(3, 4);
  m << 1, -2, 3.25, 1e-17, 0, 5, -6, 7, 8, 9, 10, std::numeric_limits<double>::denorm_min();
  auto p = (dir / "m.csv").string();
  write_matrix(p, m);
  CHECK(read_matrix(p) == m);
  write_text(p, "1,2\n3\n");
  CHECK_THROWS_AS(read_matrix(p), Error);
  write_text(p, "1,abc\n");
  CHECK_THROWS_AS(read_matrix(p), Error);
}

TEST_CASE("grid field CSV marks singular points as nan") {
  std::vector<Vec> pts{Vec::Constant(2, 0.0), Vec::Constant(2, 1.0)};
  std::vector<FieldValue> vals{FieldValue::regular({1.5, -2.0}), FieldValue::singular_point()};
  CHECK(grid_field_csv(pts, vals) == "x1,x2,re,im\n0,0,1.5,-2\n1,1,nan,nan\n");
  CHECK_THROWS_AS(grid_field_csv(pts, {vals[0]}), Error);
}

TEST_CASE("tables follow the requested format") {
  auto dir = scratch_dir("table");
  Table t{{"p", "err"}, {}};
  t.add({1, 0.25});
  t.add({2, std::nan("")});
  CHECK_THROWS_AS(t.add({1}), Error);
  CHECK(write_table(dir.string(), "curve", t, TableFormat::Csv) == "curve.csv");
  CHECK(read_text((dir / "curve.csv").string()) == "p,err\n1,0.25\n2,nan\n");
  CHECK(write_table(dir.string(), "curve", t, TableFormat::Json) == "curve.json");
  json j = read_json((dir / "curve.json").string());
  REQUIRE(j.size() == 2);
  CHECK(j[0]["err"] == 0.25);
  CHECK(j[1]["err"].is_null());
  CHECK_THROWS_AS(table_format_from_string("xml"), Error);
}

TEST_CASE("read_json reports bad files as config errors") {
  auto dir = scratch_dir("json");
  auto p = (dir / "bad.json").string();
  write_text(p, "{not json");
  try {
    read_json(p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  CHECK_THROWS_AS(read_text((dir / "missing.json").string()), Error);
}

TEST_CASE("every experiment config round-trips through JSON text") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (auto& id : experiment_ids()) {
    ExperimentConfig c = default_config(id);
    c.seed = rng();
    c.out_dir = "some/dir";
    c.format = "json";
    // Perturb every numeric scalar to an arbitrary double.
    for (auto& [k, v] : c.params.items())
      if (v.is_number_float()) v = u(rng);
    std::string text = config_to_json(c).dump();
    ExperimentConfig back = config_from_json(json::parse(text));
    CHECK(config_to_json(back).dump() == text);
    CHECK(back.seed == c.seed);
    CHECK(back.params == c.params);
  }
}

TEST_CASE("config parsing fills defaults and rejects the unknown") {
  ExperimentConfig c = config_from_json(json{{"id", "bridge1d"}, {"params", {{"a", 1.5}}}});
  CHECK(c.params["a"] == 1.5);
  CHECK(c.params["b"] == 3.0);
  CHECK(c.format == "csv");
  auto kind = [](const json& j) {
    try {
      config_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Internal;
  };
  CHECK(kind(json{{"id", "nope"}}) == ErrorKind::Config);
  CHECK(kind(json{{"id", "bridge1d"}, {"schema_version", 2}}) == ErrorKind::Config);
  CHECK(kind(json{{"id", "bridge1d"}, {"extra", 1}}) == ErrorKind::Config);
  CHECK(kind(json{{"id", "bridge1d"}, {"params", {{"zzz", 1}}}}) == ErrorKind::Config);
  CHECK(kind(json{{"id", "bridge1d"}, {"params", {{"a", "two"}}}}) == ErrorKind::Config);
  CHECK(kind(json{{"id", "bridge1d"}, {"format", "xml"}}) == ErrorKind::Config);
  CHECK(kind(json::array()) == ErrorKind::Config);
}

TEST_CASE("every default parameter carries a source string") {
  for (auto& id : experiment_ids()) {
    CHECK(is_experiment(id));
    CHECK_FALSE(experiment_title(id).empty());
    for (auto& p : experiment_params(id)) {
      INFO(id << "." << p.key);
      CHECK_FALSE(p.source.empty());
    }
  }
  CHECK_FALSE(is_experiment("nope"));
}

TEST_CASE("criteria compare with the stated relation") {
  CHECK(make_criterion("a", 1, 0.5, "<=", 0.5).pass);
  CHECK_FALSE(make_criterion("a", 1, 0.6, "<=", 0.5).pass);
  CHECK(make_criterion("a", 1, 0.8, ">=", 0.8).pass);
  CHECK_FALSE(make_criterion("a", 1, std::nan(""), "<=", 1.0).pass);
  CHECK_THROWS_AS(make_criterion("a", 1, 0.0, "<", 1.0), Error);
}

TEST_CASE("multiset distance matches nearest pairs") {
  std::vector<cplx> a{{1, 0}, {0, 1}, {0, -1}};
  std::vector<cplx> b{{0, -1.001}, {1.01, 0}, {0, 1}};
  CHECK(multiset_distance(a, b) == doctest::Approx(0.01));
  CHECK(std::isinf(multiset_distance(a, {b[0]})));
  // Repeated values must be matched once each.
  CHECK(multiset_distance({{1, 0}, {1, 0}}, {{1, 0}, {2, 0}}) == doctest::Approx(1.0));
}

TEST_CASE("small cross-validation run is deterministic and writes its table") {
  auto dir = scratch_dir("xval");
  CrossValidationOptions o;
  o.matrices = 6;
  o.dim_lo = 4;
  o.dim_hi = 6;
  o.seed = 5;
  auto r1 = eigensolver_crossvalidation(o, dir.string());
  auto r2 = eigensolver_crossvalidation(o);
  REQUIRE(r1.criteria.size() == 1);
  CHECK(r1.criteria[0].pass);
  CHECK(r1.criteria[0].value == r2.criteria[0].value);
  CHECK(fs::exists(dir / "crossvalidation.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  o.dim_hi = 3;
  CHECK_THROWS_AS(eigensolver_crossvalidation(o), Error);
}
