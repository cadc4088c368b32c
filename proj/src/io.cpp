#include "koopal/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace koopal {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void ensure_directory(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "'" + path + "' is not valid JSON: " + e.what());
  }
}

namespace {

void header(std::ostringstream& os, const char* prefix, int d) {
  for (int i = 0; i < d; ++i) {
    if (i) os << ',';
    os << prefix << (i + 1);
  }
}

}  // namespace

std::string grid_field_csv(const std::vector<Vec>& points, const std::vector<FieldValue>& values) {
  if (points.size() != values.size()) fail(ErrorKind::Contract, "points and values differ in length");
  int d = points.empty() ? 1 : static_cast<int>(points[0].size());
  std::ostringstream os;
  header(os, "x", d);
  os << ",re,im\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    for (int i = 0; i < d; ++i) os << format_double(points[k][i]) << ',';
    if (values[k].singular)
      os << "nan,nan\n";
    else
      os << format_double(values[k].value.real()) << ',' << format_double(values[k].value.imag()) << '\n';
  }
  return os.str();
}

void write_grid_field(const std::string& path, const std::vector<Vec>& points, const std::vector<FieldValue>& values) {
  write_text(path, grid_field_csv(points, values));
}

std::string phase_field_csv(const PhaseField& f) {
  if (f.grid.dim() != 2) fail(ErrorKind::Contract, "phase fields are planar");
  std::ostringstream os;
  os << "x1,x2,abs,arg,singular\n";
  auto iso = f.isostable();
  auto chron = f.isochron();
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    Vec x = f.grid.point(k);
    os << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(iso[k]) << ','
       << format_double(chron[k]) << ',' << (f.values[k].singular ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_phase_field(const std::string& path, const PhaseField& field) { write_text(path, phase_field_csv(field)); }

namespace {

std::string sidecar_path(const std::string& csv_path) {
  fs::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

double parse_double(const std::string& cell, const std::string& path) {
  if (cell == "nan") return std::nan("");
  if (cell == "inf") return INFINITY;
  if (cell == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    fail(ErrorKind::Io, "bad number '" + cell + "' in " + path);
  return v;
}

std::vector<std::vector<double>> parse_rows(const std::string& text, const std::string& path, bool skip_header) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      row.push_back(parse_double(line.substr(start, comma - start), path));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows[0].size()) fail(ErrorKind::Io, "ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_snapshots(const std::string& csv_path, const SnapshotSet& s) {
  std::ostringstream os;
  int d = s.dim();
  header(os, "x", d);
  os << ',';
  header(os, "y", d);
  os << '\n';
  for (std::size_t j = 0; j < s.size(); ++j) {
    auto c = static_cast<Eigen::Index>(j);
    for (int i = 0; i < d; ++i) os << format_double(s.X(i, c)) << ',';
    for (int i = 0; i < d; ++i) os << format_double(s.Y(i, c)) << (i + 1 < d ? "," : "\n");
  }
  write_text(csv_path, os.str());
  json meta = {{"system", s.system_id}, {"dt", s.dt},          {"seed", s.seed},
               {"box_lo", vec_json(s.box_lo)}, {"box_hi", vec_json(s.box_hi)}, {"pairs", s.size()},
               {"dropped", s.dropped}};
  write_json(sidecar_path(csv_path), meta);
}

SnapshotSet read_snapshots(const std::string& csv_path) {
  json meta = read_json(sidecar_path(csv_path));
  auto rows = parse_rows(read_text(csv_path), csv_path, true);
  SnapshotSet s;
  try {
    s.system_id = meta.at("system").get<std::string>();
    s.dt = meta.at("dt").get<double>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.box_lo = json_vec(meta.at("box_lo"));
    s.box_hi = json_vec(meta.at("box_hi"));
    s.dropped = meta.value("dropped", std::size_t{0});
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, "bad snapshot metadata for " + csv_path + ": " + e.what());
  }
  if (rows.empty()) fail(ErrorKind::Io, csv_path + " has no pairs");
  if (rows[0].size() % 2) fail(ErrorKind::Io, csv_path + " has an odd column count");
  int d = static_cast<int>(rows[0].size() / 2);
  auto n = static_cast<Eigen::Index>(rows.size());
  s.X.resize(d, n);
  s.Y.resize(d, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i) {
      s.X(i, j) = rows[j][i];
      s.Y(i, j) = rows[j][d + i];
    }
  return s;
}

void write_matrix(const std::string& path, const Mat& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << format_double(m(i, j)) << (j + 1 < m.cols() ? "," : "\n");
  write_text(path, os.str());
}

Mat read_matrix(const std::string& path) {
  auto rows = parse_rows(read_text(path), path, false);
  if (rows.empty()) fail(ErrorKind::Io, path + " is empty");
  Mat m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_complex_matrix(const std::string& path, const CMat& m) {
  std::ostringstream os;
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << "re_" << j << ",im_" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << format_double(m(i, j).real()) << ',' << format_double(m(i, j).imag()) << (j + 1 < m.cols() ? "," : "\n");
  write_text(path, os.str());
}

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) fail(ErrorKind::Contract, "table row has the wrong width");
  rows.push_back(std::move(row));
}

TableFormat table_format_from_string(const std::string& s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "json") return TableFormat::Json;
  fail(ErrorKind::Config, "format must be csv or json, got '" + s + "'");
}

const char* extension_for(TableFormat f) { return f == TableFormat::Csv ? ".csv" : ".json"; }

std::string write_table(const std::string& dir, const std::string& stem, const Table& t, TableFormat f) {
  std::string name = stem + extension_for(f);
  if (f == TableFormat::Csv) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (auto& r : t.rows)
      for (std::size_t i = 0; i < r.size(); ++i) os << format_double(r[i]) << (i + 1 < r.size() ? "," : "\n");
    write_text(join_path(dir, name), os.str());
  } else {
    json a = json::array();
    for (auto& r : t.rows) {
      json o = json::object();
      // NaN has no JSON spelling; null stands in.
      for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = std::isfinite(r[i]) ? json(r[i]) : json(nullptr);
      a.push_back(o);
    }
    write_json(join_path(dir, name), a);
  }
  return name;
}

json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace koopal
