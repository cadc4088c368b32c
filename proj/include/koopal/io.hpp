#pragma once

#include "koopal/dynamics.hpp"
#include "koopal/phase.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace koopal {

// Shortest decimal form is not used on purpose: every float goes out with 17
// significant digits so a file re-read gives back the same double.
std::string format_double(double v);

void ensure_directory(const std::string& dir);
std::string join_path(const std::string& dir, const std::string& name);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// Pretty-printed with two-space indent and a trailing newline.
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// Header x1,...,xd,re,im; singular points are written as nan,nan.
std::string grid_field_csv(const std::vector<Vec>& points, const std::vector<FieldValue>& values);
void write_grid_field(const std::string& path, const std::vector<Vec>& points, const std::vector<FieldValue>& values);

// Header x1,x2,abs,arg,singular.
std::string phase_field_csv(const PhaseField& field);
void write_phase_field(const std::string& path, const PhaseField& field);

// x1..xd,y1..yd plus <stem>.json with system id, dt, seed, box and dropped count.
void write_snapshots(const std::string& csv_path, const SnapshotSet& s);
SnapshotSet read_snapshots(const std::string& csv_path);

// Row-major, no header.
void write_matrix(const std::string& path, const Mat& m);
Mat read_matrix(const std::string& path);
// Column j becomes the pair of columns re_j, im_j; with a header.
void write_complex_matrix(const std::string& path, const CMat& m);

// Generic table for curves; json output is an array of row objects.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  void add(std::vector<double> row);
};

enum class TableFormat { Csv, Json };
TableFormat table_format_from_string(const std::string& s);
const char* extension_for(TableFormat f);
// Writes <stem>.csv or <stem>.json and returns the file name.
std::string write_table(const std::string& dir, const std::string& stem, const Table& t, TableFormat f);

nlohmann::json complex_to_json(cplx z);

}  // namespace koopal
