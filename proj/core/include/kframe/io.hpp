#pragma once

#include <string>
#include <vector>

#include "kframe/envelope.hpp"
#include "kframe/pointset.hpp"

namespace kframe {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Column {
  std::string name;
  std::vector<double> data;
};

// Binary column file:
//   KFCOL1\n
//   rows <n>\n
//   column <name>\n      (one line per column)
//   meta <one line>\n    (optional)
//   end\n
//   column-major little-endian float64 payload
void write_columns(const std::string& path, const std::vector<Column>& cols, const std::string& meta = "");
std::vector<Column> read_columns(const std::string& path, std::string* meta = nullptr);

// CSV with a header row; values printed with 17 significant digits.
void write_csv(const std::string& path, const std::vector<Column>& cols);
std::vector<Column> read_csv(const std::string& path);

const Column& find_column(const std::vector<Column>& cols, const std::string& name);

std::vector<Column> point_columns(const PointFamily& f);
PointFamily points_from_columns(const GroupSpec& g, const std::vector<Column>& cols);
// x0, x1, re, im, weight per grid node.
std::vector<Column> grid_function_columns(const GridFunction& f);
std::vector<Column> cover_columns(const DisjointCover& c);

// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace kframe
