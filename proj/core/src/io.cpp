#include "kframe/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kframe {

namespace {

static_assert(std::endian::native == std::endian::little, "column files assume a little-endian host");

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::size_t check_rows(const std::vector<Column>& cols) {
  if (cols.empty()) return 0;
  const std::size_t n = cols.front().data.size();
  for (const auto& c : cols) {
    if (c.data.size() != n) throw FormatError("column '" + c.name + "' has a different length");
    if (c.name.empty() || c.name.find_first_of(",\n ") != std::string::npos)
      throw FormatError("bad column name '" + c.name + "'");
  }
  return n;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  if (*b == '+') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("cannot parse number '" + s + "' in " + where);
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_columns(const std::string& path, const std::vector<Column>& cols, const std::string& meta) {
  const std::size_t n = check_rows(cols);
  if (meta.find('\n') != std::string::npos) throw FormatError("column meta must be one line");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << "KFCOL1\nrows " << n << "\n";
  for (const auto& c : cols) out << "column " << c.name << "\n";
  if (!meta.empty()) out << "meta " << meta << "\n";
  out << "end\n";
  for (const auto& c : cols)
    out.write(reinterpret_cast<const char*>(c.data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw FormatError("write failed for " + path);
}

std::vector<Column> read_columns(const std::string& path, std::string* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "KFCOL1") throw FormatError(path + ": not a KFCOL1 file");
  std::size_t rows = 0;
  bool have_rows = false;
  std::vector<Column> cols;
  while (true) {
    if (!std::getline(in, line)) throw FormatError(path + ": truncated header");
    if (line == "end") break;
    if (line.rfind("rows ", 0) == 0) {
      rows = static_cast<std::size_t>(parse_double(line.substr(5), path));
      have_rows = true;
    } else if (line.rfind("column ", 0) == 0) {
      cols.push_back({line.substr(7), {}});
    } else if (line.rfind("meta ", 0) == 0) {
      if (meta) *meta = line.substr(5);
    } else {
      throw FormatError(path + ": unknown header line '" + line + "'");
    }
  }
  if (!have_rows) throw FormatError(path + ": missing row count");
  for (auto& c : cols) {
    c.data.resize(rows);
    in.read(reinterpret_cast<char*>(c.data.data()), static_cast<std::streamsize>(rows * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != rows * sizeof(double)) throw FormatError(path + ": truncated payload");
  }
  return cols;
}

void write_csv(const std::string& path, const std::vector<Column>& cols) {
  const std::size_t n = check_rows(cols);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j].name;
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << format_double(cols[j].data[i]);
    out << "\n";
  }
}

std::vector<Column> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  std::vector<Column> cols;
  for (auto& name : split_csv_line(line)) cols.push_back({name, {}});
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != cols.size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) + " fields");
    for (std::size_t j = 0; j < cells.size(); ++j)
      cols[j].data.push_back(parse_double(cells[j], path + ":" + std::to_string(lineno)));
  }
  return cols;
}

const Column& find_column(const std::vector<Column>& cols, const std::string& name) {
  for (const auto& c : cols)
    if (c.name == name) return c;
  throw FormatError("missing column '" + name + "'");
}

std::vector<Column> point_columns(const PointFamily& f) {
  Column x0{"x0", {}}, x1{"x1", {}};
  for (const auto& p : f.points()) {
    x0.data.push_back(p[0]);
    x1.data.push_back(p[1]);
  }
  return {x0, x1};
}

PointFamily points_from_columns(const GroupSpec& g, const std::vector<Column>& cols) {
  const auto& x0 = find_column(cols, "x0").data;
  const auto& x1 = find_column(cols, "x1").data;
  std::vector<GroupPoint> pts;
  for (std::size_t i = 0; i < x0.size(); ++i) pts.emplace_back(x0[i], x1[i]);
  return PointFamily(g, std::move(pts));
}

std::vector<Column> grid_function_columns(const GridFunction& f) {
  Column x0{"x0", {}}, x1{"x1", {}}, re{"re", {}}, im{"im", {}}, w{"weight", {}};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& p = f.grid->node(i);
    x0.data.push_back(p[0]);
    x1.data.push_back(p[1]);
    re.data.push_back(f.values[static_cast<Eigen::Index>(i)].real());
    im.data.push_back(f.values[static_cast<Eigen::Index>(i)].imag());
    w.data.push_back(f.grid->weight(i));
  }
  return {x0, x1, re, im, w};
}

std::vector<Column> cover_columns(const DisjointCover& c) {
  Column x0{"x0", {}}, x1{"x1", {}}, member{"member", {}};
  for (std::size_t i = 0; i < c.assignment.size(); ++i) {
    const auto& p = c.grid->node(i);
    x0.data.push_back(p[0]);
    x1.data.push_back(p[1]);
    member.data.push_back(c.assignment[i]);
  }
  return {x0, x1, member};
}

}  // namespace kframe
