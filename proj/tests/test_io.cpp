#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "kframe/io.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "kframe_test_io";
  fs::create_directories(d);
  return d / name;
}

}  // namespace

TEST_CASE("binary columns round trip") {
  const std::vector<Column> cols{{"x", {1.0, -2.5, 1e-300, std::numeric_limits<double>::max()}}, {"y", {0.1, 0.2, 0.3, M_PI}}};
  const fs::path p = scratch("a.kfcol");
  write_columns(p.string(), cols, "atoms 4 members 2");
  std::string meta;
  const std::vector<Column> back = read_columns(p.string(), &meta);
  CHECK(meta == "atoms 4 members 2");
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "x");
  CHECK(back[0].data == cols[0].data);
  CHECK(back[1].data == cols[1].data);
}

TEST_CASE("csv round trip") {
  const std::vector<Column> cols{{"re", {0.1, 1.0 / 3.0, -7.25e-17}}, {"im", {0.0, 2.0, 1e20}}};
  const fs::path p = scratch("a.csv");
  write_csv(p.string(), cols);
  const std::vector<Column> back = read_csv(p.string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].data == cols[0].data);
  CHECK(find_column(back, "im").data == cols[1].data);
  CHECK_THROWS_AS(find_column(back, "missing"), FormatError);
}

TEST_CASE("malformed files") {
  const fs::path p = scratch("bad.kfcol");
  std::ofstream(p) << "KFCOL1\nrows 3\ncolumn x\nend\n";  // payload missing
  CHECK_THROWS_AS(read_columns(p.string()), FormatError);
  std::ofstream(p) << "not a column file\n";
  CHECK_THROWS_AS(read_columns(p.string()), FormatError);
  CHECK_THROWS_AS(read_columns(scratch("absent.kfcol").string()), FormatError);
  const fs::path c = scratch("bad.csv");
  std::ofstream(c) << "a,b\n1,2\n3\n";
  CHECK_THROWS_AS(read_csv(c.string()), FormatError);
  CHECK_THROWS(write_columns(scratch("ragged.kfcol").string(), {{"a", {1.0}}, {"b", {1.0, 2.0}}}));
}

TEST_CASE("doubles print shortest round-trip form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-320, -2.5, 123456789.0, M_PI}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("point families and grid functions") {
  const PointFamily l = affine_lattice(2.0, 1.0, -1, 1, -1, 1);
  const PointFamily back = points_from_columns(affine_positive_group(), point_columns(l));
  CHECK(back.points() == l.points());
  auto g = QuadratureGrid::make(GroupSpec::real_line(), Window{{0, 0}, {1, 1}}, {4, 1});
  const GridFunction f = GridFunction::sample(g, [](const GroupPoint& x) { return cplx(x[0], -x[0]); });
  const std::vector<Column> cols = grid_function_columns(f);
  CHECK(find_column(cols, "re").data.size() == 4);
  CHECK(find_column(cols, "im").data[0] == -0.125);
  CHECK(find_column(cols, "weight").data[0] == 0.25);
}
