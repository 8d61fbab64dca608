#include <doctest.h>

#include <cmath>
#include <random>

#include "kframe/pointset.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;

namespace {

const GroupSpec R = GroupSpec::real_line();

PointFamily line_points(std::vector<double> xs) {
  std::vector<GroupPoint> p;
  for (double x : xs) p.emplace_back(x);
  return PointFamily(R, p);
}

PointFamily integers(int lo, int hi, int step = 1) {
  std::vector<double> xs;
  for (int k = lo; k <= hi; k += step) xs.push_back(k);
  return line_points(xs);
}

GridPtr line(double lo, double hi, int n) { return QuadratureGrid::make(R, Window{{lo, 0}, {hi, 1}}, {n, 1}); }

Neighborhood interval(double lo, double hi, Edges e) { return Neighborhood::box({lo, -1}, {hi, 1}, e); }

void check_cover(const PointFamily& lambda, const Neighborhood& u, const DisjointCover& c) {
  const GroupSpec& g = lambda.group();
  REQUIRE(c.assignment.size() == c.grid->size());
  std::vector<double> m(lambda.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < c.grid->size(); ++i) {
    const int a = c.assignment[i];
    REQUIRE(a >= 0);
    REQUIRE(a < static_cast<int>(lambda.size()));
    CHECK(u.contains(g, g.left_quotient(lambda[static_cast<std::size_t>(a)], c.grid->node(i))));
    m[static_cast<std::size_t>(a)] += c.grid->weight(i);
    total += c.grid->weight(i);
  }
  for (std::size_t k = 0; k < m.size(); ++k) CHECK(c.measures[k] == doctest::Approx(m[k]).epsilon(1e-12));
  CHECK(std::abs(c.total() - c.grid->total_measure()) <= 1e-10 * (1 + total));
}

}  // namespace

TEST_CASE("relative separation counts") {
  CHECK(relative_separation(integers(-5, 5)) == 2);
  CHECK(relative_separation(line_points({0.3, 0.3, 0.3, 4.0})) >= 3);
  CHECK(relative_separation(line_points({0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})) == 10);
}

TEST_CASE("relative separation is monotone and translation invariant") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-6, 6);
  std::vector<double> xs;
  for (int i = 0; i < 25; ++i) xs.push_back(u(rng));
  const PointFamily lambda = line_points(xs);
  const int base = relative_separation(lambda);
  CHECK(relative_separation(lambda.appended(GroupPoint(u(rng)))) >= base);
  CHECK(relative_separation(lambda.left_translate(GroupPoint(0.37))) == base);

  const PointFamily lat = affine_lattice(2.0, 1.0, Window{{-6, 0.2}, {6, 5}});
  const int a0 = relative_separation(lat);
  CHECK(a0 >= 1);
  CHECK(relative_separation(lat.left_translate(GroupPoint(0.5, 1.0))) == a0);
  CHECK(relative_separation(lat.left_translate(GroupPoint(-1.0, 2.0))) == a0);
}

TEST_CASE("the three counting expressions agree") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3, 3);
  const GroupSpec a = affine_positive_group();
  std::vector<GroupPoint> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(a.from_chart({{u(rng), u(rng) / 2}, 1}));
  const PointFamily lambda(a, pts);
  for (int t = 0; t < 200; ++t) {
    const RelCounts c = rel_expressions(lambda, a.q(), a.from_chart({{u(rng), u(rng) / 2}, 1}));
    CHECK(c.in_xq == c.indicator_xq);
    CHECK(c.in_xq == c.indicator_lq);
  }
}

TEST_CASE("density") {
  const Neighborhood half = interval(-0.5, 0.5, Edges::Closed);
  auto g = line(-5, 5, 200);
  CHECK(is_dense(integers(-6, 6), half, *g).dense);
  const DensityReport r = is_dense(integers(-6, 6, 2), half, *g);
  CHECK_FALSE(r.dense);
  REQUIRE_FALSE(r.uncovered.empty());
  for (std::size_t i : r.uncovered) {
    const double x = g->node(i)[0];
    const double odd = 2 * std::floor(x / 2) + 1;
    CHECK(std::abs(x - odd) < 0.5);
  }
  const double a = 2.0, b = 1.0;
  const GroupSpec ag = affine_positive_group();
  auto grid = QuadratureGrid::make(ag, Window{{-4, 0.5}, {4, 2}}, {40, 20});
  const PointFamily lat = affine_lattice(a, b, Window{{-40, 0.1}, {40, 10}});
  CHECK(is_dense(lat, affine_lattice_cell(a, b), *grid).dense);
}

TEST_CASE("separation") {
  CHECK(is_separated(integers(-6, 6, 2), interval(-0.5, 0.5, Edges::Open)));
  CHECK_FALSE(is_separated(line_points({0, 1, 1, 3}), interval(-0.5, 0.5, Edges::Open)));
  CHECK_FALSE(is_separated(integers(-6, 6), interval(-0.6, 0.6, Edges::Open)));
  CHECK(is_separated(integers(-6, 6), interval(-0.5, 0.5, Edges::HalfOpen)));
}

TEST_CASE("disjoint covers") {
  const Neighborhood cell = interval(-0.5, 0.5, Edges::HalfOpen);
  auto g = line(-4, 4, 160);
  const PointFamily z = integers(-5, 5);
  const DisjointCover c = disjoint_cover(z, cell, g);
  check_cover(z, cell, c);
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (std::abs(z[k][0]) <= 3) CHECK(c.measures[k] == doctest::Approx(1.0));
  }

  auto w = line(-0.5, 1.0, 150);
  const PointFamily two = line_points({0.0, 0.5});
  const DisjointCover d = disjoint_cover(two, interval(-0.5, 0.5, Edges::Closed), w);
  CHECK(d.measures[0] == doctest::Approx(1.0));
  CHECK(d.measures[1] == doctest::Approx(0.5));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4.5, 4.5);
  std::vector<double> xs;
  for (double x = -4.5; x <= 4.5; x += 0.7) xs.push_back(x + 0.1 * u(rng) / 4.5);
  const PointFamily jit = line_points(xs);
  const Neighborhood wide = interval(-0.6, 0.6, Edges::Closed);
  std::vector<std::size_t> order(jit.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  const DisjointCover fwd = disjoint_cover(jit, wide, g), rev = disjoint_cover(jit, wide, g, order);
  check_cover(jit, wide, fwd);
  check_cover(jit, wide, rev);
  CHECK(fwd.assignment != rev.assignment);
  CHECK(fwd.total() == doctest::Approx(rev.total()).epsilon(1e-12));

  CHECK_THROWS_AS(disjoint_cover(integers(-4, 4, 2), cell, g), NotDenseError);
}

TEST_CASE("separated dense sets") {
  const Neighborhood v = interval(-0.5, 0.5, Edges::Open), u = interval(-1, 1, Edges::Open);
  auto g = line(-5, 5, 500);
  const PointFamily s = separated_dense_set(v, u, *g);
  CHECK(s.size() >= 9);
  CHECK(is_separated(s, v, g.get()));
  CHECK(is_dense(s, u, *g).dense);
  CHECK(separated_dense_set(v, u, *line(-0.2, 0.2, 20)).size() == 1);
  CHECK_THROWS(separated_dense_set(u, v, *g));

  const GroupSpec a = affine_positive_group();
  const Neighborhood av = Neighborhood::box({-0.5, -0.3}, {0.5, 0.3}, Edges::Open);
  const Neighborhood au = Neighborhood::box({-1.6, -0.7}, {1.6, 0.7}, Edges::Open);
  auto ag = QuadratureGrid::make_chart(a, {-4, -1.5}, {4, 1.5}, {40, 30}, false);
  const PointFamily as = separated_dense_set(av, au, *ag);
  CHECK(is_separated(as, av, ag.get()));
  CHECK(is_dense(as, au, *ag).dense);
}

TEST_CASE("uniformity") {
  const double h = 0.5;
  const Neighborhood cell = interval(-h / 2, h / 2, Edges::HalfOpen);
  std::vector<double> xs;
  for (int k = -9; k <= 9; ++k) xs.push_back(k * h);
  auto g = line(-4.75, 4.75, 190);
  CHECK(uniformity(line_points(xs), cell, g).bound == doctest::Approx(1.0).epsilon(1e-12));

  const Neighborhood half = interval(-0.5, 0.5, Edges::Closed);
  const PointFamily jit = line_points({0.0, 0.4, 1.0});
  auto tiny = line(-0.5, 1.5, 10);
  const double exact = uniformity_exhaustive(jit, half, *tiny);
  CHECK(exact > 1.0);
  CHECK(uniformity(jit, half, tiny).bound == doctest::Approx(exact).epsilon(1e-12));

  // A repeated point: the greedy cover leaves the copy empty; splitting its cell is admissible.
  const PointFamily dup = line_points({0.0, 0.4, 0.4, 1.0});
  CHECK(std::isinf(disjoint_cover(dup, half, tiny).ratio()));
  const UniformityReport du = uniformity(dup, half, tiny);
  CHECK(du.bound == doctest::Approx(uniformity_exhaustive(dup, half, *tiny)).epsilon(1e-12));
  CHECK_THROWS_AS(uniformity(line_points({0.0}), half, tiny), NotDenseError);
}

TEST_CASE("uniformity bound never exceeds the greedy covers") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  std::vector<double> xs;
  for (int k = -5; k <= 5; ++k) xs.push_back(0.8 * k + u(rng));
  const PointFamily lambda = line_points(xs);
  const Neighborhood nb = interval(-0.6, 0.6, Edges::Closed);
  auto g = line(-4.4, 4.4, 264);
  const UniformityReport r = uniformity(lambda, nb, g);
  CHECK(r.bound >= 1.0);
  CHECK(r.bound <= disjoint_cover(lambda, nb, g).ratio() + 1e-12);
  check_cover(lambda, nb, r.best);
  CHECK(r.best.ratio() == doctest::Approx(r.bound).epsilon(1e-12));
}

TEST_CASE("near-uniform counts") {
  CHECK(near_uniform_count(1.0) == 10);
  CHECK(near_uniform_count(0.05) == 41);
  CHECK(split_count(2.35, 10) == 23);
  CHECK(10.0 / 9.0 <= 1.5);
}

TEST_CASE("near-uniform sets") {
  const Neighborhood u = interval(-1, 1, Edges::HalfOpen);
  for (double eps : {1.0, 0.5, 0.2}) {
    auto g = line(-5, 5, 8000);
    const NearUniformResult r = near_uniform_set(u, eps, g);
    CHECK(r.n == near_uniform_count(eps));
    CHECK(r.ratio_bound == doctest::Approx(r.n / (r.n - 1.0)));
    check_cover(r.points, u, r.cover);
    CHECK(r.cover.ratio() <= r.ratio_bound + r.quantization_slack + 1e-12);
    CHECK(is_dense(r.points, u, *g).dense);
    CHECK(relative_separation(r.points) < static_cast<int>(r.points.size()) + 1);
    CHECK(uniformity(r.points, u, g, 6, {r.cover}).bound <= 1.0 + eps + r.quantization_slack);
  }
  CHECK_THROWS(near_uniform_set(u, 0.01, line(-5, 5, 20)));
}
