#include <doctest.h>

#include <cmath>
#include <random>

#include "kframe/group.hpp"

using namespace kframe;

namespace {

GroupPoint random_point(const GroupSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  if (g.id() == GroupId::Affine) {
    const double a = std::exp(u(rng)) * (u(rng) < 0 ? -1.0 : 1.0);
    return {u(rng), a};
  }
  return {u(rng), g.dim() == 2 ? u(rng) : 0.0};
}

void close(const GroupPoint& a, const GroupPoint& b, double tol = 1e-12) {
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(tol));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(tol));
}

}  // namespace

TEST_CASE("affine multiplication and inverse") {
  const GroupSpec g = GroupSpec::affine();
  close(g.mul({1, 2}, {3, 4}), {7, 8});
  close(g.mul({2, 3}, g.inv({2, 3})), {0, 1});
  close(g.inv({2, 4}), {-0.5, 0.25});
  CHECK_THROWS_AS(g.mul({1, 0}, {1, 1}), DomainError);
}

TEST_CASE("abelian laws") {
  const GroupSpec r = GroupSpec::real_line();
  close(r.mul(GroupPoint(0.5), GroupPoint(0.0)), GroupPoint(0.5));
  close(r.inv(GroupPoint(3.0)), GroupPoint(-3.0));
  close(GroupSpec::plane().inv({1, -2}), {-1, 2});
}

TEST_CASE("associativity and modular homomorphism on samples") {
  std::mt19937_64 rng(3);
  for (const GroupSpec& g : {GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()}) {
    CHECK(g.modular(g.identity()) == 1.0);
    for (int t = 0; t < 200; ++t) {
      const GroupPoint x = random_point(g, rng), y = random_point(g, rng), z = random_point(g, rng);
      const GroupPoint l = g.mul(g.mul(x, y), z), r = g.mul(x, g.mul(y, z));
      CHECK(std::abs(l[0] - r[0]) <= 1e-12 * (1 + std::abs(l[0])));
      CHECK(std::abs(l[1] - r[1]) <= 1e-12 * (1 + std::abs(l[1])));
      CHECK(g.modular(g.mul(x, y)) == doctest::Approx(g.modular(x) * g.modular(y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("affine modular function is 1/|a|") {
  const GroupSpec g = GroupSpec::affine();
  CHECK(g.modular({3.0, 4.0}) == doctest::Approx(0.25));
  CHECK(g.modular({3.0, -0.5}) == doctest::Approx(2.0));
}

TEST_CASE("default neighbourhoods are symmetric") {
  std::mt19937_64 rng(5);
  for (const GroupSpec& g : {GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()}) {
    for (const auto& x : g.q().sample(g, 9)) CHECK(g.q().contains(g, g.inv(x)));
    for (int t = 0; t < 500; ++t) {
      const GroupPoint x = random_point(g, rng);
      CHECK(g.q().contains(g, x) == g.q().contains(g, g.inv(x)));
    }
  }
}

TEST_CASE("midpoint grids") {
  auto r = QuadratureGrid::make(GroupSpec::real_line(), Window{{-1, 0}, {1, 1}}, {4, 1});
  REQUIRE(r->size() == 4);
  const double nodes[] = {-0.75, -0.25, 0.25, 0.75};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r->node(i)[0] == doctest::Approx(nodes[i]));
    CHECK(r->weight(i) == doctest::Approx(0.5));
  }
  auto p = QuadratureGrid::make(GroupSpec::plane(), Window{{0, 0}, {1, 1}}, {2, 2});
  REQUIRE(p->size() == 4);
  for (double w : p->weights()) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("affine grid weights follow the Haar measure") {
  const GroupSpec g = GroupSpec::affine();
  // One log-cell on b in [0,1], a in [1,e]: midpoint weight exp(-1/2); refinement converges to 1 - 1/e.
  auto one = QuadratureGrid::make(g, Window{{0, 1}, {1, std::exp(1.0)}}, {1, 1});
  CHECK(one->weight(0) == doctest::Approx(std::exp(-0.5)));
  double prev = 0.0;
  for (int n : {8, 16, 32, 64}) {
    auto grid = QuadratureGrid::make(g, Window{{0, 1}, {1, std::exp(1.0)}}, {2, n});
    const double total = grid->total_measure();
    CHECK(std::abs(total - (1.0 - std::exp(-1.0))) < 2.0 / (n * n));
    if (prev > 0.0) CHECK(std::abs(total - prev) < 1e-2);
    prev = total;
  }
  CHECK_THROWS_AS(QuadratureGrid::make(g, Window{{0, -1}, {1, 1}}, {2, 2}), DomainError);
}

TEST_CASE("right translation scales integrals by the modular function") {
  const GroupSpec g = GroupSpec::affine();
  auto grid = QuadratureGrid::make_chart(g, {-12, -5}, {12, 5}, {240, 200}, false);
  auto f = [](const GroupPoint& y) {
    const double s = std::log(std::abs(y[1]));
    return std::exp(-y[0] * y[0] - 2.0 * s * s);
  };
  const GroupPoint x{0.3, 1.7};
  double plain = 0.0, shifted = 0.0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    plain += f(grid->node(i)) * grid->weight(i);
    shifted += f(g.mul(grid->node(i), x)) * grid->weight(i);
  }
  CHECK(shifted == doctest::Approx(g.modular(g.inv(x)) * plain).epsilon(1e-3));
}

TEST_CASE("weight checks") {
  const GroupSpec r = GroupSpec::real_line();
  auto grid = QuadratureGrid::make(r, Window{{-4, 0}, {4, 1}}, {33, 1});
  const WeightCheck c1 = check_weight(r, Weight::constant(), *grid);
  CHECK(c1.pass);
  CHECK(c1.max_violation == 0.0);
  CHECK(check_weight(r, Weight::polynomial(r, 1.0), *grid).pass);
  const Weight decaying{[](const GroupPoint& x) { return std::exp(-std::abs(x[0])); }, "exp(-|x|)"};
  CHECK_FALSE(check_weight(r, decaying, *grid).pass);
  const GroupSpec a = GroupSpec::affine();
  auto ag = QuadratureGrid::make(a, Window{{-2, 0.25}, {2, 4}}, {9, 9});
  CHECK(check_weight(a, Weight::polynomial(a, 2.0), *ag).pass);
}
