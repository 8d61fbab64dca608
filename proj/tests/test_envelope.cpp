#include <doctest.h>

#include <cmath>
#include <random>

#include "kframe/envelope.hpp"
#include "kframe/pointset.hpp"

using namespace kframe;

namespace {

GridPtr line(double lo, double hi, int n) { return QuadratureGrid::make(GroupSpec::real_line(), Window{{lo, 0}, {hi, 1}}, {n, 1}); }

}  // namespace

TEST_CASE("maximal functions of a peak and of constants") {
  auto g = line(-4, 4, 80);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(80);
  const std::size_t peak = g->locate(GroupPoint(0.05)).value();
  v(static_cast<Eigen::Index>(peak)) = 2.0;
  const GridFunction m = maximal_left(GridFunction::real(g, v));
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double d = std::abs(g->node(i)[0] - g->node(peak)[0]);
    if (d < 0.95) CHECK(m.values(static_cast<Eigen::Index>(i)).real() == 2.0);
    if (d > 1.15) CHECK(m.values(static_cast<Eigen::Index>(i)).real() == 0.0);
  }
  const GridFunction c = GridFunction::real(g, Eigen::VectorXd::Constant(80, 1.5));
  CHECK(maximal_left(c).magnitude().maxCoeff() == 1.5);
  CHECK(maximal_right(c).magnitude().minCoeff() == 1.5);
}

TEST_CASE("maximal function of exp(-|x|) against brute force") {
  auto g = line(-6, 6, 1200);
  const GridFunction f = GridFunction::sample(g, [](const GroupPoint& x) { return cplx(std::exp(-std::abs(x[0]))); });
  const GridFunction m = maximal_left(f);
  for (std::size_t i = 0; i < g->size(); i += 37) {
    const double x = g->node(i)[0];
    if (std::abs(x) > 4.9) continue;
    CHECK(m.values(static_cast<Eigen::Index>(i)).real() ==
          doctest::Approx(std::exp(-std::max(std::abs(x) - 1.0, 0.0))).epsilon(2e-2));
    CHECK(m.values(static_cast<Eigen::Index>(i)).real() >= std::abs(f.values(static_cast<Eigen::Index>(i))));
  }
  CHECK((maximal_right(f).values - m.values).norm() == 0.0);
}

TEST_CASE("affine maximal functions match an exhaustive neighbourhood max") {
  const GroupSpec a = GroupSpec::affine();
  auto g = QuadratureGrid::make_chart(a, {-3, -2}, {3, 2}, {24, 16}, false);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
  for (auto& x : v) x = u(rng);
  const GridFunction f = GridFunction::real(g, v);
  const GridFunction ml = maximal_left(f), mr = maximal_right(f);
  const auto probes = a.q().sample(a, 7);
  for (std::size_t i = 0; i < g->size(); i += 11) {
    // Every node y with x^-1 y in Q must be dominated.
    for (std::size_t j = 0; j < g->size(); ++j) {
      if (a.q().contains(a, a.left_quotient(g->node(i), g->node(j))))
        CHECK(ml.values(static_cast<Eigen::Index>(i)).real() >= v(static_cast<Eigen::Index>(j)));
      if (a.q().contains(a, a.mul(g->node(j), a.inv(g->node(i)))))
        CHECK(mr.values(static_cast<Eigen::Index>(i)).real() >= v(static_cast<Eigen::Index>(j)));
    }
  }
}

TEST_CASE("amalgam norms") {
  auto unit = line(-5, 5, 10);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(10);
  v(5) = 1.0;  // indicator of [0,1)
  const AmalgamReport r = amalgam_norms(GridFunction::real(unit, v), Weight::constant());
  CHECK(r.norm_left == doctest::Approx(3.0));
  CHECK(r.norm_two_sided >= r.norm_left);
  CHECK(r.norm_left >= r.l1w);
  const AmalgamReport z = amalgam_norms(GridFunction::zeros(unit), Weight::constant());
  CHECK(z.norm_two_sided == 0.0);
  CHECK(z.l1w == 0.0);
}

TEST_CASE("amalgam ordering, order identity and the sup embedding on random data") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (const GroupSpec& g : {GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()}) {
    GridPtr grid = g.dim() == 1 ? line(-5, 5, 60) : QuadratureGrid::make_chart(g, {-3, -2}, {3, 2}, {18, 12}, false);
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
      for (auto& x : v) x = u(rng) * u(rng);
      const GridFunction f = GridFunction::real(grid, v);
      const AmalgamReport r = amalgam_norms(f, Weight::polynomial(g, 1.0));
      CHECK(r.norm_left >= r.l1w);
      CHECK(r.norm_right >= r.l1w);
      CHECK(r.norm_two_sided >= r.norm_left);
      if (g.id() != GroupId::Affine) CHECK(r.order_identity);
      const AmalgamReport c = amalgam_norms(f, Weight::constant());
      CHECK(c.linf <= c.embedding_constant * c.norm_left + 1e-12);
    }
  }
}

TEST_CASE("swapping the maximal functions on the affine group converges under refinement") {
  const GroupSpec a = GroupSpec::affine();
  std::vector<double> gaps;
  for (int n : {18, 60, 120}) {
    auto grid = QuadratureGrid::make_chart(a, {-3, -2}, {3, 2}, {n, 2 * n / 3}, false);
    const GridFunction f = GridFunction::sample(grid, [&](const GroupPoint& x) {
      const ChartPoint c = a.to_chart(x);
      return cplx(std::exp(-c.s[0] * c.s[0] - 4 * c.s[1] * c.s[1]));
    });
    const AmalgamReport r = amalgam_norms(f, Weight::constant());
    CHECK(r.order_gap < 0.025);
    gaps.push_back(r.order_gap);
  }
  CHECK(gaps.back() < 0.5 * gaps.front());
}

TEST_CASE("convolution") {
  auto g = line(-4, 4, 800);
  const GridFunction box = GridFunction::sample(g, [](const GroupPoint& x) { return cplx(x[0] >= 0 && x[0] < 1 ? 1.0 : 0.0); });
  const GridFunction tri = convolve(box, box);
  for (std::size_t i = 0; i < g->size(); i += 13) {
    const double x = g->node(i)[0];
    const double exact = std::max(0.0, 1.0 - std::abs(x - 1.0));
    CHECK(std::abs(tri.values(static_cast<Eigen::Index>(i)).real() - exact) <= 2.0 / 800 * 8 + 1e-12);
  }
  // Unit mass at the identity cell reproduces g.
  Eigen::VectorXd d = Eigen::VectorXd::Zero(800);
  const std::size_t e = g->locate(GroupPoint(0.001)).value();
  d(static_cast<Eigen::Index>(e)) = 1.0 / g->weight(e);
  const GridFunction bump = GridFunction::sample(g, [](const GroupPoint& x) { return cplx(std::exp(-x[0] * x[0])); });
  const GridFunction c = convolve(GridFunction::real(g, d), bump);
  CHECK((c.values - bump.values).cwiseAbs().maxCoeff() < 0.02);
  CHECK_THROWS(convolve(bump, GridFunction::zeros(line(-4, 4, 10))));
}

TEST_CASE("convolution relation in amalgam norms on random nonnegative pairs") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  auto g = line(-6, 6, 96);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd a(96), b(96);
    for (int i = 0; i < 96; ++i) {
      const double x = g->node(static_cast<std::size_t>(i))[0];
      a(i) = u(rng) * std::exp(-x * x / 2);
      b(i) = u(rng) * std::exp(-std::abs(x));
    }
    const GridFunction f = GridFunction::real(g, a), h = GridFunction::real(g, b);
    const double lhs = amalgam_norms(convolve(f, h), Weight::constant()).norm_two_sided;
    const double rhs = amalgam_norms(f, Weight::constant()).norm_right * amalgam_norms(h, Weight::constant()).norm_left;
    CHECK(lhs <= rhs * (1 + 1e-9));
  }
}

TEST_CASE("convolution is associative up to quadrature") {
  auto g = line(-8, 8, 320);
  auto gauss = [&](double s) {
    return GridFunction::sample(g, [s](const GroupPoint& x) { return cplx(std::exp(-x[0] * x[0] / (2 * s * s))); });
  };
  const GridFunction a = gauss(0.5), b = gauss(0.7), c = gauss(0.9);
  const GridFunction l = convolve(convolve(a, b), c), r = convolve(a, convolve(b, c));
  CHECK((l.values - r.values).cwiseAbs().maxCoeff() < 2e-2 * l.values.cwiseAbs().maxCoeff());
}

TEST_CASE("synthesis bound dominates the operator norm and is homogeneous") {
  const GroupSpec r = GroupSpec::real_line();
  auto disp = QuadratureGrid::centered(r, {4.05, 0.5}, {40, 0}, false);
  const GridFunction tri = GridFunction::sample(disp, [](const GroupPoint& x) { return cplx(std::max(0.0, 1.0 - 2.0 * std::abs(x[0]))); });
  std::vector<GroupPoint> pts;
  for (int k = -5; k <= 5; ++k) pts.emplace_back(static_cast<double>(k));
  const PointFamily lambda(r, pts);
  auto sample = line(-8, 8, 640);
  const double bound = synthesis_norm_bound(tri, lambda);
  const double actual = synthesis_operator_norm(tri, lambda, *sample);
  CHECK(actual <= bound);
  const GridFunction tri2 = scale(tri, 2.0);
  CHECK(synthesis_norm_bound(tri2, lambda) == doctest::Approx(2 * bound));
  CHECK(synthesis_operator_norm(tri2, lambda, *sample) == doctest::Approx(2 * actual));

  const PointFamily one(r, {GroupPoint(0.0)});
  const GridFunction cell = GridFunction::sample(disp, [](const GroupPoint& x) { return cplx(std::abs(x[0]) < 0.3 ? 1.0 : 0.0); });
  CHECK(synthesis_operator_norm(cell, one, *sample) <= synthesis_norm_bound(cell, one));
}

TEST_CASE("discrete sum estimate against the convolution of maximal functions") {
  const GroupSpec r = GroupSpec::real_line();
  auto disp = QuadratureGrid::centered(r, {10.05, 0.5}, {100, 0}, false);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-6, 6);
  const GridFunction phi = GridFunction::sample(disp, [](const GroupPoint& x) { return cplx(std::exp(-x[0] * x[0])); });
  const GridFunction psi = GridFunction::sample(disp, [](const GroupPoint& x) { return cplx(1.0 / (1 + x[0] * x[0])); });
  std::vector<GroupPoint> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng));
  const PointFamily lambda(r, pts);
  const double c = relative_separation(lambda) / r.q().measure(r);
  const GridFunction rhs = convolve(maximal_left(psi), maximal_right(phi));
  for (int t = 0; t < 100; ++t) {
    const double x = u(rng), y = u(rng);
    double s = 0.0;
    for (const auto& l : pts) s += phi.bound_at(GroupPoint(x - l[0])) * psi.bound_at(GroupPoint(l[0] - y));
    CHECK(s <= c * rhs.bound_at(GroupPoint(x - y)) * 1.05 + 1e-9);
  }
}
