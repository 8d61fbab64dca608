#include <doctest.h>

#include <cmath>
#include <random>

#include "kframe/pointset.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;

TEST_CASE("Fock kernel") {
  const Kernel k = fock_kernel();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<GroupPoint> pts;
  for (int i = 0; i < 5; ++i) pts.emplace_back(u(rng), u(rng));
  for (const auto& z : pts) {
    CHECK(std::abs(k(z, z) - 1.0) < 1e-14);
    for (const auto& w : pts)
      CHECK(std::abs(k(z, w)) == doctest::Approx(std::exp(-(std::pow(z[0] - w[0], 2) + std::pow(z[1] - w[1], 2)) / 2)).epsilon(1e-12));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(k.matrix(pts, pts));
  CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
  CHECK(fock_group().haar_scale() == doctest::Approx(1.0 / M_PI));
  CHECK(std::abs(k.gamma(pts[0], pts[1])) == doctest::Approx(1.0));
  CHECK(fock_kernel(FockPhase::Trivial).gamma(pts[0], pts[1]) == cplx(1.0));
}

TEST_CASE("bandlimited kernel") {
  const Kernel k = bandlimited_kernel(1.0, 0.1);
  for (double x : {-3.0, 0.0, 1.7}) CHECK(k(GroupPoint(x), GroupPoint(x)).real() == doctest::Approx(k(GroupPoint(0.0), GroupPoint(0.0)).real()));
  CHECK(k(GroupPoint(1.3), GroupPoint(0.2)) == k(GroupPoint(2.1), GroupPoint(1.0)));
  CHECK(bandlimited_kernel(0.5, 0.0)(GroupPoint(3.0), GroupPoint(0.0)).real() == doctest::Approx(0.0).scale(1.0));
  CHECK(bandlimited_profile(1.0, 0.1, 0.0) >= bandlimited_profile(1.0, 0.1, 5.0));
}

TEST_CASE("wavelet coefficients") {
  for (MotherWavelet m : {MotherWavelet::MexicanHat, MotherWavelet::Poisson}) {
    const WaveletSpec w = wavelet_spec(m);
    CHECK(wavelet_coefficient(w, 0.0, 1.0) == doctest::Approx(w.norm_sq).epsilon(1e-12));
    CHECK(w.calderon == doctest::Approx(calderon_integral(w, 1e-6, 200.0)).epsilon(1e-4));
    for (const auto& [b, a] : std::vector<std::pair<double, double>>{{0.3, 1.4}, {-2.0, 0.6}, {1.0, 3.0}}) {
      // The Poisson wavelet decays like t^-2, so the line integral needs a long span.
      CHECK(wavelet_coefficient(w, b, a) == doctest::Approx(wavelet_coefficient_quadrature(w, b, a, 400.0, 400000)).epsilon(1e-6).scale(w.norm_sq));
      // |V(x^-1)| = |V(x)|
      CHECK(std::abs(wavelet_coefficient(w, -b / a, 1.0 / a)) == doctest::Approx(std::abs(wavelet_coefficient(w, b, a))).epsilon(1e-10));
    }
  }
}

TEST_CASE("wavelet kernel") {
  const GroupSpec g = affine_positive_group();
  for (MotherWavelet m : {MotherWavelet::MexicanHat, MotherWavelet::Poisson}) {
    const WaveletSpec w = wavelet_spec(m);
    const Kernel k = wavelet_kernel(w);
    auto grid = QuadratureGrid::make_chart(g, {-3, -2}, {3, 2}, {9, 9}, false);
    double lo = 1e300, hi = 0.0;
    for (const auto& x : grid->nodes()) {
      lo = std::min(lo, k(x, x).real());
      hi = std::max(hi, k(x, x).real());
    }
    CHECK((hi - lo) / hi <= 1e-6);

    auto chart = QuadratureGrid::make_chart(g, {-40, -6}, {40, 6}, {400, 120}, false);
    const std::vector<GroupPoint> probes{g.identity(), GroupPoint(0.5, 1.3), GroupPoint(-1.0, 0.7), GroupPoint(2.0, 2.0)};
    CHECK(wavelet_self_consistency(w, *chart, probes) <= 1e-3);

    const double v0 = wavelet_coefficient(w, 0.0, 1.0);
    for (const auto& [b, a] : std::vector<std::pair<double, double>>{{40.0, 1.0}, {-40.0, 1.0}, {0.0, std::exp(6.0)}, {0.0, std::exp(-6.0)}})
      CHECK(std::abs(wavelet_coefficient(w, b, a)) / v0 < 1e-3);
  }
}

TEST_CASE("admissibility") {
  const Admissibility ok = check_admissible(wavelet_spec(MotherWavelet::MexicanHat).psi_hat);
  CHECK(ok.admissible);
  const Admissibility bad = check_admissible([](double w) { return std::exp(-w * w); });
  CHECK_FALSE(bad.admissible);
  WaveletSpec gauss = wavelet_spec(MotherWavelet::MexicanHat);
  gauss.psi_hat = [](double w) { return std::exp(-w * w); };
  CHECK_THROWS(wavelet_kernel(gauss));
  CHECK(parse_mother("poisson") == MotherWavelet::Poisson);
  CHECK_THROWS(parse_mother("haar"));
}

TEST_CASE("affine lattice") {
  const PointFamily l = affine_lattice(2.0, 1.0, -1, 1, -2, 2);
  CHECK(l.size() == 15);
  CHECK(affine_lattice(2.0, 1.0, -1, 1, -2, 2, true).size() == 30);
  const GroupSpec g = affine_positive_group();
  const Neighborhood cell = affine_lattice_cell(2.0, 1.0);
  auto grid = QuadratureGrid::make(g, Window{{-1.2, 0.36}, {1.2, 2.8}}, {24, 24});
  CHECK(is_dense(l, cell, *grid).dense);
  CHECK(relative_separation(l) >= 1);
  CHECK(relative_separation(l) < 15);

  // One scale row tiles b in [-2.5, 2.5], a in [2^-1/2, 2^1/2] exactly.
  const PointFamily row = affine_lattice(2.0, 1.0, 0, 0, -2, 2);
  auto tile = QuadratureGrid::make(g, Window{{-2.5, std::sqrt(0.5)}, {2.5, std::sqrt(2.0)}}, {50, 20});
  CHECK(uniformity(row, cell, tile).bound == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(affine_lattice(1.0, 1.0, 0, 1, 0, 1));
  CHECK_THROWS(affine_lattice(2.0, 0.0, 0, 1, 0, 1));
  const PointFamily w = affine_lattice(std::sqrt(2.0), 0.5, Window{{-1, 0.5}, {1, 2}});
  for (const auto& p : w.points()) {
    CHECK(std::abs(p[0]) <= 1.0 + 1e-12);
    CHECK(p[1] >= 0.5 - 1e-12);
    CHECK(p[1] <= 2.0 + 1e-12);
  }
}

TEST_CASE("square lattice") {
  CHECK(square_lattice(fock_group(), 0.5, 3.0).size() == 169);
  CHECK(square_lattice(GroupSpec::real_line(), 1.0, 5.0).size() == 11);
  CHECK(square_cell(GroupSpec::plane(), 0.5).measure(GroupSpec::plane()) == doctest::Approx(0.25));
}

TEST_CASE("every scenario kernel has bounded diagonal and a finite windowed envelope norm") {
  struct Case {
    Kernel k;
    GridPtr samples;
    GridPtr disp;
  };
  const GroupSpec a = affine_positive_group();
  std::vector<Case> cases{
      {fock_kernel(), QuadratureGrid::make(fock_group(), Window{{-2, -2}, {2, 2}}, {10, 10}), QuadratureGrid::centered(fock_group(), {6, 6}, {12, 12}, false)},
      {bandlimited_kernel(1.0, 0.1), QuadratureGrid::make(GroupSpec::real_line(), Window{{-3, 0}, {3, 1}}, {30, 1}), QuadratureGrid::centered(GroupSpec::real_line(), {8, 0.5}, {80, 0}, false)},
      {wavelet_kernel(wavelet_spec(MotherWavelet::MexicanHat)), QuadratureGrid::make_chart(a, {-2, -1}, {2, 1}, {10, 10}, false), QuadratureGrid::centered(a, {8, 3}, {16, 12}, false)},
  };
  for (const Case& c : cases) {
    CHECK(check_bd(c.k, *c.samples).pass);
    const EnvelopeFit fit = fit_envelope(c.k, *c.samples, c.disp);
    for (double s : {0.0, 1.0}) {
      const AmalgamReport r = amalgam_norms(fit.theta, Weight::polynomial(c.k.group, s));
      CHECK(std::isfinite(r.norm_two_sided));
      CHECK(r.norm_two_sided > 0.0);
    }
  }
}
