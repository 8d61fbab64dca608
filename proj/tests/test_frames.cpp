#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kframe/frames.hpp"
#include "kframe/scenarios.hpp"

using namespace kframe;

namespace {

const testing::FockSetting& fock() {
  static const testing::FockSetting s = testing::make_fock_setting();
  return s;
}

PointFamily fock_lattice(double h) { return square_lattice(fock_group(), h, 10.0); }

const DualResult& fock_dual() {
  static const DualResult r = [] {
    const PointFamily l = fock_lattice(0.6);
    return dual_frame_molecules(fock().ctx, l, testing::lattice_tau(l.size(), 0.6), fock().theta);
  }();
  return r;
}

PointFamily line_family(std::vector<double> xs) {
  std::vector<GroupPoint> p;
  for (double x : xs) p.emplace_back(x);
  return PointFamily(GroupSpec::real_line(), p);
}

PointFamily integers(int lo, int hi) {
  std::vector<double> xs;
  for (int k = lo; k <= hi; ++k) xs.push_back(k);
  return line_family(xs);
}

PointFamily fock_pair(double d) { return PointFamily(fock_group(), {GroupPoint(0.0, 0.0), GroupPoint(d, 0.0)}); }

GridFunction fock_disp_envelope() {
  static const GridFunction e = fock_envelope(QuadratureGrid::centered(fock_group(), {12, 12}, {24, 24}, false));
  return e;
}

}  // namespace

TEST_CASE("Gramians") {
  const Kernel sinc = bandlimited_kernel(0.5, 0.0);
  const PointFamily z = integers(-8, 8);
  const VectorSystem shannon = kernel_system(sinc, z, std::vector<double>(z.size(), 1.0), SystemKind::KernelSamples);
  auto disp = QuadratureGrid::centered(GroupSpec::real_line(), {20.5, 0.5}, {41, 0}, false);
  const CDMatrix g = gramian(shannon, disp);
  CHECK(gap_to_identity(g.entries) < 1e-6);

  // Quadrature oracle: <k_m, k_n> integrated on a long fine grid.
  auto line = QuadratureGrid::make(GroupSpec::real_line(), Window{{-400, 0}, {400, 1}}, {80000, 1});
  const GridFunction a = shannon.member(8, line), b = shannon.member(9, line);
  cplx ip = 0.0;
  for (std::size_t i = 0; i < line->size(); ++i)
    ip += a.values(static_cast<Eigen::Index>(i)) * std::conj(b.values(static_cast<Eigen::Index>(i))) * line->weight(i);
  CHECK(std::abs(ip) < 2e-3);

  const Eigen::MatrixXcd dg = fock_dual().system.gram();
  CHECK((dg - dg.adjoint()).cwiseAbs().maxCoeff() < 1e-8);

  // Samples finer than the displacement cells, so every bin of the fitted envelope is hit.
  const GroupSpec fg = fock_group();
  const PointFamily l = square_lattice(fg, 1.0, 2.0);
  const VectorSystem ks = kernel_system(fock_kernel(), l, std::vector<double>(l.size(), 1.0), SystemKind::KernelSamples);
  auto samples = QuadratureGrid::make(fg, Window{{-7, -7}, {7, 7}}, {140, 140});
  auto fdisp = QuadratureGrid::centered(fg, {7, 7}, {14, 14}, false);
  const MoleculeCertificate kc = molecule_certify(ks, samples->nodes(), fdisp, Weight::constant(), 4.0, 1e-3);
  const CDMatrix kg = gramian(ks, fdisp, &kc);
  CHECK(kg.soundness().pass);
  CHECK(gap_to_identity(kg.entries) > 0.0);
}

TEST_CASE("frame bounds") {
  const KernelSpan& span = fock().ctx->span();
  std::vector<double> dev;
  for (double h : {0.9, 0.6, 0.4}) {
    const PointFamily l = fock_lattice(h);
    const AlmostTight t = almost_tight_frame(span, l, testing::lattice_tau(l.size(), h));
    CHECK(t.report.lower <= t.report.upper);
    CHECK(t.report.dimension == span.rank());
    dev.push_back(t.report.deviation());
  }
  CHECK(dev[1] < dev[0]);
  CHECK(dev[2] < dev[1]);
  CHECK(dev[2] <= 0.1);

  const PointFamily one(fock_group(), {GroupPoint(0.0, 0.0)});
  const AlmostTight single = almost_tight_frame(span, one, std::vector<double>{1.0});
  CHECK(single.report.lower == 0.0);
  CHECK_FALSE(single.report.is_frame());
  const AlmostTight none = almost_tight_frame(span, PointFamily(fock_group(), {}), std::vector<double>{});
  CHECK(none.report.lower == 0.0);
  CHECK(none.report.members == 0);
}

TEST_CASE("tightness prediction from the continuity profile") {
  const TightnessPrediction p = predicted_tightness(0.01, fock().theta);
  CHECK(p.theta_left_norm > 0.0);
  CHECK(p.epsilon_hat == doctest::Approx(0.01 * (1 + p.theta_left_norm)));
}

TEST_CASE("operator kernel of weighted kernel samples obeys its envelope") {
  const PointFamily l = fock_lattice(0.6);
  const LocalizedKernel h = frame_operator_kernel(fock().ctx, l, testing::lattice_tau(l.size(), 0.6), fock().theta);
  CHECK(h.soundness().pass);
}

TEST_CASE("dual frames of molecules") {
  const DualResult& r = fock_dual();
  CHECK(r.gate_status == "passed");
  REQUIRE(r.holo.has_value());
  CHECK(r.holo->soundness.pass);
  CHECK_FALSE(r.dense_fallback);
  CHECK(r.residual <= 1e-6);
  CHECK(r.cert.pass);
  CHECK(r.cert.tail_max < 1e-3);
  CHECK(r.cert.dominance_residual <= 0.0);

  // Out-of-sample reproduction of k_mu.
  const KernelSpan& span = fock().ctx->span();
  const PointFamily l = fock_lattice(0.6);
  const Eigen::MatrixXcd a = span.kernel_coords(l.points());
  for (const GroupPoint mu : {GroupPoint(0.33, -0.71), GroupPoint(-1.2, 0.45)}) {
    const Eigen::VectorXcd c = span.kernel_coords({mu}).col(0);
    CHECK((r.coords * (a.adjoint() * c) - c).norm() <= 1e-6 * c.norm());
  }

  // Bessel bound from the molecule envelope.
  CHECK(r.output_frame.upper <= std::pow(synthesis_norm_bound(r.cert.phi, l), 2));

  // Reconstructed kernel sum_l h_l(x) conj k_l(y) equals k on the sampled span.
  const Eigen::MatrixXcd& e = fock().ctx->eval();
  const Eigen::MatrixXcd rec = e * r.coords * a.adjoint() * e.adjoint();
  CHECK((rec - e * e.adjoint()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dual of an orthonormal kernel basis") {
  const GroupSpec r = GroupSpec::real_line();
  const Kernel sinc = bandlimited_kernel(0.5, 0.0);
  const PointFamily z = integers(-10, 10);
  auto span = std::make_shared<const KernelSpan>(sinc, z.points());
  auto disp = QuadratureGrid::centered(r, {30, 0.5}, {60, 0}, false);
  auto ctx = std::make_shared<const SpanContext>(span, disp);
  const GridFunction theta = radial_envelope(disp, [](double t) { return bandlimited_profile(0.5, 0.0, t); });
  DualOptions opt;
  opt.dense_fallback = true;
  opt.threshold = 1.0;
  const DualResult d = dual_frame_molecules(ctx, z, std::vector<double>(z.size(), 1.0), theta, opt);
  const Eigen::MatrixXcd a = span->kernel_coords(z.points());
  CHECK((d.coords - a).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(d.residual < 1e-10);
}

TEST_CASE("tight frames") {
  const PointFamily l = fock_lattice(0.6);
  const DualResult t = tight_frame_molecules(fock().ctx, l, testing::lattice_tau(l.size(), 0.6), fock().theta);
  CHECK(t.residual <= 1e-5);
  CHECK(t.output_frame.lower == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(t.output_frame.upper == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(t.cert.dominance_residual <= 0.0);
}

TEST_CASE("canonical duals") {
  const GroupSpec g = fock_group();
  const PointFamily l = fock_lattice(0.6);
  // The cells of the 0.6-lattice of [-10, 10]^2 tile [-9.9, 9.9]^2 exactly.
  auto grid = QuadratureGrid::make(g, Window{{-9.9, -9.9}, {9.9, 9.9}}, {66, 66});
  const Neighborhood cell = square_cell(g, 0.6);
  const DisjointCover cover = disjoint_cover(l, cell, grid);
  const UniformityReport u = uniformity(l, cell, grid, 6, {cover});
  CHECK(u.bound == doctest::Approx(1.0).epsilon(1e-12));
  DualOptions opt;
  const DualResult c = canonical_dual(fock().ctx, l, cover, u.bound, 0.05, fock().theta, opt);
  CHECK(c.residual <= 1e-6);
  CHECK(c.cert.pass);

  // Any other dual of the same kernels has larger coefficients.
  std::vector<double> tau = testing::lattice_tau(l.size(), 0.6);
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] *= 1.0 + 0.15 * std::sin(3.0 * static_cast<double>(i));
  DualOptions dense;
  dense.dense_fallback = true;
  const DualResult other = dual_frame_molecules(fock().ctx, l, tau, fock().theta, dense);
  CHECK(other.residual <= 1e-6);
  const MinimalityReport m = coefficient_minimality(fock().ctx->span(), c.coords, other.coords, 20, 3);
  CHECK(m.trials == 20);
  CHECK(m.violations == 0);
  CHECK(m.worst_ratio <= 1.0 + 1e-12);

  try {
    canonical_dual(fock().ctx, l, cover, 1.8, 0.1, fock().theta, opt);
    FAIL("uniformity gate accepted 1.8 against 1.1");
  } catch (const GateFailure& e) {
    CHECK(e.gate == "canonical_dual.uniformity");
    CHECK(e.measured == 1.8);
  }
}

TEST_CASE("molecule certificates") {
  const PointFamily l = fock_lattice(0.6);
  const VectorSystem k = kernel_system(fock_kernel(), l, std::vector<double>(l.size(), 1.0), SystemKind::KernelSamples);
  const MoleculeCertificate c = molecule_certify(k, fock().ctx->samples(), fock().ctx->displacement(), Weight::constant(), 4.0, 1e-3);
  CHECK(c.pass);
  CHECK(c.dominance_residual <= 0.0);
  for (Eigen::Index i = 0; i < c.phi.values.size(); ++i) CHECK(std::abs(c.phi.values(i)) <= std::abs(fock().theta.values(i)) + 1e-15);

  // One member carries a far-away atom.
  const KernelSpan& span = fock().ctx->span();
  Eigen::MatrixXcd coords = span.kernel_coords(l.points());
  coords.col(0) += span.kernel_coords({GroupPoint(2.5, 2.5)}).col(0);
  const VectorSystem bad = span_system(span, l, coords, SystemKind::Dual);
  const MoleculeCertificate b = molecule_certify(bad, fock().ctx->samples(), fock().ctx->displacement(), Weight::constant(), 4.0, 1e-3);
  CHECK_FALSE(b.pass);
  CHECK(b.tail_max > 1e-3);
}

TEST_CASE("almost orthogonal Riesz sequences") {
  const Kernel k = fock_kernel();
  const Neighborhood sep = Neighborhood::box({-0.45, -0.45}, {0.45, 0.45}, Edges::Open);
  const RieszResult one = almost_orthogonal_riesz(k, PointFamily(fock_group(), {GroupPoint(1.0, 2.0)}), sep);
  CHECK(one.report.lower == doctest::Approx(1.0));
  CHECK(one.report.upper == doctest::Approx(1.0));
  double last = std::numeric_limits<double>::infinity();
  for (double d : {1.0, 2.0, 3.0, 4.0}) {
    const RieszResult r = almost_orthogonal_riesz(k, fock_pair(d), sep);
    const double o = std::exp(-d * d / 2);
    CHECK(r.report.lower == doctest::Approx(1 - o).epsilon(1e-12));
    CHECK(r.report.upper == doctest::Approx(1 + o).epsilon(1e-12));
    CHECK(r.gap == doctest::Approx(o).epsilon(1e-12));
    CHECK(r.report.ratio() < last);
    last = r.report.ratio();
  }
  CHECK_THROWS(almost_orthogonal_riesz(k, fock_pair(0.5), sep));
}

TEST_CASE("biorthogonal systems and interpolation") {
  const Kernel k = fock_kernel();
  const GridFunction theta = fock_disp_envelope();
  const PointFamily single(fock_group(), {GroupPoint(0.5, 0.5)});
  const BiorthogonalResult s = biorthogonal_system(k, single, theta);
  CHECK(std::abs(s.system.coeffs(0, 0) - 1.0) < 1e-14);

  const PointFamily pair = fock_pair(3.0);
  RieszOptions dense;
  dense.dense_fallback = true;
  const BiorthogonalResult b = biorthogonal_system(k, pair, theta, dense);
  CHECK(b.dense_fallback);
  CHECK(b.error <= 1e-8);
  const VectorSystem ks = kernel_system(k, pair, {1.0, 1.0}, SystemKind::KernelSamples);
  CHECK(gap_to_identity(cross_gram(ks, b.system)) <= 1e-8);
  const Eigen::MatrixXcd g = k.matrix(pair.points(), pair.points());
  CHECK((b.system.coeffs - g.inverse()).cwiseAbs().maxCoeff() <= 1e-8);

  const double lower = riesz_bounds(ks).lower;
  Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(2);
  unit(0) = 1.0;
  const Interpolant fu = interpolate(b.system, unit, lower);
  CHECK(std::abs(fu.node_values(0) - 1.0) < 1e-12);
  CHECK(std::abs(fu.node_values(1)) < 1e-12);
  Eigen::VectorXcd a(2);
  a << cplx(0.3, -1.2), cplx(2.0, 0.7);
  const Interpolant fa = interpolate(b.system, a, lower);
  CHECK(fa.node_error <= 1e-8);
  CHECK(fa.norm <= fa.norm_bound * (1 + 1e-12));
  const Interpolant f0 = interpolate(b.system, Eigen::VectorXcd::Zero(2), lower);
  CHECK(f0.coeffs.norm() == 0.0);
  CHECK(f0.evaluate({GroupPoint(0.2, 0.1)}).norm() == 0.0);
  CHECK_THROWS(interpolate(b.system, Eigen::VectorXcd::Zero(3), lower));

  // Spacing 4 passes the calculus gate.
  const BiorthogonalResult h = biorthogonal_system(k, square_lattice(fock_group(), 4.0, 8.0), theta);
  REQUIRE(h.holo.has_value());
  CHECK(h.holo->soundness.pass);
  CHECK(h.error <= 1e-8);
  CHECK_THROWS_AS(biorthogonal_system(k, pair, theta), GateFailure);
}

TEST_CASE("orthonormalization") {
  const Kernel sinc = bandlimited_kernel(0.5, 0.0);
  const PointFamily z = integers(-5, 5);
  auto rd = QuadratureGrid::centered(GroupSpec::real_line(), {20, 0.5}, {40, 0}, false);
  const GridFunction st = radial_envelope(rd, [](double t) { return bandlimited_profile(0.5, 0.0, t); });
  RieszOptions fallback;
  fallback.dense_fallback = true;
  const BiorthogonalResult id = orthonormalize(sinc, z, st, fallback);
  CHECK((id.system.coeffs - Eigen::MatrixXcd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-10);

  const Kernel k = fock_kernel();
  const PointFamily pair = fock_pair(3.0);
  const BiorthogonalResult o = orthonormalize(k, pair, fock_disp_envelope(), fallback);
  CHECK(o.error <= 1e-8);
  CHECK(gap_to_identity(o.system.gram()) <= 1e-8);
  // g_0 is not a multiple of k_{lambda_0}: it carries a component along k_{lambda_1}.
  CHECK(std::abs(o.system.coeffs(1, 0)) > 1e-3);

  const BiorthogonalResult h = orthonormalize(k, square_lattice(fock_group(), 4.0, 8.0), fock_disp_envelope());
  REQUIRE(h.holo.has_value());
  CHECK(h.error <= 1e-8);
}
