#include "kframe/frames.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kframe {

std::string kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::KernelSamples:
      return "kernel_samples";
    case SystemKind::WeightedKernels:
      return "weighted_kernels";
    case SystemKind::Dual:
      return "dual";
    case SystemKind::Tight:
      return "tight";
    case SystemKind::CanonicalDual:
      return "canonical_dual";
    case SystemKind::Biorthogonal:
      return "biorthogonal";
    case SystemKind::Orthonormal:
      return "orthonormal";
  }
  return "?";
}

Eigen::MatrixXcd VectorSystem::times_coeffs(const Eigen::MatrixXcd& m) const {
  if (is_diagonal()) return m * diag.asDiagonal();
  return m * coeffs;
}

Eigen::MatrixXcd VectorSystem::dense_coeffs() const {
  if (is_diagonal()) return diag.asDiagonal();
  return coeffs;
}

Eigen::MatrixXcd VectorSystem::evaluate(const std::vector<GroupPoint>& xs) const {
  return times_coeffs(kernel.matrix(xs, atoms));
}

GridFunction VectorSystem::member(std::size_t i, GridPtr grid) const {
  const auto c = static_cast<Eigen::Index>(i);
  Eigen::VectorXcd v;
  if (is_diagonal())
    v = kernel.matrix(grid->nodes(), {atoms[i]}).col(0) * diag(c);
  else
    v = kernel.matrix(grid->nodes(), atoms) * coeffs.col(c);
  return {std::move(grid), v};
}

Eigen::MatrixXcd VectorSystem::gram() const {
  const Eigen::MatrixXcd kc = times_coeffs(kernel.matrix(atoms, atoms));
  if (is_diagonal()) return diag.conjugate().asDiagonal() * kc;
  return coeffs.adjoint() * kc;
}

VectorSystem kernel_system(const Kernel& k, const PointFamily& lambda, const std::vector<double>& scale,
                           SystemKind kind) {
  if (scale.size() != lambda.size()) throw std::invalid_argument("kernel_system: scale length mismatch");
  VectorSystem s;
  s.index = lambda;
  s.kind = kind;
  s.kernel = k;
  s.atoms = lambda.points();
  s.diag.resize(static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t i = 0; i < scale.size(); ++i) s.diag(static_cast<Eigen::Index>(i)) = scale[i];
  return s;
}

VectorSystem span_system(const KernelSpan& span, const PointFamily& index, const Eigen::MatrixXcd& coords,
                         SystemKind kind) {
  if (coords.rows() != span.rank()) throw std::invalid_argument("span_system: coordinate rows must equal the span rank");
  VectorSystem s;
  s.index = index;
  s.kind = kind;
  s.kernel = span.kernel();
  s.atoms = span.atoms();
  s.coeffs = span.basis() * coords;
  return s;
}

Eigen::MatrixXcd cross_gram(const VectorSystem& a, const VectorSystem& b) {
  const Eigen::MatrixXcd kc = a.times_coeffs(a.kernel.matrix(b.atoms, a.atoms));
  return (b.dense_coeffs().adjoint() * kc).transpose();
}

Eigen::MatrixXcd span_coords(const KernelSpan& span, const VectorSystem& s) {
  return s.times_coeffs(span.evaluation(s.atoms).adjoint());
}

namespace {

std::pair<double, double> hermitian_extremes(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return {0.0, 0.0};
  const Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

Eigen::MatrixXcd random_coords(int rank, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXcd c(rank, count);
  for (int j = 0; j < count; ++j)
    for (int i = 0; i < rank; ++i) c(i, j) = cplx(nd(rng), nd(rng));
  return c;
}

Eigen::MatrixXcd hermitian_power(const Eigen::MatrixXcd& m, double p) {
  const Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.eigenvalues().minCoeff() <= 0.0) throw std::runtime_error("dense fallback: operator is not positive definite");
  const Eigen::VectorXd d = es.eigenvalues().array().pow(p);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

GridFunction weighted_kernel_envelope(const GridFunction& theta, double factor) {
  return scale(cell_dilate(convolve(maximal_left(theta), maximal_right(theta))), factor);
}

std::size_t median_member(const std::vector<double>& measures) {
  std::vector<std::size_t> idx(measures.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return measures[a] < measures[b]; });
  return idx[idx.size() / 2];
}

// Inverts (or inverse square roots) the frame operator kernel, through the
// holomorphic calculus when the gate admits it.
void invert_frame_operator(DualResult& r, const LocalizedKernel& h, const LocalizedKernel& k, const GridFunction& theta,
                           const HoloSpec& spec, const DualOptions& opt, Eigen::MatrixXcd& out) {
  try {
    HoloKernelResult hr = holo_calculus_kernel(h, k, theta, spec, opt.weight);
    r.gate_status = "passed";
    r.gate_gap = hr.gap;
    r.gate_epsilon = hr.gate.epsilon;
    out = hr.result.op;
    r.holo = std::move(hr);
  } catch (const GateFailure& e) {
    if (!opt.dense_fallback) throw;
    r.gate_status = e.what();
    r.gate_gap = e.measured;
    r.gate_epsilon = e.limit;
    r.dense_fallback = true;
    out = hermitian_power(h.op, spec.fn == HoloSpec::Fn::InverseSqrt ? -0.5 : -1.0);
  }
}

}  // namespace

FrameReport frame_bounds(const VectorSystem& s, const KernelSpan& ambient) {
  FrameReport r;
  r.method = "frame operator on the kernel span";
  r.dimension = ambient.rank();
  r.members = s.size();
  if (s.size() == 0) return r;
  const Eigen::MatrixXcd a = span_coords(ambient, s);
  const auto [lo, hi] = hermitian_extremes(a * a.adjoint());
  r.lower = std::max(0.0, lo);
  r.upper = hi;
  return r;
}

FrameReport riesz_bounds(const VectorSystem& s) {
  FrameReport r;
  r.method = "gramian eigenvalues";
  r.dimension = static_cast<int>(s.size());
  r.members = s.size();
  if (s.size() == 0) return r;
  const auto [lo, hi] = hermitian_extremes(s.gram());
  r.lower = std::max(0.0, lo);
  r.upper = hi;
  return r;
}

CDMatrix gramian(const VectorSystem& s, GridPtr displacement, const MoleculeCertificate* cert) {
  CDMatrix m;
  m.rows = s.index;
  m.cols = s.index;
  m.entries = s.gram();
  if (cert) {
    if (cert->phi.grid != displacement) throw std::invalid_argument("gramian: certificate uses another displacement grid");
    m.envelope = cell_dilate(convolve(cert->phi, cert->phi));
  } else {
    m.envelope = GridFunction::zeros(displacement);
  }
  return m;
}

MoleculeCertificate molecule_certify(const VectorSystem& s, const std::vector<GroupPoint>& samples, GridPtr displacement,
                                     const Weight& w, double radius, double threshold) {
  MoleculeCertificate c;
  c.radius = radius;
  c.threshold = threshold;
  const GroupSpec& g = s.kernel.group;
  const Eigen::MatrixXcd v = s.evaluate(samples);
  const std::size_t m = s.size();
  std::vector<std::size_t> c1(samples.size() * m), c2(samples.size() * m);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(displacement->size()));
  for (std::size_t l = 0; l < m; ++l) {
    const GroupPoint li = g.inv(s.index[l]);
    for (std::size_t x = 0; x < samples.size(); ++x) {
      const std::size_t a = displacement->locate_clamped(g.mul(li, samples[x]));
      const std::size_t b = displacement->locate_clamped(g.mul(g.inv(samples[x]), s.index[l]));
      c1[l * samples.size() + x] = a;
      c2[l * samples.size() + x] = b;
      const double val = std::abs(v(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(l)));
      phi(static_cast<Eigen::Index>(a)) = std::max(phi(static_cast<Eigen::Index>(a)), val);
      phi(static_cast<Eigen::Index>(b)) = std::max(phi(static_cast<Eigen::Index>(b)), val);
      ++c.pairs;
    }
  }
  c.dominance_residual = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t x = 0; x < samples.size(); ++x) {
      const double val = std::abs(v(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(l)));
      const double e = std::min(phi(static_cast<Eigen::Index>(c1[l * samples.size() + x])),
                                phi(static_cast<Eigen::Index>(c2[l * samples.size() + x])));
      c.dominance_residual = std::max(c.dominance_residual, val - e);
    }
  if (c.pairs == 0) c.dominance_residual = 0.0;
  c.phi = GridFunction::real(displacement, phi);
  c.norms = amalgam_norms(c.phi, w);
  bool any = false;
  for (std::size_t i = 0; i < displacement->size(); ++i) {
    if (g.dist(displacement->node(i)) >= radius) {
      any = true;
      c.tail_max = std::max(c.tail_max, phi(static_cast<Eigen::Index>(i)));
    }
  }
  if (!any) c.tail_max = std::numeric_limits<double>::infinity();
  c.pass = any && c.tail_max <= threshold && c.dominance_residual <= 0.0;
  return c;
}

TightnessPrediction predicted_tightness(double eta_sup, const GridFunction& theta) {
  TightnessPrediction p;
  p.eta_sup = eta_sup;
  p.theta_left_norm = integral(maximal_left(symmetric_min(theta)), Weight::constant());
  p.epsilon_hat = eta_sup * (1.0 + p.theta_left_norm);
  return p;
}

AlmostTight almost_tight_frame(const KernelSpan& span, const PointFamily& lambda, const std::vector<double>& tau) {
  if (tau.size() != lambda.size()) throw std::invalid_argument("almost_tight_frame: tau length mismatch");
  std::vector<double> s(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) s[i] = std::sqrt(tau[i]);
  AlmostTight r;
  r.system = kernel_system(span.kernel(), lambda, s, SystemKind::WeightedKernels);
  r.report = frame_bounds(r.system, span);
  return r;
}

AlmostTight almost_tight_frame(const KernelSpan& span, const PointFamily& lambda, const DisjointCover& cover) {
  return almost_tight_frame(span, lambda, cover.measures);
}

LocalizedKernel frame_operator_kernel(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                      const GridFunction& theta) {
  if (tau.size() != lambda.size()) throw std::invalid_argument("frame_operator_kernel: tau length mismatch");
  const Eigen::MatrixXcd a = ctx->span().kernel_coords(lambda.points());
  Eigen::VectorXd t(static_cast<Eigen::Index>(tau.size()));
  for (std::size_t i = 0; i < tau.size(); ++i) t(static_cast<Eigen::Index>(i)) = tau[i];
  const GroupSpec& g = lambda.group();
  const double factor = (tau.empty() ? 0.0 : t.maxCoeff()) * relative_separation(lambda) / g.q().measure(g);
  LocalizedKernel h{ctx, a * t.asDiagonal() * a.adjoint(), weighted_kernel_envelope(theta, factor)};
  const Soundness s = h.soundness();
  if (!s.pass) {
    std::ostringstream os;
    os << "frame_operator_kernel: envelope violated at " << s.violations << " pairs (worst " << s.worst_excess << ")";
    throw EnvelopeViolation(os.str());
  }
  return h;
}

DualResult dual_frame_molecules(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                const GridFunction& theta, const DualOptions& opt) {
  DualResult r;
  const KernelSpan& span = ctx->span();
  const Eigen::MatrixXcd a = span.kernel_coords(lambda.points());
  const LocalizedKernel h = frame_operator_kernel(ctx, lambda, tau, theta);
  const LocalizedKernel k = reproducing_kernel(ctx, theta);
  Eigen::MatrixXcd inv;
  invert_frame_operator(r, h, k, theta, HoloSpec::inverse(), opt, inv);
  Eigen::VectorXd t(static_cast<Eigen::Index>(tau.size()));
  for (std::size_t i = 0; i < tau.size(); ++i) t(static_cast<Eigen::Index>(i)) = tau[i];
  r.coords = inv * a * t.asDiagonal();
  r.system = span_system(span, lambda, r.coords, SystemKind::Dual);
  const Eigen::MatrixXcd f = random_coords(span.rank(), opt.random_vectors, opt.seed);
  for (int j = 0; j < f.cols(); ++j) {
    const Eigen::VectorXcd c = f.col(j);
    const Eigen::VectorXcd rec1 = r.coords * (a.adjoint() * c);
    const Eigen::VectorXcd rec2 = a * (r.coords.adjoint() * c);
    r.residual = std::max({r.residual, (rec1 - c).norm() / c.norm(), (rec2 - c).norm() / c.norm()});
  }
  r.cert = molecule_certify(r.system, opt.samples.empty() ? ctx->samples() : opt.samples, ctx->displacement(),
                            opt.weight, opt.radius, opt.threshold);
  r.output_frame = frame_bounds(r.system, span);
  return r;
}

DualResult tight_frame_molecules(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                 const GridFunction& theta, const DualOptions& opt) {
  DualResult r;
  const KernelSpan& span = ctx->span();
  const Eigen::MatrixXcd a = span.kernel_coords(lambda.points());
  const LocalizedKernel h = frame_operator_kernel(ctx, lambda, tau, theta);
  const LocalizedKernel k = reproducing_kernel(ctx, theta);
  Eigen::MatrixXcd isq;
  invert_frame_operator(r, h, k, theta, HoloSpec::inverse_sqrt(), opt, isq);
  Eigen::VectorXd t(static_cast<Eigen::Index>(tau.size()));
  for (std::size_t i = 0; i < tau.size(); ++i) t(static_cast<Eigen::Index>(i)) = std::sqrt(tau[i]);
  r.coords = isq * a * t.asDiagonal();
  r.system = span_system(span, lambda, r.coords, SystemKind::Tight);
  const Eigen::MatrixXcd f = random_coords(span.rank(), opt.random_vectors, opt.seed);
  for (int j = 0; j < f.cols(); ++j) {
    const Eigen::VectorXcd c = f.col(j);
    const double energy = (r.coords.adjoint() * c).squaredNorm();
    r.residual = std::max(r.residual, std::abs(energy - c.squaredNorm()) / c.squaredNorm());
  }
  r.cert = molecule_certify(r.system, opt.samples.empty() ? ctx->samples() : opt.samples, ctx->displacement(),
                            opt.weight, opt.radius, opt.threshold);
  r.output_frame = frame_bounds(r.system, span);
  return r;
}

DualResult canonical_dual(ContextPtr ctx, const PointFamily& lambda, const DisjointCover& cover,
                          double uniformity_bound, double eps_gate, const GridFunction& theta, const DualOptions& opt) {
  if (cover.measures.size() != lambda.size()) throw std::invalid_argument("canonical_dual: cover does not match the family");
  if (!(uniformity_bound <= 1.0 + eps_gate)) {
    std::ostringstream os;
    os << "canonical_dual: uniformity bound " << uniformity_bound << " exceeds 1 + " << eps_gate;
    throw GateFailure("canonical_dual.uniformity", os.str(), uniformity_bound, 1.0 + eps_gate);
  }
  DualResult r;
  const KernelSpan& span = ctx->span();
  const double tau = cover.measures[median_member(cover.measures)];
  const std::vector<double> taus(lambda.size(), tau);
  const Eigen::MatrixXcd a = span.kernel_coords(lambda.points());
  const LocalizedKernel h = frame_operator_kernel(ctx, lambda, taus, theta);
  const LocalizedKernel k = reproducing_kernel(ctx, theta);
  Eigen::MatrixXcd inv;
  invert_frame_operator(r, h, k, theta, HoloSpec::inverse(), opt, inv);
  r.coords = tau * inv * a;
  r.system = span_system(span, lambda, r.coords, SystemKind::CanonicalDual);
  const Eigen::MatrixXcd f = random_coords(span.rank(), opt.random_vectors, opt.seed);
  for (int j = 0; j < f.cols(); ++j) {
    const Eigen::VectorXcd c = f.col(j);
    const Eigen::VectorXcd rec1 = r.coords * (a.adjoint() * c);
    const Eigen::VectorXcd rec2 = a * (r.coords.adjoint() * c);
    r.residual = std::max({r.residual, (rec1 - c).norm() / c.norm(), (rec2 - c).norm() / c.norm()});
  }
  r.cert = molecule_certify(r.system, opt.samples.empty() ? ctx->samples() : opt.samples, ctx->displacement(),
                            opt.weight, opt.radius, opt.threshold);
  r.output_frame = frame_bounds(r.system, span);
  return r;
}

MinimalityReport coefficient_minimality(const KernelSpan& span, const Eigen::MatrixXcd& canonical_coords,
                                        const Eigen::MatrixXcd& other_coords, int trials, std::uint64_t seed) {
  MinimalityReport m;
  m.trials = trials;
  const Eigen::MatrixXcd f = random_coords(span.rank(), trials, seed);
  for (int j = 0; j < trials; ++j) {
    const double a = (canonical_coords.adjoint() * f.col(j)).norm();
    const double b = (other_coords.adjoint() * f.col(j)).norm();
    const double ratio = b > 0.0 ? a / b : (a > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    m.worst_ratio = std::max(m.worst_ratio, ratio);
    if (a > b * (1.0 + 1e-12)) ++m.violations;
  }
  return m;
}

RieszResult almost_orthogonal_riesz(const Kernel& k, const PointFamily& lambda, const Neighborhood& sep) {
  if (!is_separated(lambda, sep)) throw std::invalid_argument("almost_orthogonal_riesz: family is not separated");
  std::vector<double> s(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) s[i] = 1.0 / std::sqrt(k(lambda[i], lambda[i]).real());
  RieszResult r;
  r.system = kernel_system(k, lambda, s, SystemKind::KernelSamples);
  r.report = riesz_bounds(r.system);
  r.gap = gap_to_identity(r.system.gram());
  return r;
}

CDMatrix normalized_gramian(const Kernel& k, const PointFamily& lambda, const GridFunction& theta) {
  CDMatrix m;
  m.rows = lambda;
  m.cols = lambda;
  const auto n = static_cast<Eigen::Index>(lambda.size());
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::sqrt(k(lambda[static_cast<std::size_t>(i)], lambda[static_cast<std::size_t>(i)]).real());
  const Eigen::MatrixXcd g = k.matrix(lambda.points(), lambda.points());
  m.entries = d.cwiseInverse().asDiagonal() * g * d.cwiseInverse().asDiagonal();
  const double alpha = n ? d.cwiseAbs2().minCoeff() : 1.0;
  m.envelope = scale(GridFunction::real(theta.grid, theta.magnitude()), 1.0 / alpha);
  return m;
}

namespace {

BiorthogonalResult riesz_construction(const Kernel& k, const PointFamily& lambda, const GridFunction& theta,
                                      const RieszOptions& opt, bool orthonormal) {
  BiorthogonalResult r;
  r.normalized_gram = normalized_gramian(k, lambda, theta);
  const HoloSpec spec = orthonormal ? HoloSpec::inverse_sqrt() : HoloSpec::inverse();
  Eigen::MatrixXcd f;
  try {
    HoloMatrixResult hr = holo_calculus_matrix(r.normalized_gram, spec);
    f = hr.result.entries;
    r.gate_status = "passed";
    r.holo = std::move(hr);
  } catch (const GateFailure& e) {
    if (!opt.dense_fallback) throw;
    r.gate_status = e.what();
    r.dense_fallback = true;
    f = hermitian_power(r.normalized_gram.entries, orthonormal ? -0.5 : -1.0);
  }
  const auto n = static_cast<Eigen::Index>(lambda.size());
  Eigen::VectorXd dinv(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dinv(i) = 1.0 / std::sqrt(k(lambda[static_cast<std::size_t>(i)], lambda[static_cast<std::size_t>(i)]).real());
  VectorSystem s;
  s.index = lambda;
  s.kernel = k;
  s.atoms = lambda.points();
  if (orthonormal) {
    s.kind = SystemKind::Orthonormal;
    s.coeffs = dinv.asDiagonal() * f;
    r.error = (s.gram() - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  } else {
    s.kind = SystemKind::Biorthogonal;
    s.coeffs = dinv.asDiagonal() * f * dinv.asDiagonal();
    const VectorSystem kernels = kernel_system(k, lambda, std::vector<double>(lambda.size(), 1.0), SystemKind::KernelSamples);
    r.error = (cross_gram(kernels, s) - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  }
  r.system = std::move(s);
  return r;
}

}  // namespace

BiorthogonalResult biorthogonal_system(const Kernel& k, const PointFamily& lambda, const GridFunction& theta,
                                       const RieszOptions& opt) {
  return riesz_construction(k, lambda, theta, opt, false);
}

BiorthogonalResult orthonormalize(const Kernel& k, const PointFamily& lambda, const GridFunction& theta,
                                  const RieszOptions& opt) {
  return riesz_construction(k, lambda, theta, opt, true);
}

Eigen::VectorXcd Interpolant::evaluate(const std::vector<GroupPoint>& xs) const {
  return kernel.matrix(xs, atoms) * coeffs;
}

Interpolant interpolate(const VectorSystem& b, const Eigen::VectorXcd& a, double lower_riesz_bound) {
  if (static_cast<std::size_t>(a.size()) != b.size()) throw std::invalid_argument("interpolate: coefficient length does not match the system");
  Interpolant f;
  f.kernel = b.kernel;
  f.atoms = b.atoms;
  f.coeffs = b.dense_coeffs() * a;
  f.node_values = f.evaluate(b.index.points());
  f.node_error = a.size() ? (f.node_values - a).cwiseAbs().maxCoeff() : 0.0;
  const cplx q = f.coeffs.dot(b.kernel.matrix(b.atoms, b.atoms) * f.coeffs);
  f.norm = std::sqrt(std::max(0.0, q.real()));
  f.norm_bound = lower_riesz_bound > 0.0 ? a.norm() / std::sqrt(lower_riesz_bound)
                                         : std::numeric_limits<double>::infinity();
  return f;
}

}  // namespace kframe
