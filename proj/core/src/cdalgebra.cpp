#include "kframe/cdalgebra.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace kframe {

namespace {

GridFunction envelope_convolve(const GridFunction& a, const GridFunction& b) {
  return cell_dilate(convolve(a, b));
}

double two_sided_norm(const GridFunction& f, const Weight& w) {
  return integral(maximal_right(maximal_left(f)), w);
}

bool same_points(const PointFamily& a, const PointFamily& b) {
  return a.size() == b.size() && a.points() == b.points();
}

void require_sound(const Soundness& s, const std::string& where) {
  if (!s.pass) {
    std::ostringstream os;
    os << where << ": output exceeds its envelope at " << s.violations << " of " << s.checked
       << " sampled pairs (worst relative excess " << s.worst_excess << ")";
    throw EnvelopeViolation(os.str());
  }
}

}  // namespace

SpanContext::SpanContext(std::shared_ptr<const KernelSpan> span, GridPtr displacement)
    : span_(std::move(span)), displacement_(std::move(displacement)) {
  if (!span_ || !displacement_) throw std::invalid_argument("SpanContext: null span or grid");
  eval_ = span_->evaluation(span_->atoms());
  const auto& pts = span_->atoms();
  const GroupSpec& g = group();
  const std::size_t n = pts.size();
  cells_.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    const GroupPoint yi = g.inv(pts[j]);
    for (std::size_t i = 0; i < n; ++i) cells_[j * n + i] = displacement_->locate_clamped(g.mul(yi, pts[i]));
  }
}

Eigen::MatrixXcd LocalizedKernel::values() const { return ctx->eval() * op * ctx->eval().adjoint(); }

Soundness LocalizedKernel::soundness(double tol) const {
  Soundness s;
  const Eigen::MatrixXcd v = values();
  const Eigen::VectorXd env = envelope.magnitude();
  const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
  const std::size_t n = ctx->size();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double val = std::max(std::abs(v(ii, jj)), std::abs(v(jj, ii)));
      const double excess = (val - env(static_cast<Eigen::Index>(ctx->cell(i, j)))) / scale;
      ++s.checked;
      s.worst_excess = std::max(s.worst_excess, excess);
      if (excess > tol) ++s.violations;
    }
  }
  s.pass = s.violations == 0;
  return s;
}

LocalizedKernel reproducing_kernel(ContextPtr ctx, const GridFunction& envelope) {
  if (envelope.grid != ctx->displacement()) throw std::invalid_argument("reproducing_kernel: envelope grid mismatch");
  // The span drops Gram directions, so node values may exceed |k| by the truncation.
  const Eigen::VectorXd env = envelope.magnitude().array() + ctx->span().truncation();
  LocalizedKernel k{ctx, Eigen::MatrixXcd::Identity(ctx->rank(), ctx->rank()), GridFunction::real(envelope.grid, env)};
  return k;
}

LocalizedKernel kernel_compose(const LocalizedKernel& h, const LocalizedKernel& l) {
  if (h.ctx != l.ctx) throw std::invalid_argument("kernel_compose: kernels live on different spans");
  LocalizedKernel out{h.ctx, h.op * l.op,
                      add(envelope_convolve(h.envelope, l.envelope), envelope_convolve(l.envelope, h.envelope))};
  require_sound(out.soundness(), "kernel_compose");
  return out;
}

LocalizedKernel kernel_adjoint(const LocalizedKernel& h) { return {h.ctx, h.op.adjoint(), h.envelope}; }

Eigen::MatrixXcd compose_on_grid(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& l, const QuadratureGrid& grid) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) w(static_cast<Eigen::Index>(i)) = grid.weight(i);
  return h * w.asDiagonal() * l;
}

double CDMatrix::norm_bound() const { return two_sided_norm(envelope, weight); }

Soundness CDMatrix::soundness(double tol) const {
  Soundness s;
  const GroupSpec& g = rows.group();
  const double scale = std::max(entries.size() ? entries.cwiseAbs().maxCoeff() : 0.0, 1e-300);
  for (std::size_t b = 0; b < cols.size(); ++b) {
    const GroupPoint ci = g.inv(cols[b]);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const double e = std::min(envelope.bound_at(g.mul(ci, rows[a])), envelope.bound_at(g.mul(g.inv(rows[a]), cols[b])));
      const double excess = (std::abs(entries(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) - e) / scale;
      ++s.checked;
      s.worst_excess = std::max(s.worst_excess, excess);
      if (excess > tol) ++s.violations;
    }
  }
  s.pass = s.violations == 0;
  return s;
}

GridFunction identity_bump(GridPtr g) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->size()));
  const auto i = g->locate(g->group().identity());
  if (!i) throw std::invalid_argument("identity_bump: displacement grid does not contain the identity");
  v(static_cast<Eigen::Index>(*i)) = 1.0;
  return GridFunction::real(std::move(g), v);
}

CDMatrix cd_identity(const PointFamily& lambda, GridPtr displacement) {
  CDMatrix m;
  m.rows = lambda;
  m.cols = lambda;
  const auto n = static_cast<Eigen::Index>(lambda.size());
  m.entries = Eigen::MatrixXcd::Identity(n, n);
  m.envelope = identity_bump(std::move(displacement));
  return m;
}

SchurReport matrix_entry_bound_check(const CDMatrix& m) {
  SchurReport r;
  const GroupSpec& g = m.rows.group();
  const double mu_q = g.q().measure(g);
  const double norm = m.norm_bound();
  r.row_bound = relative_separation(m.cols) / mu_q * norm;
  r.col_bound = relative_separation(m.rows) / mu_q * norm;
  const Eigen::MatrixXd a = m.entries.cwiseAbs();
  if (a.size()) {
    Eigen::Index idx = 0;
    r.max_row_sum = a.rowwise().sum().maxCoeff(&idx);
    r.worst_row = static_cast<long>(idx);
    r.max_col_sum = a.colwise().sum().maxCoeff(&idx);
    r.worst_col = static_cast<long>(idx);
  }
  r.entries = m.soundness();
  const double slack = 1.0 + 1e-12;
  r.pass = r.entries.pass && r.max_row_sum <= r.row_bound * slack && r.max_col_sum <= r.col_bound * slack;
  return r;
}

GridFunction product_envelope(const GridFunction& a, const GridFunction& b, double rel_mid) {
  const GroupSpec& g = a.group();
  const double c = rel_mid / g.q().measure(g);
  const GridFunction t1 = envelope_convolve(maximal_left(b), maximal_right(a));
  const GridFunction t2 = envelope_convolve(maximal_left(a), maximal_right(b));
  return scale(add(t1, t2), c);
}

CDMatrix cd_product(const CDMatrix& m, const CDMatrix& n) {
  if (!same_points(m.cols, n.rows)) throw std::invalid_argument("cd_product: inner index families differ");
  if (m.envelope.grid != n.envelope.grid) throw std::invalid_argument("cd_product: envelope grids differ");
  CDMatrix out;
  out.rows = m.rows;
  out.cols = n.cols;
  out.entries = m.entries * n.entries;
  out.envelope = product_envelope(m.envelope, n.envelope, relative_separation(m.cols));
  out.weight = m.weight;
  require_sound(out.soundness(), "cd_product");
  return out;
}

LpBound oplp_bound(const CDMatrix& m, int p) {
  LpBound r;
  r.p = p;
  const GroupSpec& g = m.rows.group();
  const double rel = std::max(relative_separation(m.rows), relative_separation(m.cols));
  r.bound = rel / g.q().measure(g) * m.norm_bound();
  const Eigen::MatrixXd a = m.entries.cwiseAbs();
  if (m.entries.size() == 0) {
    r.pass = true;
    return r;
  }
  switch (p) {
    case 1:
      r.measured = a.colwise().sum().maxCoeff();
      break;
    case 2: {
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(m.entries);
      r.measured = svd.singularValues()(0);
      break;
    }
    case 0:
      r.measured = a.rowwise().sum().maxCoeff();
      break;
    default:
      throw std::invalid_argument("oplp_bound: p must be 1, 2 or infinity (0)");
  }
  r.pass = r.measured <= r.bound * (1.0 + 1e-12);
  return r;
}

HoloSpec HoloSpec::inverse() {
  HoloSpec s;
  s.fn = Fn::Inverse;
  return s;
}

HoloSpec HoloSpec::inverse_sqrt() {
  HoloSpec s;
  s.fn = Fn::InverseSqrt;
  return s;
}

double HoloSpec::coefficient(int n) const {
  switch (fn) {
    case Fn::Inverse:
      return (n % 2 == 0) ? 1.0 : -1.0;
    case Fn::InverseSqrt: {
      double a = 1.0;
      for (int k = 0; k < n; ++k) a *= -(k + 0.5) / (k + 1.0);
      return a;
    }
    case Fn::Custom:
      if (!custom) throw std::invalid_argument("HoloSpec: custom function without coefficients");
      return custom(n);
  }
  return 0.0;
}

int HoloSpec::stop_index() const {
  int n = 0;
  while (tail_bound(n) >= truncation_tol && n < max_terms) ++n;
  return n;
}

double HoloSpec::tail_bound(int n) const { return c_phi * std::ldexp(1.0, -n); }

std::string HoloSpec::name() const {
  switch (fn) {
    case Fn::Inverse:
      return "inverse";
    case Fn::InverseSqrt:
      return "inverse_sqrt";
    case Fn::Custom:
      return "custom";
  }
  return "?";
}

ThresholdReport epsilon_threshold(const GridFunction& theta, const GridFunction& phi, double delta, const Weight& w) {
  if (!(delta > 0.0)) throw std::invalid_argument("epsilon_threshold: delta must be positive");
  if (theta.grid != phi.grid) throw std::invalid_argument("epsilon_threshold: grid mismatch");
  ThresholdReport r;
  r.target = delta / 4.0;
  r.beta = l2_norm_squared(theta);
  const GridFunction s = add(symmetric_min(theta), symmetric_min(phi));
  // The maximal functions commute with a constant cap, so M^R M is applied once.
  const Eigen::VectorXd a = maximal_right(maximal_left(s)).magnitude();
  const QuadratureGrid& g = *theta.grid;
  auto norm_at = [&](double eps) {
    const double cap = eps * r.beta;
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      total += w(g.node(i)) * std::min(cap, a(static_cast<Eigen::Index>(i))) * g.weight(i);
    return total;
  };
  double lo = 0.0, hi = delta / 2.0;
  if (norm_at(hi) <= r.target) {
    r.epsilon = hi;
  } else {
    for (r.iterations = 0; r.iterations < 200 && hi - lo > 1e-15 * hi; ++r.iterations) {
      const double mid = 0.5 * (lo + hi);
      (norm_at(mid) <= r.target ? lo : hi) = mid;
    }
    r.epsilon = lo;
  }
  if (!(r.epsilon > 1e-14)) {
    throw GateFailure("epsilon_threshold", "epsilon_threshold: no admissible epsilon on this window", r.epsilon, 1e-14);
  }
  r.envelope_norm = norm_at(r.epsilon);
  return r;
}

MatrixThresholdReport matrix_threshold(const GridFunction& phi, double rel, double delta, const Weight& w) {
  if (!(delta > 0.0)) throw std::invalid_argument("matrix_threshold: delta must be positive");
  const GroupSpec& g = phi.group();
  MatrixThresholdReport r;
  r.c1 = std::max(1.0, 2.0 * rel / g.q().measure(g));
  r.l_const = 4.0 * r.c1 / delta;
  const GridFunction psi = add(identity_bump(phi.grid), GridFunction::real(phi.grid, phi.magnitude()));
  const Eigen::VectorXd a = maximal_right(maximal_left(psi)).magnitude();
  const QuadratureGrid& grid = *phi.grid;
  auto norm_at = [&](long k) {
    const double cap = 1.0 / static_cast<double>(k);
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      total += w(grid.node(i)) * std::min(cap, a(static_cast<Eigen::Index>(i))) * grid.weight(i);
    return total;
  };
  const double target = 1.0 / r.l_const;
  long lo = static_cast<long>(std::ceil(2.0 / delta));
  if (norm_at(lo) <= target) {
    r.k = lo;
  } else {
    long hi = lo;
    while (norm_at(hi) > target) {
      if (hi > (1L << 50))
        throw GateFailure("matrix_threshold", "matrix_threshold: no admissible k on this window", 0.0, 0.0);
      lo = hi;
      hi *= 2;
    }
    while (hi - lo > 1) {
      const long mid = lo + (hi - lo) / 2;
      (norm_at(mid) <= target ? hi : lo) = mid;
    }
    r.k = hi;
  }
  r.epsilon = 1.0 / static_cast<double>(r.k);
  r.envelope_norm = norm_at(r.k);
  return r;
}

double gap_to_identity(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("gap_to_identity: matrix not square");
  if (m.size() == 0) return 0.0;
  const Eigen::MatrixXcd d = m - Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(d);
  return svd.singularValues()(0);
}

namespace {

struct DivergenceWatch {
  double last = std::numeric_limits<double>::infinity();
  int streak = 0;
  void push(double norm, int n) {
    if (norm >= last && norm > 1e-300) {
      if (++streak >= 10) {
        std::ostringstream os;
        os << "holomorphic calculus: series terms stopped decreasing at n = " << n;
        throw std::runtime_error(os.str());
      }
    } else {
      streak = 0;
    }
    last = norm;
  }
};

}  // namespace

HoloKernelResult holo_calculus_kernel(const LocalizedKernel& h, const LocalizedKernel& k, const GridFunction& theta,
                                      const HoloSpec& spec, const Weight& w) {
  if (h.ctx != k.ctx) throw std::invalid_argument("holo_calculus_kernel: kernels live on different spans");
  HoloKernelResult r;
  r.gate = epsilon_threshold(theta, h.envelope, spec.delta, w);
  const Eigen::MatrixXcd d = h.op - k.op;
  {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(d);
    r.gap = d.size() ? svd.singularValues()(0) : 0.0;
  }
  if (r.gap > r.gate.epsilon) {
    std::ostringstream os;
    os << "holo_calculus_kernel: ||T_H - id|| = " << r.gap << " exceeds the admissible epsilon " << r.gate.epsilon;
    throw GateFailure("holo_calculus_kernel.gap", os.str(), r.gap, r.gate.epsilon);
  }
  const GridPtr grid = theta.grid;
  const GridFunction theta_p = symmetric_min(theta);
  const Eigen::VectorXd cap_src = add(theta_p, symmetric_min(h.envelope)).magnitude();
  const GridFunction phi_eps = GridFunction::real(grid, cap_src.cwiseMin(r.gate.epsilon * r.gate.beta));

  const int stop = spec.stop_index();
  Eigen::MatrixXcd power = k.op;
  Eigen::MatrixXcd sum = spec.coefficient(0) * k.op;
  GridFunction env = scale(symmetric_min(k.envelope), std::abs(spec.coefficient(0)));
  GridFunction conv = phi_eps;
  DivergenceWatch watch;
  for (int n = 1; n <= stop; ++n) {
    power = power * d;
    const double a = spec.coefficient(n);
    sum += a * power;
    env = add(env, scale(conv, std::abs(a)));
    watch.push(std::abs(a) * power.norm(), n);
    if (n < stop) conv = envelope_convolve(phi_eps, conv);
  }
  r.terms = stop + 1;
  r.tail = spec.tail_bound(stop);
  r.result = LocalizedKernel{h.ctx, sum, GridFunction::real(grid, env.magnitude())};
  r.soundness = r.result.soundness();
  require_sound(r.soundness, "holo_calculus_kernel");
  return r;
}

HoloMatrixResult holo_calculus_matrix(const CDMatrix& m, const HoloSpec& spec) {
  if (!same_points(m.rows, m.cols)) throw std::invalid_argument("holo_calculus_matrix: matrix is not indexed by one family");
  HoloMatrixResult r;
  const double rel = relative_separation(m.rows);
  r.gate = matrix_threshold(m.envelope, rel, spec.delta, m.weight);
  const auto n = m.entries.rows();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  const Eigen::MatrixXcd d = m.entries - id;
  r.gap = gap_to_identity(m.entries);
  if (r.gap > r.gate.epsilon) {
    std::ostringstream os;
    os << "holo_calculus_matrix: ||M - I|| = " << r.gap << " exceeds the admissible epsilon " << r.gate.epsilon;
    throw GateFailure("holo_calculus_matrix.gap", os.str(), r.gap, r.gate.epsilon);
  }
  const GridPtr grid = m.envelope.grid;
  const GridFunction bump = identity_bump(grid);
  const Eigen::VectorXd psi = add(bump, GridFunction::real(grid, m.envelope.magnitude())).magnitude();
  const GridFunction psi_k = GridFunction::real(grid, psi.cwiseMin(r.gate.epsilon));

  const int stop = spec.stop_index();
  Eigen::MatrixXcd power = id;
  Eigen::MatrixXcd sum = spec.coefficient(0) * id;
  GridFunction env = scale(bump, std::abs(spec.coefficient(0)));
  GridFunction penv = psi_k;
  DivergenceWatch watch;
  for (int k = 1; k <= stop; ++k) {
    power = power * d;
    const double a = spec.coefficient(k);
    sum += a * power;
    if (k > 1) penv = product_envelope(penv, psi_k, rel);
    env = add(env, scale(penv, std::abs(a)));
    watch.push(std::abs(a) * power.norm(), k);
  }
  r.terms = stop + 1;
  r.tail = spec.tail_bound(stop);
  r.result.rows = m.rows;
  r.result.cols = m.cols;
  r.result.entries = sum;
  r.result.envelope = GridFunction::real(grid, env.magnitude());
  r.result.weight = m.weight;
  r.soundness = r.result.soundness();
  require_sound(r.soundness, "holo_calculus_matrix");
  return r;
}

}  // namespace kframe
