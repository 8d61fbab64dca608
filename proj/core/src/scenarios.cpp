#include "kframe/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kframe {

using std::numbers::pi;

// ---------------------------------------------------------------------------
// Fock

GroupSpec fock_group() { return GroupSpec::plane(1.0 / pi); }

Kernel fock_kernel(FockPhase phase) {
  Kernel k;
  k.group = fock_group();
  k.eval = [](const GroupPoint& x, const GroupPoint& y) {
    const cplx z(x[0], x[1]);
    const cplx w(y[0], y[1]);
    return std::exp(z * std::conj(w) - 0.5 * std::norm(z) - 0.5 * std::norm(w));
  };
  switch (phase) {
    case FockPhase::Twisted:
      k.phase = [](const GroupPoint& x, const GroupPoint& y) {
        const double im = (cplx(x[0], x[1]) * std::conj(cplx(y[0], y[1]))).imag();
        return std::polar(1.0, -im);
      };
      k.label = "fock";
      break;
    case FockPhase::Conjugate:
      k.phase = [](const GroupPoint& x, const GroupPoint& y) {
        const double im = (cplx(x[0], x[1]) * std::conj(cplx(y[0], y[1]))).imag();
        return std::polar(1.0, im);
      };
      k.label = "fock[conjugate phase]";
      break;
    case FockPhase::Trivial:
      k.label = "fock[trivial phase]";
      break;
  }
  return k;
}

double fock_profile(double r) { return std::exp(-0.5 * r * r); }

GridFunction fock_envelope(GridPtr displacement) { return radial_envelope(displacement, fock_profile); }

// ---------------------------------------------------------------------------
// Bandlimited

namespace {

double band_core(double band, double u) {
  if (std::abs(u) < 1e-12) return 2.0 * band;
  return std::sin(2.0 * pi * band * u) / (pi * u);
}

}  // namespace

Kernel bandlimited_kernel(double band, double reg) {
  if (!(band > 0.0)) throw DomainError("bandlimited: band must be positive");
  if (reg < 0.0) throw DomainError("bandlimited: regularisation must be nonnegative");
  Kernel k;
  k.group = GroupSpec::real_line();
  k.eval = [band, reg](const GroupPoint& x, const GroupPoint& y) {
    const double u = x[0] - y[0];
    return cplx(band_core(band, u) * std::exp(-2.0 * pi * pi * reg * reg * u * u), 0.0);
  };
  std::ostringstream os;
  os << "bandlimited(band=" << band << ",reg=" << reg << ")";
  k.label = os.str();
  return k;
}

double bandlimited_profile(double band, double reg, double r) {
  r = std::abs(r);
  const double core = r > 0.0 ? std::min(2.0 * band, 1.0 / (pi * r)) : 2.0 * band;
  return core * std::exp(-2.0 * pi * pi * reg * reg * r * r);
}

// ---------------------------------------------------------------------------
// Wavelets

WaveletSpec wavelet_spec(MotherWavelet m) {
  WaveletSpec w;
  w.mother = m;
  if (m == MotherWavelet::MexicanHat) {
    w.name = "mexican_hat";
    w.psi = [](double t) { return (1.0 - t * t) * std::exp(-0.5 * t * t); };
    w.psi_hat = [](double o) { return std::sqrt(2.0 * pi) * o * o * std::exp(-0.5 * o * o); };
    w.norm_sq = 0.75 * std::sqrt(pi);
    w.calderon = pi;
  } else {
    w.name = "poisson";
    w.psi = [](double t) {
      const double d = 1.0 + t * t;
      return (1.0 - t * t) / (pi * d * d);
    };
    w.psi_hat = [](double o) { return std::abs(o) * std::exp(-std::abs(o)); };
    w.norm_sq = 1.0 / (4.0 * pi);
    w.calderon = 0.25;
  }
  return w;
}

MotherWavelet parse_mother(const std::string& name) {
  if (name == "mexican_hat" || name == "mexican-hat") return MotherWavelet::MexicanHat;
  if (name == "poisson") return MotherWavelet::Poisson;
  throw DomainError("unknown mother wavelet '" + name + "'");
}

double wavelet_coefficient(const WaveletSpec& w, double b, double a) {
  if (a == 0.0) throw DomainError("wavelet coefficient: a must be nonzero");
  // Both mothers are even, so the a < 0 component repeats the a > 0 one.
  a = std::abs(a);
  if (w.mother == MotherWavelet::MexicanHat) {
    const double c = 1.0 + a * a;
    const double q = b * b / c;
    return std::sqrt(a) * a * a * std::sqrt(2.0 * pi / c) / (c * c) * (3.0 - 6.0 * q + q * q) *
           std::exp(-0.5 * q);
  }
  const cplx d(1.0 + a, -b);
  return 2.0 * std::pow(a, 1.5) / pi * (1.0 / (d * d * d)).real();
}

double wavelet_coefficient_quadrature(const WaveletSpec& w, double b, double a, double span, int n) {
  if (n % 2) ++n;
  const double h = 2.0 * span / n;
  const double s = 1.0 / std::sqrt(std::abs(a));
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = -span + i * h;
    const double f = w.psi(t) * s * w.psi((t - b) / a);
    acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0;
}

namespace {

// int_lo^hi f(w) / w dw in the variable u = log w.
double log_simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  if (n % 2) ++n;
  const double a = std::log(lo), b = std::log(hi);
  const double h = (b - a) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = f(std::exp(a + i * h));
    acc += v * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0;
}

}  // namespace

double calderon_integral(const WaveletSpec& w, double lo, double hi, int n) {
  const auto sq = [&](double o) {
    const double v = w.psi_hat(o);
    return v * v;
  };
  return log_simpson(sq, lo, hi, n);
}

Admissibility check_admissible(const std::function<double(double)>& psi_hat) {
  const auto sq = [&](double o) {
    const double v = psi_hat(o);
    return v * v;
  };
  Admissibility r;
  r.constant = log_simpson(sq, 1e-3, 200.0, 20000);
  r.inner_gap = log_simpson(sq, 1e-6, 1e-3, 4000);
  r.admissible = std::isfinite(r.constant) && r.constant > 0.0 && r.inner_gap <= 1e-4 * r.constant;
  return r;
}

GroupSpec affine_positive_group() {
  GroupSpec g = GroupSpec::affine();
  Neighborhood q = g.q();
  q.mirrored = false;
  return g.with_neighborhoods(q, g.p());
}

Kernel wavelet_kernel(const WaveletSpec& w) {
  const Admissibility adm = check_admissible(w.psi_hat);
  if (!adm.admissible) throw KernelInvalid("wavelet '" + w.name + "' is not admissible");
  Kernel k;
  k.group = affine_positive_group();
  const GroupSpec g = k.group;
  k.eval = [w, g](const GroupPoint& x, const GroupPoint& y) {
    const GroupPoint u = g.left_quotient(y, x);
    return cplx(wavelet_coefficient(w, u[0], u[1]) / w.calderon, 0.0);
  };
  k.label = "wavelet(" + w.name + ")";
  return k;
}

double wavelet_self_consistency(const WaveletSpec& w, const QuadratureGrid& grid, const std::vector<GroupPoint>& probes) {
  const GroupSpec& g = grid.group();
  const double v0 = wavelet_coefficient(w, 0.0, 1.0);
  double worst = 0.0;
  for (const auto& u : probes) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const GroupPoint& z = grid.node(i);
      const GroupPoint q = g.left_quotient(z, u);
      s += wavelet_coefficient(w, z[0], z[1]) * wavelet_coefficient(w, q[0], q[1]) * grid.weight(i);
    }
    worst = std::max(worst, std::abs(wavelet_coefficient(w, u[0], u[1]) - s / w.calderon) / v0);
  }
  return worst;
}

GridFunction wavelet_envelope(const WaveletSpec& w, GridPtr displacement, int refine) {
  const QuadratureGrid& g = *displacement;
  const auto res = g.resolution();
  const auto step = g.step();
  const int dim = g.group().dim();
  const auto value = [&](const ChartPoint& p) {
    const GroupPoint x = g.group().from_chart(p);
    return std::abs(wavelet_coefficient(w, x[0], x[1])) / w.calderon;
  };
  Eigen::VectorXd v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double m = 0.0;
    for (const auto& p : g.cell_probes(i)) m = std::max(m, std::abs(wavelet_coefficient(w, p[0], p[1])) / w.calderon);
    const ChartPoint c = g.chart(i);
    for (int r0 = 0; r0 <= refine; ++r0)
      for (int r1 = 0; r1 <= refine; ++r1) {
        ChartPoint p = c;
        p.s[0] += step[0] * (static_cast<double>(r0) / refine - 0.5);
        if (dim == 2) p.s[1] += step[1] * (static_cast<double>(r1) / refine - 0.5);
        m = std::max(m, value(p));
      }
    // Edge cells also stand for everything clamped onto them: probe outwards
    // along each edge axis and jointly at corners.
    const auto idx = g.index(i);
    std::array<std::vector<double>, 2> offs{std::vector<double>{0.0}, std::vector<double>{0.0}};
    for (int axis = 0; axis < dim; ++axis) {
      const int n = res[static_cast<std::size_t>(axis)];
      const int at = idx[static_cast<std::size_t>(axis)];
      for (int dir : {-1, 1}) {
        if ((dir < 0 && at != 0) || (dir > 0 && at != n - 1)) continue;
        for (int e = 0; e <= 12; ++e) {
          const double o = dir * step[static_cast<std::size_t>(axis)] * std::ldexp(1.0, e);
          // The log-scale axis saturates numerically long before 2^12 steps.
          if (axis == 1 && std::abs(c.s[1] + o) > 30.0) break;
          offs[static_cast<std::size_t>(axis)].push_back(o);
        }
      }
    }
    for (double o0 : offs[0])
      for (double o1 : offs[1]) {
        ChartPoint p = c;
        p.s[0] += o0;
        p.s[1] += o1;
        m = std::max(m, value(p));
      }
    v[static_cast<Eigen::Index>(i)] = m;
  }
  return cell_dilate(GridFunction::real(displacement, v));
}

PointFamily affine_lattice(double a, double b, int jmin, int jmax, int kmin, int kmax, bool both_signs) {
  if (!(a > 1.0) || !(b > 0.0)) throw DomainError("affine lattice: need a > 1 and b > 0");
  GroupSpec g = both_signs ? GroupSpec::affine() : affine_positive_group();
  std::vector<GroupPoint> pts;
  for (int t : {1, -1}) {
    if (t < 0 && !both_signs) break;
    for (int j = jmin; j <= jmax; ++j) {
      const double s = std::pow(a, j);
      for (int k = kmin; k <= kmax; ++k) pts.emplace_back(s * t * b * k, s * t);
    }
  }
  return PointFamily(g, std::move(pts));
}

PointFamily affine_lattice(double a, double b, const Window& win) {
  if (!(a > 1.0) || !(b > 0.0)) throw DomainError("affine lattice: need a > 1 and b > 0");
  if (!(win.lo[1] > 0.0) || !(win.hi[1] > win.lo[1])) throw DomainError("affine lattice: bad scale window");
  const double la = std::log(a);
  const int jmin = static_cast<int>(std::ceil(std::log(win.lo[1]) / la - 1e-9));
  const int jmax = static_cast<int>(std::floor(std::log(win.hi[1]) / la + 1e-9));
  GroupSpec g = win.mirrored ? GroupSpec::affine() : affine_positive_group();
  std::vector<GroupPoint> pts;
  for (int t : {1, -1}) {
    if (t < 0 && !win.mirrored) break;
    for (int j = jmin; j <= jmax; ++j) {
      const double s = std::pow(a, j);
      const double unit = s * b;
      const int kmin = static_cast<int>(std::ceil(win.lo[0] / unit - 1e-9));
      const int kmax = static_cast<int>(std::floor(win.hi[0] / unit + 1e-9));
      for (int k = kmin; k <= kmax; ++k) pts.emplace_back(unit * k, s * t);
    }
  }
  return PointFamily(g, std::move(pts));
}

Neighborhood affine_lattice_cell(double a, double b) {
  const double h = 0.5 * std::log(a);
  return Neighborhood::box({-0.5 * b, -h}, {0.5 * b, h}, Edges::HalfOpen);
}

PointFamily square_lattice(const GroupSpec& g, double h, double half_width) {
  if (g.id() == GroupId::Affine) throw DomainError("square lattice: abelian groups only");
  if (!(h > 0.0)) throw DomainError("square lattice: spacing must be positive");
  const int n = static_cast<int>(std::floor(half_width / h + 1e-9));
  std::vector<GroupPoint> pts;
  if (g.dim() == 1) {
    for (int i = -n; i <= n; ++i) pts.emplace_back(i * h);
  } else {
    for (int j = -n; j <= n; ++j)
      for (int i = -n; i <= n; ++i) pts.emplace_back(i * h, j * h);
  }
  return PointFamily(g, std::move(pts));
}

Neighborhood square_cell(const GroupSpec& g, double h) {
  if (g.dim() == 1) return Neighborhood::box({-0.5 * h, 0.0}, {0.5 * h, 0.0}, Edges::HalfOpen);
  return Neighborhood::box({-0.5 * h, -0.5 * h}, {0.5 * h, 0.5 * h}, Edges::HalfOpen);
}

}  // namespace kframe
