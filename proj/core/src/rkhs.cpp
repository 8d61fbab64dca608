#include "kframe/rkhs.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace kframe {

Eigen::MatrixXcd Kernel::matrix(const std::vector<GroupPoint>& xs, const std::vector<GroupPoint>& ys) const {
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (std::size_t i = 0; i < xs.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = eval(xs[i], ys[j]);
  return m;
}

BdReport check_bd(const Kernel& k, const QuadratureGrid& grid, double floor) {
  BdReport r;
  r.floor = floor;
  r.alpha = std::numeric_limits<double>::infinity();
  r.beta = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx d = k(grid.node(i), grid.node(i));
    const double scale = std::max(1.0, std::abs(d));
    if (std::abs(d.imag()) > 1e-10 * scale || d.real() < -1e-10 * scale) {
      std::ostringstream os;
      os << "kernel diagonal is not real and nonnegative at node " << i << ": " << d;
      throw KernelInvalid(os.str());
    }
    r.alpha = std::min(r.alpha, d.real());
    r.beta = std::max(r.beta, d.real());
  }
  if (grid.size() == 0) r.alpha = 0.0;
  r.pass = r.alpha > floor;
  return r;
}

SanityReport kernel_sanity(const Kernel& k, const std::vector<GroupPoint>& pts) {
  SanityReport r;
  const Eigen::MatrixXcd g = k.matrix(pts, pts);
  r.hermitian_gap = (g - g.adjoint()).cwiseAbs().maxCoeff();
  const Eigen::MatrixXcd h = 0.5 * (g + g.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  const double mx = es.eigenvalues().maxCoeff();
  r.min_eig_ratio = mx > 0.0 ? es.eigenvalues().minCoeff() / mx : 0.0;
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  r.pass = r.hermitian_gap <= 1e-12 * scale && r.min_eig_ratio >= -1e-8;
  return r;
}

EnvelopeFit fit_envelope(const Kernel& k, const QuadratureGrid& samples, GridPtr displacement) {
  const GroupSpec& g = k.group;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(displacement->size()));
  std::vector<char> seen(displacement->size(), 0);
  std::vector<GroupPoint> inverses(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) inverses[j] = g.inv(samples.node(j));
  EnvelopeFit fit;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const GroupPoint& y = samples.node(j);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const GroupPoint& x = samples.node(i);
      const double v = std::max(std::abs(k(x, y)), std::abs(k(y, x)));
      const std::size_t cell = displacement->locate_clamped(g.mul(inverses[j], x));
      theta(static_cast<Eigen::Index>(cell)) = std::max(theta(static_cast<Eigen::Index>(cell)), v);
      seen[cell] = 1;
      ++fit.pairs;
    }
  }
  fit.empty_bins = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 0));
  fit.theta = GridFunction::real(std::move(displacement), theta);
  return fit;
}

LocReport loc_certificate(const Kernel& k, const Weight& w, const std::vector<double>& half_widths,
                          double step, double growth_tol) {
  if (half_widths.size() < 2) throw std::invalid_argument("loc_certificate: need at least two windows");
  const GroupSpec& g = k.group;
  LocReport r;
  r.growth_tol = growth_tol;
  const bool two_d = g.dim() == 2;
  for (double hw : half_widths) {
    const int n = static_cast<int>(std::lround(hw / step));
    const std::array<double, 2> ext{hw + 0.5 * step, two_d ? hw + 0.5 * step : 0.5};
    const std::array<int, 2> cnt{n, two_d ? n : 0};
    GridPtr grid = QuadratureGrid::centered(g, ext, cnt, false);
    EnvelopeFit fit = fit_envelope(k, *grid, grid);
    AmalgamReport norms = amalgam_norms(fit.theta, w);
    r.sweep.push_back({hw, norms.norm_two_sided});
    r.fit = std::move(fit);
    r.norms = norms;
  }
  const double a = r.sweep[r.sweep.size() - 2].norm, b = r.sweep.back().norm;
  r.growth = b > 0.0 ? (b - a) / b : 0.0;
  r.pass = std::isfinite(b) && r.growth <= growth_tol;
  return r;
}

WucReport check_wuc(const Kernel& k, const std::vector<GroupPoint>& offsets, const std::vector<GroupPoint>& probes,
                    const QuadratureGrid& local, double tol) {
  const GroupSpec& g = k.group;
  WucReport r;
  r.tol = tol;
  for (const auto& u : offsets) {
    double worst = 0.0;
    for (const auto& y : probes) {
      const GroupPoint yu = g.mul(y, u);
      const cplx gam = k.gamma(yu, y);
      double s = 0.0;
      for (std::size_t i = 0; i < local.size(); ++i) {
        const GroupPoint z = g.mul(y, local.node(i));
        s += std::abs(k(z, yu) - gam * k(z, y)) * local.weight(i);
      }
      worst = std::max(worst, s);
    }
    r.offset_size.push_back(g.dist(u));
    r.eta.push_back(worst);
  }
  r.monotone = true;
  for (std::size_t i = 1; i < r.eta.size(); ++i)
    if (r.eta[i] > 1.05 * r.eta[i - 1] + 1e-15) r.monotone = false;
  r.pass = r.monotone && !r.eta.empty() && r.eta.back() <= tol;
  return r;
}

GridFunction project(const Kernel& k, const GridFunction& f) {
  const QuadratureGrid& grid = *f.grid;
  Eigen::VectorXcd out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      s += k(grid.node(i), grid.node(j)) * f.values(static_cast<Eigen::Index>(j)) * grid.weight(j);
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return {f.grid, std::move(out)};
}

KernelSpan::KernelSpan(Kernel k, std::vector<GroupPoint> atoms, double drop_tol)
    : kernel_(std::move(k)), atoms_(std::move(atoms)), drop_tol_(drop_tol) {
  if (atoms_.empty()) throw std::invalid_argument("KernelSpan: no atoms");
  Eigen::MatrixXcd gram = kernel_.matrix(atoms_, atoms_);
  gram = 0.5 * (gram + gram.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  const Eigen::VectorXd& d = es.eigenvalues();
  max_eig_ = d.maxCoeff();
  if (!(max_eig_ > 0.0)) throw KernelInvalid("KernelSpan: Gram matrix has no positive spectrum");
  std::vector<Eigen::Index> keep;
  // Eigen sorts ascending; keep the largest first for a stable column order.
  for (Eigen::Index i = d.size() - 1; i >= 0; --i)
    if (d(i) > drop_tol_ * max_eig_)
      keep.push_back(i);
    else
      truncation_ = std::max(truncation_, std::abs(d(i)));
  basis_.resize(gram.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    Eigen::VectorXcd v = es.eigenvectors().col(keep[c]);
    // Fix the phase so the largest component is real positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    v *= std::conj(v(arg)) / std::abs(v(arg));
    basis_.col(static_cast<Eigen::Index>(c)) = v / std::sqrt(d(keep[c]));
  }
}

Eigen::MatrixXcd KernelSpan::evaluation(const std::vector<GroupPoint>& xs) const {
  return kernel_.matrix(xs, atoms_) * basis_;
}

Eigen::MatrixXcd KernelSpan::kernel_coords(const std::vector<GroupPoint>& ys) const {
  return basis_.adjoint() * kernel_.matrix(atoms_, ys);
}

}  // namespace kframe
