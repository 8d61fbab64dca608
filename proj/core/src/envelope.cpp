#include "kframe/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "kframe/pointset.hpp"

namespace kframe {

GridFunction::GridFunction(GridPtr g, Eigen::VectorXcd v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw std::invalid_argument("GridFunction: null grid");
  if (static_cast<std::size_t>(values.size()) != grid->size())
    throw std::invalid_argument("GridFunction: value count does not match the grid");
}

GridFunction GridFunction::zeros(GridPtr g) {
  const auto n = static_cast<Eigen::Index>(g->size());
  return {std::move(g), Eigen::VectorXcd::Zero(n)};
}

GridFunction GridFunction::real(GridPtr g, const Eigen::VectorXd& v) {
  return {std::move(g), v.cast<cplx>()};
}

GridFunction GridFunction::sample(GridPtr g, const std::function<cplx(const GroupPoint&)>& f) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g->size()));
  for (std::size_t i = 0; i < g->size(); ++i) v(static_cast<Eigen::Index>(i)) = f(g->node(i));
  return {std::move(g), std::move(v)};
}

cplx GridFunction::at(const GroupPoint& x) const {
  const auto i = grid->locate(x);
  return i ? values(static_cast<Eigen::Index>(*i)) : cplx(0.0);
}

double GridFunction::bound_at(const GroupPoint& x) const {
  return std::abs(values(static_cast<Eigen::Index>(grid->locate_clamped(x))));
}

GridFunction radial_envelope(GridPtr g, const std::function<double(double)>& profile) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
  const auto h = g->step();
  const int dim = g->group().dim();
  for (std::size_t i = 0; i < g->size(); ++i) {
    const ChartPoint c = g->chart(i);
    double r2 = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double d = std::max(0.0, std::abs(c.s[k]) - 0.5 * h[k]);
      r2 += d * d;
    }
    v(static_cast<Eigen::Index>(i)) = profile(std::sqrt(r2));
  }
  return GridFunction::real(std::move(g), v);
}

GridFunction inversion(const GridFunction& f) {
  const auto& g = f.group();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f.at(g.inv(f.grid->node(i)));
  return {f.grid, std::move(v)};
}

GridFunction symmetric_min(const GridFunction& f) {
  const Eigen::VectorXd a = f.magnitude();
  const Eigen::VectorXd b = inversion(f).magnitude();
  return GridFunction::real(f.grid, a.cwiseMin(b));
}

GridFunction pointwise_min(const GridFunction& f, double cap) {
  return GridFunction::real(f.grid, f.magnitude().cwiseMin(cap));
}

GridFunction add(const GridFunction& a, const GridFunction& b) {
  if (a.grid != b.grid) throw std::invalid_argument("add: grid mismatch");
  return {a.grid, a.values + b.values};
}

GridFunction scale(const GridFunction& a, double s) { return {a.grid, a.values * s}; }

namespace {

bool abelian_box(const GroupSpec& g, const Neighborhood& q) {
  return g.id() != GroupId::Affine && !q.symmetrize;
}

// Index offsets d along one axis with cell(x + d h) meeting x + (lo, hi).
std::pair<int, int> offset_range(double lo, double hi, double h, Edges e) {
  const bool strict_hi = e != Edges::Closed;
  const bool strict_lo = e == Edges::Open;
  int dmin = static_cast<int>(std::floor((lo - 0.5 * h) / h)) - 1;
  int dmax = static_cast<int>(std::ceil((hi + 0.5 * h) / h)) + 1;
  auto ok = [&](int d) {
    const double a = d * h - 0.5 * h, b = d * h + 0.5 * h;  // cell offset interval
    const bool below = strict_hi ? a < hi : a <= hi;
    const bool above = strict_lo ? b > lo : b >= lo;
    return below && above;
  };
  while (dmin <= dmax && !ok(dmin)) ++dmin;
  while (dmax >= dmin && !ok(dmax)) --dmax;
  return {dmin, dmax};
}

Eigen::VectorXd abelian_max(const Eigen::VectorXd& f, const QuadratureGrid& g, const Neighborhood& q) {
  const auto res = g.resolution();
  const auto h = g.step();
  const int dim = g.group().dim();
  Eigen::VectorXd cur = f;
  for (int axis = 0; axis < dim; ++axis) {
    const auto [dmin, dmax] = offset_range(q.lo[axis], q.hi[axis], h[axis], q.edges);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(cur.size());
    for (int i1 = 0; i1 < res[1]; ++i1) {
      for (int i0 = 0; i0 < res[0]; ++i0) {
        double m = 0.0;
        for (int d = dmin; d <= dmax; ++d) {
          int j0 = i0, j1 = i1;
          if (axis == 0) j0 += d; else j1 += d;
          if (j0 < 0 || j0 >= res[0] || j1 < 0 || j1 >= res[1]) continue;
          m = std::max(m, cur(static_cast<Eigen::Index>(g.flat(j0, j1, 0))));
        }
        next(static_cast<Eigen::Index>(g.flat(i0, i1, 0))) = m;
      }
    }
    cur = next;
  }
  return cur;
}

Eigen::VectorXd generic_max(const Eigen::VectorXd& f, const QuadratureGrid& g, const Neighborhood& q,
                            bool left) {
  const GroupSpec& G = g.group();
  const std::size_t n = g.size();
  std::vector<std::vector<GroupPoint>> probes(n);
  std::vector<ChartPoint> charts(n);
  for (std::size_t i = 0; i < n; ++i) {
    probes[i] = g.cell_probes(i);
    charts[i] = g.chart(i);
  }
  const auto h = g.step();
  const int dim = G.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const GroupPoint x = g.node(i);
    const GroupPoint xi = G.inv(x);
    double m = std::abs(f(static_cast<Eigen::Index>(i)));
    for (std::size_t j = 0; j < n; ++j) {
      const double fj = f(static_cast<Eigen::Index>(j));
      if (fj <= m) continue;
      // Both x^-1 y and y x^-1 have chart s-coordinate s_y - s_x on the affine group.
      if (dim == 2 && G.id() == GroupId::Affine) {
        const double ds = charts[j].s[1] - charts[i].s[1];
        if (ds < q.lo[1] - h[1] || ds > q.hi[1] + h[1]) continue;
        if (!q.mirrored && charts[j].component != charts[i].component) continue;
      }
      bool hit = false;
      for (const auto& c : probes[j]) {
        const GroupPoint u = left ? G.mul(xi, c) : G.mul(c, xi);
        if (q.contains(G, u)) {
          hit = true;
          break;
        }
      }
      if (hit) m = fj;
    }
    out(static_cast<Eigen::Index>(i)) = m;
  }
  return out;
}

GridFunction maximal(const GridFunction& f, const Neighborhood& q, bool left) {
  const QuadratureGrid& g = *f.grid;
  const Eigen::VectorXd a = f.magnitude();
  if (abelian_box(g.group(), q)) return GridFunction::real(f.grid, abelian_max(a, g, q));
  return GridFunction::real(f.grid, generic_max(a, g, q, left));
}

}  // namespace

GridFunction maximal_left(const GridFunction& f, const Neighborhood& q) { return maximal(f, q, true); }
GridFunction maximal_right(const GridFunction& f, const Neighborhood& q) { return maximal(f, q, false); }
GridFunction maximal_left(const GridFunction& f) { return maximal(f, f.group().q(), true); }
GridFunction maximal_right(const GridFunction& f) { return maximal(f, f.group().q(), false); }

double integral(const GridFunction& f, const Weight& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    s += w(f.grid->node(i)) * std::abs(f.values(static_cast<Eigen::Index>(i))) * f.grid->weight(i);
  return s;
}

double l2_norm_squared(const GridFunction& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    s += std::norm(f.values(static_cast<Eigen::Index>(i))) * f.grid->weight(i);
  return s;
}

AmalgamReport amalgam_norms(const GridFunction& f, const Weight& w, const Neighborhood& q,
                            const Neighborhood& p) {
  AmalgamReport r;
  const GridFunction ml = maximal_left(f, q);
  const GridFunction mr = maximal_right(f, q);
  r.norm_left = integral(ml, w);
  r.norm_right = integral(mr, w);
  r.norm_two_sided = integral(maximal_right(ml, q), w);
  const double swapped = integral(maximal_left(mr, q), w);
  r.l1w = integral(f, w);
  r.linf = f.size() ? f.magnitude().maxCoeff() : 0.0;
  r.embedding_constant = 1.0 / p.measure(f.group());
  const double scale = std::max(std::abs(r.norm_two_sided), std::abs(swapped));
  r.order_gap = scale > 0.0 ? std::abs(r.norm_two_sided - swapped) / scale : 0.0;
  r.order_identity = r.order_gap <= 1e-10;
  return r;
}

AmalgamReport amalgam_norms(const GridFunction& f, const Weight& w) {
  return amalgam_norms(f, w, f.group().q(), f.group().p());
}

namespace {

// Index of the identity node when the grid is a chart lattice of an abelian
// group centred there, so that node differences are nodes.
std::optional<std::array<int, 2>> lattice_origin(const QuadratureGrid& grid) {
  const GroupSpec& G = grid.group();
  if (G.id() == GroupId::Affine || grid.mirrored()) return std::nullopt;
  const auto e = grid.locate(G.identity());
  if (!e) return std::nullopt;
  const ChartPoint ce = grid.chart(*e);
  const auto st = grid.step();
  for (int k = 0; k < G.dim(); ++k)
    if (std::abs(ce.s[k]) > 1e-9 * st[k]) return std::nullopt;
  const auto [e0, e1, slot] = grid.index(*e);
  return std::array<int, 2>{e0, e1};
}

}  // namespace

GridFunction convolve(const GridFunction& f, const GridFunction& g) {
  if (f.grid != g.grid) throw std::invalid_argument("convolve: grid mismatch");
  const QuadratureGrid& grid = *f.grid;
  const GroupSpec& G = grid.group();
  const std::size_t n = grid.size();
  std::vector<GroupPoint> inverses(n);
  for (std::size_t j = 0; j < n; ++j) inverses[j] = G.inv(grid.node(j));
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  if (const auto c = lattice_origin(grid)) {
    // y^-1 x of two nodes is again a node: shift indices instead of locating.
    const int r0 = grid.resolution()[0], r1 = grid.resolution()[1];
    const cplx* fv = f.values.data();
    const cplx* gv = g.values.data();
    const double* w = grid.weights().data();
    for (int i1 = 0; i1 < r1; ++i1)
      for (int i0 = 0; i0 < r0; ++i0) {
        // k = i - j + c must stay inside the grid.
        const int j1lo = std::max(0, i1 + (*c)[1] - r1 + 1), j1hi = std::min(r1 - 1, i1 + (*c)[1]);
        const int j0lo = std::max(0, i0 + (*c)[0] - r0 + 1), j0hi = std::min(r0 - 1, i0 + (*c)[0]);
        cplx s = 0.0;
        for (int j1 = j1lo; j1 <= j1hi; ++j1) {
          const std::size_t jrow = static_cast<std::size_t>(j1) * r0;
          const std::size_t krow = static_cast<std::size_t>(i1 - j1 + (*c)[1]) * r0;
          for (int j0 = j0lo; j0 <= j0hi; ++j0) {
            const cplx fj = fv[jrow + j0];
            if (fj == cplx(0.0)) continue;
            s += fj * gv[krow + (i0 - j0 + (*c)[0])] * w[jrow + j0];
          }
        }
        out(static_cast<Eigen::Index>(static_cast<std::size_t>(i1) * r0 + i0)) = s;
      }
    return {f.grid, std::move(out)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    const GroupPoint& x = grid.node(i);
    cplx s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const cplx fj = f.values(static_cast<Eigen::Index>(j));
      if (fj == cplx(0.0)) continue;
      const auto k = grid.locate(G.mul(inverses[j], x));
      if (!k) continue;
      s += fj * g.values(static_cast<Eigen::Index>(*k)) * grid.weight(j);
    }
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return {f.grid, std::move(out)};
}

GridFunction cell_dilate(const GridFunction& f) {
  const QuadratureGrid& g = *f.grid;
  const auto res = g.resolution();
  const Eigen::VectorXd a = f.magnitude();
  Eigen::VectorXd out(a.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto [i0, i1, slot] = g.index(i);
    double m = 0.0;
    for (int d1 = -1; d1 <= 1; ++d1) {
      const int j1 = i1 + d1;
      if (j1 < 0 || j1 >= res[1]) continue;
      for (int d0 = -1; d0 <= 1; ++d0) {
        const int j0 = i0 + d0;
        if (j0 < 0 || j0 >= res[0]) continue;
        m = std::max(m, a(static_cast<Eigen::Index>(g.flat(j0, j1, slot))));
      }
    }
    out(static_cast<Eigen::Index>(i)) = m;
  }
  return GridFunction::real(f.grid, out);
}

double synthesis_norm_bound(const GridFunction& theta, const PointFamily& lambda) {
  const GroupSpec& g = theta.group();
  const double rel = static_cast<double>(relative_separation(lambda, g.q()));
  const double l1 = integral(theta, Weight::constant());
  const double wl = integral(maximal_left(inversion(theta)), Weight::constant());
  return std::sqrt(rel / g.q().measure(g) * l1 * wl);
}

double synthesis_operator_norm(const GridFunction& theta, const PointFamily& lambda,
                               const QuadratureGrid& sample) {
  const GroupSpec& g = theta.group();
  const auto& pts = lambda.points();
  if (pts.empty()) return 0.0;
  Eigen::MatrixXd d(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t l = 0; l < pts.size(); ++l) {
    const GroupPoint li = g.inv(pts[l]);
    for (std::size_t i = 0; i < sample.size(); ++i)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
          std::abs(theta.at(g.mul(li, sample.node(i)))) * std::sqrt(sample.weight(i));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  return svd.singularValues()(0);
}

}  // namespace kframe
