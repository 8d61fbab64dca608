#include "kframe/group.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kframe {

namespace {

bool axis_in(double v, double lo, double hi, Edges e) {
  switch (e) {
    case Edges::Open:
      return lo < v && v < hi;
    case Edges::Closed:
      return lo <= v && v <= hi;
    case Edges::HalfOpen:
      return lo <= v && v < hi;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Neighborhood

Neighborhood Neighborhood::box(std::array<double, 2> lo, std::array<double, 2> hi, Edges edges) {
  Neighborhood n;
  n.lo = lo;
  n.hi = hi;
  n.edges = edges;
  return n;
}

bool Neighborhood::in_box(const ChartPoint& p, int dim) const {
  if (!axis_in(p.s[0], lo[0], hi[0], edges)) return false;
  if (dim == 2 && !axis_in(p.s[1], lo[1], hi[1], edges)) return false;
  return true;
}

bool Neighborhood::contains(const GroupSpec& g, const GroupPoint& x) const {
  if (!g.valid(x)) return false;
  const ChartPoint p = g.to_chart(x);
  if (p.component < 0 && !mirrored) return false;
  if (!in_box(p, g.dim())) return false;
  if (symmetrize && !in_box(g.to_chart(g.inv(x)), g.dim())) return false;
  return true;
}

Neighborhood Neighborhood::scaled(double factor) const {
  Neighborhood n = *this;
  for (int k = 0; k < 2; ++k) {
    n.lo[k] *= factor;
    n.hi[k] *= factor;
  }
  return n;
}

double Neighborhood::measure(const GroupSpec& g) const {
  const double comps = (mirrored && g.id() == GroupId::Affine) ? 2.0 : 1.0;
  if (!symmetrize) {
    switch (g.id()) {
      case GroupId::RealLine:
        return hi[0] - lo[0];
      case GroupId::Plane:
        return (hi[0] - lo[0]) * (hi[1] - lo[1]) * g.haar_scale();
      case GroupId::Affine:
        return comps * (hi[0] - lo[0]) * (std::exp(-lo[1]) - std::exp(-hi[1]));
    }
  }
  // Midpoint quadrature of the indicator over the chart bounding box.
  const int n = 800;
  const double h0 = (hi[0] - lo[0]) / n;
  const double h1 = g.dim() == 2 ? (hi[1] - lo[1]) / n : 1.0;
  const int n1 = g.dim() == 2 ? n : 1;
  double total = 0.0;
  for (int i1 = 0; i1 < n1; ++i1) {
    for (int i0 = 0; i0 < n; ++i0) {
      ChartPoint p;
      p.s = {lo[0] + (i0 + 0.5) * h0, g.dim() == 2 ? lo[1] + (i1 + 0.5) * h1 : 0.0};
      const GroupPoint x = g.from_chart(p);
      if (contains(g, x)) total += h0 * h1 * g.chart_density(x);
    }
  }
  return comps * total;
}

std::vector<GroupPoint> Neighborhood::sample(const GroupSpec& g, int per_axis) const {
  std::vector<GroupPoint> out;
  const int n = std::max(per_axis, 2);
  const int n1 = g.dim() == 2 ? n : 1;
  const int comps = (mirrored && g.id() == GroupId::Affine) ? 2 : 1;
  for (int c = 0; c < comps; ++c) {
    for (int i1 = 0; i1 < n1; ++i1) {
      for (int i0 = 0; i0 < n; ++i0) {
        // Inset by a relative 1e-9 so open boxes still contribute boundary samples.
        const double t0 = 1e-9 + (1.0 - 2e-9) * i0 / (n - 1);
        const double t1 = n1 == 1 ? 0.0 : 1e-9 + (1.0 - 2e-9) * i1 / (n - 1);
        ChartPoint p;
        p.s = {lo[0] + t0 * (hi[0] - lo[0]), g.dim() == 2 ? lo[1] + t1 * (hi[1] - lo[1]) : 0.0};
        p.component = c == 0 ? 1 : -1;
        const GroupPoint x = g.from_chart(p);
        if (contains(g, x)) out.push_back(x);
      }
    }
  }
  return out;
}

std::string Neighborhood::describe() const {
  std::ostringstream os;
  const char* l = edges == Edges::Open ? "(" : "[";
  const char* r = edges == Edges::Closed ? "]" : ")";
  os << l << lo[0] << "," << hi[0] << r << "x" << l << lo[1] << "," << hi[1] << r;
  if (symmetrize) os << " sym";
  if (mirrored) os << " mirrored";
  return os.str();
}

// ---------------------------------------------------------------------------
// GroupSpec

GroupSpec GroupSpec::real_line() {
  GroupSpec g;
  g.id_ = GroupId::RealLine;
  g.q_ = Neighborhood::box({-1.0, 0.0}, {1.0, 0.0});
  g.p_ = Neighborhood::box({-0.5, 0.0}, {0.5, 0.0});
  return g;
}

GroupSpec GroupSpec::plane(double haar_scale) {
  if (!(haar_scale > 0.0)) throw DomainError("plane: Haar scale must be positive");
  GroupSpec g;
  g.id_ = GroupId::Plane;
  g.haar_scale_ = haar_scale;
  g.q_ = Neighborhood::box({-1.0, -1.0}, {1.0, 1.0});
  g.p_ = Neighborhood::box({-0.5, -0.5}, {0.5, 0.5});
  return g;
}

GroupSpec GroupSpec::affine() {
  GroupSpec g;
  g.id_ = GroupId::Affine;
  const double l2 = std::log(2.0);
  g.q_ = Neighborhood::box({-1.0, -l2}, {1.0, l2});
  g.q_.symmetrize = true;
  g.q_.mirrored = true;
  g.p_ = Neighborhood::box({-0.4, -0.5 * l2}, {0.4, 0.5 * l2});
  g.p_.symmetrize = true;
  return g;
}

GroupSpec GroupSpec::with_neighborhoods(Neighborhood q, Neighborhood p) const {
  GroupSpec g = *this;
  g.q_ = q;
  g.p_ = p;
  return g;
}

std::string GroupSpec::name() const {
  switch (id_) {
    case GroupId::RealLine:
      return "real_line";
    case GroupId::Plane:
      return "plane";
    case GroupId::Affine:
      return "affine";
  }
  return "?";
}

GroupPoint GroupSpec::identity() const {
  return id_ == GroupId::Affine ? GroupPoint(0.0, 1.0) : GroupPoint(0.0, 0.0);
}

bool GroupSpec::valid(const GroupPoint& x) const {
  if (!std::isfinite(x[0]) || !std::isfinite(x[1])) return false;
  if (id_ == GroupId::Affine) return x[1] != 0.0;
  return true;
}

void GroupSpec::require_valid(const GroupPoint& x) const {
  if (!valid(x)) {
    std::ostringstream os;
    os << name() << ": invalid group point (" << x[0] << ", " << x[1] << ")";
    throw DomainError(os.str());
  }
}

GroupPoint GroupSpec::mul(const GroupPoint& x, const GroupPoint& y) const {
  switch (id_) {
    case GroupId::RealLine:
      return {x[0] + y[0], 0.0};
    case GroupId::Plane:
      return {x[0] + y[0], x[1] + y[1]};
    case GroupId::Affine:
      require_valid(x);
      require_valid(y);
      return {x[0] + x[1] * y[0], x[1] * y[1]};
  }
  return {};
}

GroupPoint GroupSpec::inv(const GroupPoint& x) const {
  switch (id_) {
    case GroupId::RealLine:
      return {-x[0], 0.0};
    case GroupId::Plane:
      return {-x[0], -x[1]};
    case GroupId::Affine:
      require_valid(x);
      return {-x[0] / x[1], 1.0 / x[1]};
  }
  return {};
}

double GroupSpec::haar_density(const GroupPoint& x) const {
  switch (id_) {
    case GroupId::RealLine:
      return 1.0;
    case GroupId::Plane:
      return haar_scale_;
    case GroupId::Affine:
      return 1.0 / (x[1] * x[1]);
  }
  return 1.0;
}

double GroupSpec::chart_density(const GroupPoint& x) const {
  if (id_ == GroupId::Affine) return 1.0 / std::abs(x[1]);
  return haar_density(x);
}

double GroupSpec::modular(const GroupPoint& x) const {
  if (id_ == GroupId::Affine) return 1.0 / std::abs(x[1]);
  return 1.0;
}

ChartPoint GroupSpec::to_chart(const GroupPoint& x) const {
  ChartPoint p;
  if (id_ == GroupId::Affine) {
    p.s = {x[0], std::log(std::abs(x[1]))};
    p.component = x[1] > 0 ? 1 : -1;
  } else {
    p.s = {x[0], id_ == GroupId::Plane ? x[1] : 0.0};
  }
  return p;
}

GroupPoint GroupSpec::from_chart(const ChartPoint& p) const {
  if (id_ == GroupId::Affine) return {p.s[0], p.component * std::exp(p.s[1])};
  return {p.s[0], id_ == GroupId::Plane ? p.s[1] : 0.0};
}

double GroupSpec::dist(const GroupPoint& x) const {
  const ChartPoint p = to_chart(x);
  return std::hypot(p.s[0], p.s[1]);
}

bool same_group(const GroupSpec& a, const GroupSpec& b) {
  return a.id() == b.id() && a.haar_scale() == b.haar_scale();
}

// ---------------------------------------------------------------------------
// Weights

Weight Weight::constant() {
  return {[](const GroupPoint&) { return 1.0; }, "w=1"};
}

Weight Weight::polynomial(const GroupSpec& g, double s) {
  std::ostringstream os;
  if (g.id() == GroupId::Affine) {
    // |b| is not subadditive under the affine law; log|a| is.
    os << "w=(1+|log a|)^" << s;
    return {[s](const GroupPoint& x) { return std::pow(1.0 + std::abs(std::log(std::abs(x[1]))), s); },
            os.str()};
  }
  os << "w=(1+|x|)^" << s;
  const GroupId id = g.id();
  return {[s, id](const GroupPoint& x) {
            const double r = id == GroupId::Plane ? std::hypot(x[0], x[1]) : std::abs(x[0]);
            return std::pow(1.0 + r, s);
          },
          os.str()};
}

WeightCheck check_weight(const GroupSpec& g, const Weight& w, const QuadratureGrid& grid,
                         double tol) {
  WeightCheck r;
  r.min_value = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  const auto& nodes = grid.nodes();
  std::vector<double> wv(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    wv[i] = w(nodes[i]);
    r.min_value = std::min(r.min_value, wv[i]);
    worst = std::max(worst, 1.0 - wv[i]);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double lhs = w(g.mul(nodes[i], nodes[j]));
      worst = std::max(worst, lhs - wv[i] * wv[j]);
    }
  }
  r.max_violation = std::max(worst, 0.0);
  r.pass = r.max_violation <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// QuadratureGrid

GridPtr QuadratureGrid::make(const GroupSpec& g, const Window& w, std::array<int, 2> res) {
  std::array<double, 2> lo = w.lo, hi = w.hi;
  if (g.id() == GroupId::Affine) {
    if (!(w.lo[1] > 0.0) || !(w.hi[1] > w.lo[1]))
      throw DomainError("affine window must satisfy 0 < a_lo < a_hi");
    lo[1] = std::log(w.lo[1]);
    hi[1] = std::log(w.hi[1]);
  }
  return make_chart(g, lo, hi, res, w.mirrored);
}

GridPtr QuadratureGrid::make_chart(const GroupSpec& g, std::array<double, 2> lo,
                                   std::array<double, 2> hi, std::array<int, 2> res,
                                   bool mirrored) {
  const int dim = g.dim();
  if (dim == 1) {
    lo[1] = 0.0;
    hi[1] = 1.0;
    res[1] = 1;
  }
  for (int k = 0; k < dim; ++k) {
    if (res[k] < 1) throw DomainError("grid resolution must be positive");
    if (!(hi[k] > lo[k])) throw DomainError("degenerate grid window");
  }
  if (mirrored && g.id() != GroupId::Affine)
    throw DomainError("mirrored windows exist only for the affine group");

  auto grid = std::make_shared<QuadratureGrid>();
  grid->group_ = g;
  grid->lo_ = lo;
  grid->hi_ = hi;
  grid->res_ = res;
  grid->mirrored_ = mirrored;
  grid->step_ = {(hi[0] - lo[0]) / res[0], (hi[1] - lo[1]) / res[1]};
  const double cell = dim == 2 ? grid->step_[0] * grid->step_[1] : grid->step_[0];
  const int comps = mirrored ? 2 : 1;
  grid->nodes_.reserve(static_cast<std::size_t>(comps) * res[0] * res[1]);
  for (int c = 0; c < comps; ++c) {
    for (int i1 = 0; i1 < res[1]; ++i1) {
      for (int i0 = 0; i0 < res[0]; ++i0) {
        ChartPoint p;
        p.s = {lo[0] + (i0 + 0.5) * grid->step_[0], dim == 2 ? lo[1] + (i1 + 0.5) * grid->step_[1] : 0.0};
        p.component = c == 0 ? 1 : -1;
        const GroupPoint x = g.from_chart(p);
        grid->nodes_.push_back(x);
        grid->weights_.push_back(cell * g.chart_density(x));
      }
    }
  }
  return grid;
}

GridPtr QuadratureGrid::centered(const GroupSpec& g, std::array<double, 2> half_extent,
                                 std::array<int, 2> half_count, bool mirrored) {
  return make_chart(g, {-half_extent[0], -half_extent[1]}, {half_extent[0], half_extent[1]},
                    {2 * half_count[0] + 1, 2 * half_count[1] + 1}, mirrored);
}

double QuadratureGrid::total_measure() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

std::optional<std::size_t> QuadratureGrid::locate(const GroupPoint& x) const {
  if (!group_.valid(x)) return std::nullopt;
  const ChartPoint p = group_.to_chart(x);
  int slot = 0;
  if (p.component < 0) {
    if (!mirrored_) return std::nullopt;
    slot = 1;
  }
  const double f0 = (p.s[0] - lo_[0]) / step_[0];
  if (!(f0 >= 0.0) || f0 >= res_[0]) return std::nullopt;
  int i1 = 0;
  if (group_.dim() == 2) {
    const double f1 = (p.s[1] - lo_[1]) / step_[1];
    if (!(f1 >= 0.0) || f1 >= res_[1]) return std::nullopt;
    i1 = static_cast<int>(f1);
  }
  return flat(static_cast<int>(f0), i1, slot);
}

std::size_t QuadratureGrid::locate_clamped(const GroupPoint& x) const {
  const ChartPoint p = group_.to_chart(x);
  const int slot = (p.component < 0 && mirrored_) ? 1 : 0;
  auto clampi = [](double f, int n) {
    if (!(f >= 0.0)) return 0;
    if (f >= n) return n - 1;
    return static_cast<int>(f);
  };
  const int i0 = clampi((p.s[0] - lo_[0]) / step_[0], res_[0]);
  const int i1 = group_.dim() == 2 ? clampi((p.s[1] - lo_[1]) / step_[1], res_[1]) : 0;
  return flat(i0, i1, slot);
}

std::size_t QuadratureGrid::flat(int i0, int i1, int slot) const {
  return static_cast<std::size_t>(slot) * res_[0] * res_[1] +
         static_cast<std::size_t>(i1) * res_[0] + static_cast<std::size_t>(i0);
}

std::array<int, 3> QuadratureGrid::index(std::size_t i) const {
  const std::size_t per = static_cast<std::size_t>(res_[0]) * res_[1];
  const int slot = static_cast<int>(i / per);
  const std::size_t r = i % per;
  return {static_cast<int>(r % res_[0]), static_cast<int>(r / res_[0]), slot};
}

ChartPoint QuadratureGrid::chart(std::size_t i) const {
  const auto ix = index(i);
  ChartPoint p;
  p.s = {lo_[0] + (ix[0] + 0.5) * step_[0],
         group_.dim() == 2 ? lo_[1] + (ix[1] + 0.5) * step_[1] : 0.0};
  p.component = ix[2] == 0 ? 1 : -1;
  return p;
}

std::vector<GroupPoint> QuadratureGrid::cell_probes(std::size_t i) const {
  const ChartPoint c = chart(i);
  std::vector<GroupPoint> out;
  const int n1 = group_.dim() == 2 ? 3 : 1;
  for (int a = 0; a < n1; ++a) {
    for (int b = 0; b < 3; ++b) {
      ChartPoint p = c;
      p.s[0] += (b - 1) * 0.5 * step_[0];
      if (n1 == 3) p.s[1] += (a - 1) * 0.5 * step_[1];
      out.push_back(group_.from_chart(p));
    }
  }
  return out;
}

std::string QuadratureGrid::describe() const {
  std::ostringstream os;
  os << group_.name() << " chart[" << lo_[0] << "," << hi_[0] << "]";
  if (group_.dim() == 2) os << "x[" << lo_[1] << "," << hi_[1] << "]";
  os << " res " << res_[0];
  if (group_.dim() == 2) os << "x" << res_[1];
  if (mirrored_) os << " mirrored";
  return os.str();
}

}  // namespace kframe
