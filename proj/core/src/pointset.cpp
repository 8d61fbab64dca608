#include "kframe/pointset.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace kframe {

PointFamily::PointFamily(GroupSpec g, std::vector<GroupPoint> pts)
    : group_(std::move(g)), points_(std::move(pts)) {
  for (const auto& p : points_) group_.require_valid(p);
}

PointFamily PointFamily::left_translate(const GroupPoint& z) const {
  std::vector<GroupPoint> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(group_.mul(z, p));
  return {group_, std::move(out)};
}

PointFamily PointFamily::appended(const GroupPoint& p) const {
  auto pts = points_;
  pts.push_back(p);
  return {group_, std::move(pts)};
}

double DisjointCover::total() const {
  double s = 0.0;
  for (double m : measures) s += m;
  return s;
}

double DisjointCover::ratio() const {
  if (measures.empty()) return std::numeric_limits<double>::infinity();
  const auto [mn, mx] = std::minmax_element(measures.begin(), measures.end());
  if (!(*mn > 0.0)) return std::numeric_limits<double>::infinity();
  return *mx / *mn;
}

std::uint64_t DisjointCover::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (int a : assignment) {
    h ^= static_cast<std::uint64_t>(a + 1);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

// Quick rejection for l^-1 x in U using chart coordinates only.
bool may_contain(const GroupSpec& g, const Neighborhood& u, const ChartPoint& l, const ChartPoint& x) {
  if (g.id() == GroupId::Affine) {
    if (!u.mirrored && l.component != x.component) return false;
    const double ds = x.s[1] - l.s[1];
    return ds >= u.lo[1] - 1e-12 && ds <= u.hi[1] + 1e-12;
  }
  for (int k = 0; k < g.dim(); ++k) {
    const double d = x.s[k] - l.s[k];
    if (d < u.lo[k] - 1e-12 || d > u.hi[k] + 1e-12) return false;
  }
  return true;
}

// Bucketed chart index of a family. Candidates are a superset of the members
// with x^-1 l in the box (left) or l^-1 x in the box (right).
class ChartIndex {
 public:
  explicit ChartIndex(const PointFamily& f, double bin = 0.25) : g_(f.group()), bin_(bin) {
    for (std::size_t l = 0; l < f.size(); ++l) {
      const ChartPoint c = g_.to_chart(f[l]);
      const long key = g_.dim() == 2 ? static_cast<long>(std::floor(c.s[1] / bin_)) : 0;
      Bin& b = bins_[{c.component, key}];
      const double a = g_.id() == GroupId::Affine ? std::abs(f[l][1]) : 1.0;
      if (b.items.empty()) b.amin = b.amax = a;
      b.amin = std::min(b.amin, a);
      b.amax = std::max(b.amax, a);
      b.items.emplace_back(c.s[0], l);
    }
    for (auto& [k, b] : bins_) std::sort(b.items.begin(), b.items.end());
  }

  template <class F>
  void visit(const GroupPoint& x, const Neighborhood& box, bool right, F&& f) const {
    const ChartPoint xc = g_.to_chart(x);
    const bool affine = g_.id() == GroupId::Affine;
    double s_lo = 0.0, s_hi = 0.0;
    if (g_.dim() == 2) {
      s_lo = right ? xc.s[1] - box.hi[1] : xc.s[1] + box.lo[1];
      s_hi = right ? xc.s[1] - box.lo[1] : xc.s[1] + box.hi[1];
    }
    const long k_lo = g_.dim() == 2 ? static_cast<long>(std::floor((s_lo - 1e-9) / bin_)) : 0;
    const long k_hi = g_.dim() == 2 ? static_cast<long>(std::floor((s_hi + 1e-9) / bin_)) : 0;
    for (int comp : {1, -1}) {
      if (comp < 0 && !affine) break;
      if (affine && !box.mirrored && comp != xc.component) continue;
      for (long k = k_lo; k <= k_hi; ++k) {
        const auto it = bins_.find({comp, k});
        if (it == bins_.end()) continue;
        const Bin& b = it->second;
        double lo, hi;
        if (!affine) {
          lo = right ? x[0] - box.hi[0] : x[0] + box.lo[0];
          hi = right ? x[0] - box.lo[0] : x[0] + box.hi[0];
        } else if (!right) {
          const double u = x[0] + x[1] * box.lo[0], v = x[0] + x[1] * box.hi[0];
          lo = std::min(u, v);
          hi = std::max(u, v);
        } else {
          lo = 1e300;
          hi = -1e300;
          for (double a : {b.amin, b.amax})
            for (double t : {box.lo[0], box.hi[0]}) {
              const double v = x[0] - comp * a * t;
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
        }
        const double tol = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
        auto first = std::lower_bound(b.items.begin(), b.items.end(), std::make_pair(lo - tol, std::size_t{0}));
        for (; first != b.items.end() && first->first <= hi + tol; ++first) f(first->second);
      }
    }
  }

 private:
  struct Bin {
    double amin = 0.0, amax = 0.0;
    std::vector<std::pair<double, std::size_t>> items;
  };
  GroupSpec g_;
  double bin_;
  std::map<std::pair<int, long>, Bin> bins_;
};

struct MemberCache {
  std::vector<GroupPoint> inv;
  std::vector<ChartPoint> chart;
};

MemberCache cache_members(const PointFamily& lambda) {
  MemberCache c;
  const auto& g = lambda.group();
  for (const auto& p : lambda.points()) {
    c.inv.push_back(g.inv(p));
    c.chart.push_back(g.to_chart(p));
  }
  return c;
}

bool member_covers(const GroupSpec& g, const Neighborhood& u, const MemberCache& mc, std::size_t l,
                   const GroupPoint& x, const ChartPoint& xc) {
  if (!may_contain(g, u, mc.chart[l], xc)) return false;
  return u.contains(g, g.mul(mc.inv[l], x));
}

// Members covering each node; empty optional when over budget.
std::optional<std::vector<std::vector<int>>> covering_lists(const PointFamily& lambda, const Neighborhood& u,
                                                            const QuadratureGrid& grid, std::size_t budget) {
  const auto& g = lambda.group();
  const MemberCache mc = cache_members(lambda);
  const ChartIndex index(lambda);
  std::vector<std::vector<int>> lists(grid.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GroupPoint& x = grid.node(i);
    const ChartPoint xc = g.to_chart(x);
    index.visit(x, u, true, [&](std::size_t l) {
      if (member_covers(g, u, mc, l, x, xc)) lists[i].push_back(static_cast<int>(l));
    });
    std::sort(lists[i].begin(), lists[i].end());
    total += lists[i].size();
    if (total > budget) return std::nullopt;
  }
  return lists;
}

DisjointCover cover_from_assignment(const PointFamily& lambda, GridPtr grid, std::vector<int> assign) {
  DisjointCover c;
  c.grid = grid;
  c.measures.assign(lambda.size(), 0.0);
  for (std::size_t i = 0; i < assign.size(); ++i) c.measures[static_cast<std::size_t>(assign[i])] += grid->weight(i);
  c.assignment = std::move(assign);
  return c;
}

void rebalance(DisjointCover& c, const std::vector<std::vector<int>>& lists, const QuadratureGrid& grid,
               int max_moves) {
  auto& m = c.measures;
  auto& a = c.assignment;
  const std::size_t n = lists.size();
  std::vector<std::vector<std::size_t>> owned(m.size());
  for (std::size_t i = 0; i < n; ++i) owned[static_cast<std::size_t>(a[i])].push_back(i);
  for (int move = 0; move < max_moves; ++move) {
    bool moved = false;
    // Shrink the largest member.
    const std::size_t imax = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    {
      double best_target = m[imax];
      std::size_t best_node = n;
      int best_to = -1;
      for (std::size_t node : owned[imax]) {
        const double w = grid.weight(node);
        for (int to : lists[node]) {
          if (static_cast<std::size_t>(to) == imax) continue;
          const double after = m[static_cast<std::size_t>(to)] + w;
          if (after < m[imax] - 1e-15 && after < best_target) {
            best_target = after;
            best_node = node;
            best_to = to;
          }
        }
      }
      if (best_to >= 0) {
        auto& own = owned[imax];
        own.erase(std::find(own.begin(), own.end(), best_node));
        owned[static_cast<std::size_t>(best_to)].push_back(best_node);
        m[imax] -= grid.weight(best_node);
        m[static_cast<std::size_t>(best_to)] += grid.weight(best_node);
        a[best_node] = best_to;
        moved = true;
      }
    }
    // Grow the smallest member.
    const std::size_t imin = static_cast<std::size_t>(std::min_element(m.begin(), m.end()) - m.begin());
    {
      double best_from_measure = m[imin];
      std::size_t best_node = n;
      for (std::size_t node = 0; node < n; ++node) {
        const std::size_t from = static_cast<std::size_t>(a[node]);
        if (from == imin) continue;
        const double w = grid.weight(node);
        if (m[from] - w <= m[imin] + 1e-15) continue;
        if (!std::binary_search(lists[node].begin(), lists[node].end(), static_cast<int>(imin))) continue;
        if (m[from] > best_from_measure) {
          best_from_measure = m[from];
          best_node = node;
        }
      }
      if (best_node < n) {
        const std::size_t from = static_cast<std::size_t>(a[best_node]);
        auto& own = owned[from];
        own.erase(std::find(own.begin(), own.end(), best_node));
        owned[imin].push_back(best_node);
        m[from] -= grid.weight(best_node);
        m[imin] += grid.weight(best_node);
        a[best_node] = static_cast<int>(imin);
        moved = true;
      }
    }
    if (!moved) break;
  }
}

double exhaustive_min(const std::vector<std::vector<int>>& lists, const QuadratureGrid& grid, std::size_t members,
                      std::vector<int>* argmin = nullptr) {
  std::vector<std::size_t> pick(lists.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> m(members);
  while (true) {
    std::fill(m.begin(), m.end(), 0.0);
    for (std::size_t i = 0; i < lists.size(); ++i) m[static_cast<std::size_t>(lists[i][pick[i]])] += grid.weight(i);
    const auto [mn, mx] = std::minmax_element(m.begin(), m.end());
    if (*mn > 0.0 && *mx / *mn < best) {
      best = *mx / *mn;
      if (argmin) {
        argmin->resize(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) (*argmin)[i] = lists[i][pick[i]];
      }
    }
    std::size_t k = 0;
    while (k < pick.size()) {
      if (++pick[k] < lists[k].size()) break;
      pick[k] = 0;
      ++k;
    }
    if (k == pick.size()) break;
  }
  return best;
}

}  // namespace

int relative_separation(const PointFamily& lambda, const Neighborhood& q, const std::vector<GroupPoint>& probes) {
  const auto& g = lambda.group();
  std::vector<GroupPoint> xs = probes;
  const auto qs = q.sample(g, 7);
  for (const auto& l : lambda.points())
    for (const auto& s : qs) xs.push_back(g.mul(l, s));
  const ChartIndex index(lambda);
  int best = 0;
  for (const auto& x : xs) {
    const GroupPoint xi = g.inv(x);
    int count = 0;
    index.visit(x, q, false, [&](std::size_t l) {
      if (q.contains(g, g.mul(xi, lambda[l]))) ++count;
    });
    best = std::max(best, count);
  }
  return best;
}

int relative_separation(const PointFamily& lambda) { return relative_separation(lambda, lambda.group().q()); }

RelCounts rel_expressions(const PointFamily& lambda, const Neighborhood& q, const GroupPoint& x) {
  const auto& g = lambda.group();
  RelCounts r;
  const GroupPoint xi = g.inv(x);
  for (const auto& l : lambda.points()) {
    const bool in_xq = q.contains(g, g.mul(xi, l));
    if (in_xq) ++r.in_xq;
    if (in_xq) ++r.indicator_xq;
    // x in lQ iff l^-1 x in Q; for symmetric Q this is the same event.
    if (q.contains(g, g.mul(g.inv(l), x))) ++r.indicator_lq;
  }
  return r;
}

DensityReport is_dense(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid& grid) {
  const auto& g = lambda.group();
  const MemberCache mc = cache_members(lambda);
  const ChartIndex index(lambda);
  DensityReport r;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GroupPoint& x = grid.node(i);
    const ChartPoint xc = g.to_chart(x);
    bool hit = false;
    index.visit(x, u, true, [&](std::size_t l) { hit = hit || member_covers(g, u, mc, l, x, xc); });
    if (!hit) r.uncovered.push_back(i);
  }
  r.dense = r.uncovered.empty();
  return r;
}

bool is_separated(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid* grid) {
  const auto& g = lambda.group();
  const auto us = u.sample(g, g.dim() == 1 ? 201 : 21);
  const MemberCache mc = cache_members(lambda);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    for (std::size_t j = 0; j < lambda.size(); ++j) {
      if (i == j) continue;
      // lambda_i U meets lambda_j U iff lambda_j^-1 lambda_i u lies in U for some u in U.
      const GroupPoint d = g.mul(mc.inv[j], lambda[i]);
      for (const auto& s : us) {
        if (u.contains(g, g.mul(d, s))) return false;
      }
    }
  }
  if (grid) {
    std::vector<int> hits(grid->size(), 0);
    for (std::size_t l = 0; l < lambda.size(); ++l) {
      for (std::size_t n = 0; n < grid->size(); ++n) {
        const GroupPoint& x = grid->node(n);
        if (member_covers(g, u, mc, l, x, g.to_chart(x)) && ++hits[n] > 1) return false;
      }
    }
  }
  return true;
}

DisjointCover disjoint_cover(const PointFamily& lambda, const Neighborhood& u, GridPtr grid,
                             const std::vector<std::size_t>& order) {
  const auto& g = lambda.group();
  const MemberCache mc = cache_members(lambda);
  const ChartIndex index(lambda);
  std::vector<std::size_t> rank(lambda.size(), lambda.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = std::min(rank[order[r]], r);
  std::vector<int> assign(grid->size(), -1);
  std::vector<std::size_t> uncovered;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const GroupPoint& x = grid->node(i);
    const ChartPoint xc = g.to_chart(x);
    std::size_t best = lambda.size();
    index.visit(x, u, true, [&](std::size_t l) {
      if (rank[l] < lambda.size() && (best == lambda.size() || rank[l] < rank[best]) && member_covers(g, u, mc, l, x, xc))
        best = l;
    });
    if (best < lambda.size()) assign[i] = static_cast<int>(best);
    if (assign[i] < 0) uncovered.push_back(i);
  }
  if (!uncovered.empty()) {
    std::ostringstream os;
    os << "family is not U-dense: " << uncovered.size() << " uncovered nodes, first at ("
       << grid->node(uncovered[0])[0] << ", " << grid->node(uncovered[0])[1] << ")";
    throw NotDenseError(os.str(), uncovered);
  }
  return cover_from_assignment(lambda, grid, std::move(assign));
}

DisjointCover disjoint_cover(const PointFamily& lambda, const Neighborhood& u, GridPtr grid) {
  std::vector<std::size_t> order(lambda.size());
  std::iota(order.begin(), order.end(), 0);
  return disjoint_cover(lambda, u, std::move(grid), order);
}

PointFamily separated_dense_set(const Neighborhood& v, const Neighborhood& u, const QuadratureGrid& grid) {
  const auto& g = grid.group();
  const auto vs = v.sample(g, g.dim() == 1 ? 41 : 9);
  for (const auto& a : vs)
    for (const auto& b : vs)
      if (!u.contains(g, g.mul(a, g.inv(b))))
        throw std::invalid_argument("separated_dense_set: V V^-1 is not contained in U");
  const bool exact_box = g.id() != GroupId::Affine && !v.symmetrize;
  std::vector<GroupPoint> chosen;
  std::vector<GroupPoint> chosen_inv;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GroupPoint& x = grid.node(i);
    bool free = true;
    for (std::size_t c = 0; c < chosen.size() && free; ++c) {
      const GroupPoint d = g.mul(chosen_inv[c], x);
      if (exact_box) {
        // V V^-1 is the box (lo - hi, hi - lo) for abelian boxes.
        bool inside = true;
        for (int k = 0; k < g.dim(); ++k)
          inside = inside && d[k] > v.lo[k] - v.hi[k] && d[k] < v.hi[k] - v.lo[k];
        free = !inside;
      } else {
        const ChartPoint dc = g.to_chart(d);
        if (std::abs(dc.s[1]) > (v.hi[1] - v.lo[1]) + 1e-12) continue;
        for (const auto& s : vs) {
          if (v.contains(g, g.mul(d, s))) {
            free = false;
            break;
          }
        }
      }
    }
    if (free) {
      chosen.push_back(x);
      chosen_inv.push_back(g.inv(x));
    }
  }
  return {g, std::move(chosen)};
}

UniformityReport uniformity(const PointFamily& lambda, const Neighborhood& u, GridPtr grid, int candidates,
                            const std::vector<DisjointCover>& extra, std::uint64_t seed) {
  UniformityReport r;
  const auto& g = lambda.group();
  const std::size_t m = lambda.size();
  auto consider = [&](DisjointCover c) {
    ++r.covers_tried;
    if (c.ratio() < r.bound || r.best.assignment.empty()) {
      r.bound = c.ratio();
      r.best = std::move(c);
    }
  };
  for (const auto& c : extra) {
    if (c.grid != grid || c.measures.size() != m) throw std::invalid_argument("uniformity: incompatible candidate cover");
    consider(c);
  }
  if (m == 0) return r;

  // Member orders: stored, reversed, chart-lexicographic both ways, seeded shuffles.
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> base(m);
  std::iota(base.begin(), base.end(), 0);
  orders.push_back(base);
  orders.emplace_back(base.rbegin(), base.rend());
  auto by_axis = [&](int axis) {
    auto o = base;
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      const auto ca = g.to_chart(lambda[a]), cb = g.to_chart(lambda[b]);
      return ca.s[axis] < cb.s[axis];
    });
    return o;
  };
  orders.push_back(by_axis(0));
  if (g.dim() == 2) orders.push_back(by_axis(1));
  std::mt19937_64 rng(seed);
  while (static_cast<int>(orders.size()) < std::max(candidates, 1)) {
    auto o = base;
    std::shuffle(o.begin(), o.end(), rng);
    orders.push_back(std::move(o));
  }
  orders.resize(static_cast<std::size_t>(std::max(candidates, 1)));

  const auto lists = covering_lists(lambda, u, *grid, 20'000'000);
  if (lists) {
    std::vector<std::size_t> uncovered;
    for (std::size_t i = 0; i < lists->size(); ++i)
      if ((*lists)[i].empty()) uncovered.push_back(i);
    if (!uncovered.empty()) throw NotDenseError("uniformity: family is not U-dense on the window", uncovered);
    // Exact optimum when the assignment space is small.
    double combos = 1.0;
    for (const auto& l : *lists) combos *= static_cast<double>(l.size());
    if (combos <= 2e6) {
      std::vector<int> assign;
      exhaustive_min(*lists, *grid, m, &assign);
      if (!assign.empty()) consider(cover_from_assignment(lambda, grid, std::move(assign)));
    }
  }
  for (const auto& o : orders) consider(disjoint_cover(lambda, u, grid, o));
  // Local search from the best cover found.
  if (lists && !r.best.assignment.empty()) {
    DisjointCover c = r.best;
    rebalance(c, *lists, *grid, 4 * static_cast<int>(grid->size()));
    r.rebalanced = true;
    consider(std::move(c));
  }
  return r;
}

double uniformity_exhaustive(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid& grid) {
  const auto lists = covering_lists(lambda, u, grid, 1'000'000);
  if (!lists) throw std::invalid_argument("uniformity_exhaustive: instance too large");
  for (const auto& l : *lists)
    if (l.empty()) throw NotDenseError("uniformity_exhaustive: not dense", {});
  return exhaustive_min(*lists, grid, lambda.size());
}

int near_uniform_count(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("near_uniform: eps must be positive");
  return std::max(10, 1 + static_cast<int>(std::ceil(2.0 / eps)));
}

int split_count(double measure_ratio, int n) {
  return static_cast<int>(std::floor(measure_ratio * n + 1e-12));
}

namespace {

// Largest symmetric box V around the identity inside U with V^6 contained in U.
Neighborhood pick_seed_neighborhood(const GroupSpec& g, const Neighborhood& u) {
  Neighborhood v;
  for (int k = 0; k < 2; ++k) {
    const double r = std::min(std::abs(u.lo[k]), std::abs(u.hi[k]));
    v.lo[k] = -r;
    v.hi[k] = r;
  }
  if (!(v.hi[0] > 0.0) || (g.dim() == 2 && !(v.hi[1] > 0.0)))
    throw std::invalid_argument("near_uniform_set: U must contain a box around the identity");
  v.edges = Edges::Open;
  v.symmetrize = g.id() == GroupId::Affine;
  v.mirrored = false;
  for (double t = 1.0 / 6.0; t > 1e-3; t *= 0.9) {
    const Neighborhood c = v.scaled(t);
    const auto s = c.sample(g, 4);
    bool ok = true;
    std::vector<GroupPoint> prod = s;
    for (int power = 2; power <= 6 && ok; ++power) {
      std::vector<GroupPoint> next;
      // Chart extremes are attained at sample corners for these boxes; keep the
      // product set bounded by re-sampling the extremes of each factor.
      for (const auto& a : prod)
        for (const auto& b : s) next.push_back(g.mul(a, b));
      if (next.size() > 200000) {
        std::vector<GroupPoint> thin;
        for (std::size_t i = 0; i < next.size(); i += next.size() / 50000 + 1) thin.push_back(next[i]);
        next.swap(thin);
      }
      prod.swap(next);
    }
    for (const auto& p : prod) {
      if (!u.contains(g, p)) {
        ok = false;
        break;
      }
    }
    if (ok) return c;
  }
  throw std::invalid_argument("near_uniform_set: could not fit V with V^6 in U");
}

}  // namespace

NearUniformResult near_uniform_set(const Neighborhood& u, double eps, GridPtr grid) {
  const GroupSpec& g = grid->group();
  NearUniformResult res;
  res.n = near_uniform_count(eps);
  res.ratio_bound = static_cast<double>(res.n) / (res.n - 1);
  const Neighborhood v = pick_seed_neighborhood(g, u);
  res.v = v;
  const double mu_v = v.measure(g);

  // Seeds: maximal V-packing among nodes whose V-neighbourhood stays in the window.
  const auto vs = v.sample(g, 5);
  std::vector<GroupPoint> interior;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    bool in = true;
    for (const auto& s : vs) {
      if (!grid->locate(g.mul(grid->node(i), s))) {
        in = false;
        break;
      }
    }
    if (in) interior.push_back(grid->node(i));
  }
  if (interior.empty()) throw std::invalid_argument("near_uniform_set: window smaller than V");
  std::vector<GroupPoint> seeds;
  {
    const Neighborhood vv = v;  // V V^-1 contained in V^2 for symmetric V
    std::vector<GroupPoint> seeds_inv;
    const bool exact_box = g.id() != GroupId::Affine;
    const auto dense_v = v.sample(g, g.dim() == 1 ? 41 : 9);
    for (const auto& x : interior) {
      bool free = true;
      for (std::size_t c = 0; c < seeds.size() && free; ++c) {
        const GroupPoint d = g.mul(seeds_inv[c], x);
        if (exact_box) {
          bool inside = true;
          for (int k = 0; k < g.dim(); ++k) inside = inside && std::abs(d[k]) < 2.0 * vv.hi[k];
          free = !inside;
        } else {
          const ChartPoint dc = g.to_chart(d);
          if (std::abs(dc.s[1]) >= 2.0 * vv.hi[1]) continue;
          for (const auto& s : dense_v)
            if (vv.contains(g, g.mul(d, s))) {
              free = false;
              break;
            }
        }
      }
      if (free) {
        seeds.push_back(x);
        seeds_inv.push_back(g.inv(x));
      }
    }
  }
  res.seeds = seeds.size();

  // Partition W_l: own V-cell first, then V^2, then V^3 for the boundary layer.
  auto power_contains = [&](const GroupPoint& d, int power) {
    if (g.id() != GroupId::Affine) {
      for (int k = 0; k < g.dim(); ++k)
        if (!(std::abs(d[k]) < power * v.hi[k])) return false;
      return true;
    }
    const ChartPoint dc = g.to_chart(d);
    if (dc.component < 0 || std::abs(dc.s[1]) >= power * v.hi[1]) return false;
    if (power == 1) return v.contains(g, d);
    // d in V^p iff d v^-1 in V^(p-1) for some v in V; recurse on samples.
    const auto s = v.sample(g, power == 2 ? 9 : 5);
    for (const auto& a : s) {
      const GroupPoint e = g.mul(d, g.inv(a));
      if (power == 2 ? v.contains(g, e) : [&] {
            for (const auto& b : s)
              if (v.contains(g, g.mul(e, g.inv(b)))) return true;
            return false;
          }())
        return true;
    }
    return false;
  };
  std::vector<GroupPoint> seeds_inv;
  for (const auto& s : seeds) seeds_inv.push_back(g.inv(s));
  std::vector<int> owner(grid->size(), -1);
  for (int power = 1; power <= 3; ++power) {
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if (owner[i] >= 0) continue;
      for (std::size_t c = 0; c < seeds.size(); ++c) {
        if (power_contains(g.mul(seeds_inv[c], grid->node(i)), power)) {
          owner[i] = static_cast<int>(c);
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < grid->size(); ++i)
    if (owner[i] < 0) throw NotDenseError("near_uniform_set: seed set does not cover the window", {i});

  // Split each W_l into N_l equal-measure pieces along a snake order.
  std::vector<std::vector<std::size_t>> cells(seeds.size());
  for (std::size_t i = 0; i < grid->size(); ++i) cells[static_cast<std::size_t>(owner[i])].push_back(i);
  std::vector<GroupPoint> reps;
  std::vector<int> assign(grid->size(), -1);
  double max_w = 0.0;
  for (double w : grid->weights()) max_w = std::max(max_w, w);
  for (auto& cell : cells) {
    double mu = 0.0;
    for (std::size_t i : cell) mu += grid->weight(i);
    const int pieces = std::max(1, split_count(mu / mu_v, res.n));
    const double target = mu / pieces;
    if (target < 4.0 * max_w)
      throw std::invalid_argument("near_uniform_set: grid too coarse for equal-measure splits; refine the grid");
    // Recursive bisection along the longer chart extent keeps pieces compact.
    std::vector<std::vector<std::size_t>> parts;
    std::function<void(std::vector<std::size_t>, int)> bisect = [&](std::vector<std::size_t> nodes, int p) {
      if (p == 1) {
        parts.push_back(std::move(nodes));
        return;
      }
      std::array<double, 2> lo{1e300, 1e300}, hi{-1e300, -1e300};
      for (std::size_t i : nodes) {
        const auto c = grid->chart(i);
        for (int k = 0; k < 2; ++k) {
          lo[k] = std::min(lo[k], c.s[k]);
          hi[k] = std::max(hi[k], c.s[k]);
        }
      }
      const int axis = (g.dim() == 2 && hi[1] - lo[1] > hi[0] - lo[0]) ? 1 : 0;
      std::stable_sort(nodes.begin(), nodes.end(), [&](std::size_t a, std::size_t b) {
        const auto ca = grid->chart(a), cb = grid->chart(b);
        if (ca.s[axis] != cb.s[axis]) return ca.s[axis] < cb.s[axis];
        return ca.s[1 - axis] < cb.s[1 - axis];
      });
      const int left = p / 2;
      double total = 0.0;
      for (std::size_t i : nodes) total += grid->weight(i);
      const double want = total * left / p;
      std::size_t cut = 1;
      double cum = 0.0, best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        cum += grid->weight(nodes[k]);
        if (std::abs(cum - want) < best) {
          best = std::abs(cum - want);
          cut = k + 1;
        }
      }
      if (nodes.size() < 2) throw std::invalid_argument("near_uniform_set: empty piece; refine the grid");
      const auto mid = nodes.begin() + static_cast<std::ptrdiff_t>(cut);
      bisect(std::vector<std::size_t>(nodes.begin(), mid), left);
      bisect(std::vector<std::size_t>(mid, nodes.end()), p - left);
    };
    bisect(cell, pieces);
    const int first = static_cast<int>(reps.size());
    for (int k = 0; k < pieces; ++k) {
      const auto& part = parts[static_cast<std::size_t>(k)];
      // Representative: the node closest (in the chart) to the weighted centroid.
      double c0 = 0.0, c1 = 0.0, tw = 0.0;
      for (std::size_t i : part) {
        const auto c = grid->chart(i);
        c0 += grid->weight(i) * c.s[0];
        c1 += grid->weight(i) * c.s[1];
        tw += grid->weight(i);
      }
      c0 /= tw;
      c1 /= tw;
      std::size_t median = part.front();
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i : part) {
        const auto c = grid->chart(i);
        const double d = std::hypot(c.s[0] - c0, c.s[1] - c1);
        if (d < bd) {
          bd = d;
          median = i;
        }
      }
      reps.push_back(grid->node(median));
      for (std::size_t i : part) assign[i] = first + k;
    }
  }
  res.points = PointFamily(g, reps);
  res.cover = cover_from_assignment(res.points, grid, assign);
  // Each node must lie in rep * U.
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const GroupPoint& r = reps[static_cast<std::size_t>(assign[i])];
    if (!u.contains(g, g.mul(g.inv(r), grid->node(i))))
      throw std::logic_error("near_uniform_set: piece escapes its representative's U-neighbourhood");
  }
  res.achieved_ratio = res.cover.ratio();
  res.quantization_slack = std::max(0.0, res.achieved_ratio - res.ratio_bound);
  return res;
}

}  // namespace kframe
