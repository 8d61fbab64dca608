#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kframe {

using cplx = std::complex<double>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class GroupId { RealLine, Plane, Affine };

// Coordinates of a group element. RealLine uses c[0] only, Plane uses (x, y),
// Affine uses (b, a) with a != 0; the sign of a selects the component.
struct GroupPoint {
  std::array<double, 2> c{0.0, 0.0};

  GroupPoint() = default;
  GroupPoint(double x0, double x1 = 0.0) : c{x0, x1} {}

  double operator[](std::size_t i) const { return c[i]; }
  double& operator[](std::size_t i) { return c[i]; }
  bool operator==(const GroupPoint&) const = default;
};

// Chart coordinates: identity for RealLine/Plane, (b, log|a|) for Affine.
struct ChartPoint {
  std::array<double, 2> s{0.0, 0.0};
  int component = 1;  // +1 or -1; always +1 for abelian groups
};

class GroupSpec;

enum class Edges { Open, Closed, HalfOpen };

// Coordinate box in chart coordinates around the identity, optionally
// intersected with its inverse image and optionally mirrored onto the a<0
// component (Affine only).
struct Neighborhood {
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  Edges edges = Edges::Open;
  bool symmetrize = false;
  bool mirrored = false;

  static Neighborhood box(std::array<double, 2> lo, std::array<double, 2> hi,
                          Edges edges = Edges::Open);

  bool contains(const GroupSpec& g, const GroupPoint& x) const;
  bool in_box(const ChartPoint& p, int dim) const;
  Neighborhood scaled(double factor) const;
  // Haar measure of the neighborhood; exact for plain boxes, fine quadrature otherwise.
  double measure(const GroupSpec& g) const;
  // Points of the neighborhood on a per-axis lattice including near-boundary points.
  std::vector<GroupPoint> sample(const GroupSpec& g, int per_axis) const;
  std::string describe() const;
};

class GroupSpec {
 public:
  static GroupSpec real_line();
  static GroupSpec plane(double haar_scale = 1.0);
  static GroupSpec affine();

  GroupId id() const { return id_; }
  int dim() const { return id_ == GroupId::RealLine ? 1 : 2; }
  std::string name() const;
  double haar_scale() const { return haar_scale_; }

  GroupPoint identity() const;
  GroupPoint mul(const GroupPoint& x, const GroupPoint& y) const;
  GroupPoint inv(const GroupPoint& x) const;
  GroupPoint left_quotient(const GroupPoint& y, const GroupPoint& x) const {
    return mul(inv(y), x);
  }

  bool valid(const GroupPoint& x) const;
  void require_valid(const GroupPoint& x) const;

  // Density of the left Haar measure w.r.t. coordinate measure (db da for Affine).
  double haar_density(const GroupPoint& x) const;
  // Density of the left Haar measure w.r.t. chart measure (db d log|a| for Affine).
  double chart_density(const GroupPoint& x) const;
  double modular(const GroupPoint& x) const;

  ChartPoint to_chart(const GroupPoint& x) const;
  GroupPoint from_chart(const ChartPoint& p) const;
  // Distance to the identity measured in the chart (component ignored).
  double dist(const GroupPoint& x) const;

  const Neighborhood& q() const { return q_; }
  const Neighborhood& p() const { return p_; }
  GroupSpec with_neighborhoods(Neighborhood q, Neighborhood p) const;

 private:
  GroupId id_ = GroupId::RealLine;
  double haar_scale_ = 1.0;
  Neighborhood q_;
  Neighborhood p_;
};

bool same_group(const GroupSpec& a, const GroupSpec& b);

struct Weight {
  std::function<double(const GroupPoint&)> eval;
  std::string label;

  double operator()(const GroupPoint& x) const { return eval(x); }

  static Weight constant();
  // (1 + dist(x))^s, submultiplicative for dist subadditive under the group law.
  static Weight polynomial(const GroupSpec& g, double s);
};

// Box window in group coordinates. For Affine, lo/hi bound (b, a) with
// 0 < a_lo < a_hi; `mirrored` adds the a<0 copy of the window.
struct Window {
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};
  bool mirrored = false;
};

class QuadratureGrid {
 public:
  // Midpoint grid on a window given in group coordinates.
  static std::shared_ptr<const QuadratureGrid> make(const GroupSpec& g, const Window& w,
                                                    std::array<int, 2> res);
  // Midpoint grid on a chart box (Affine: (b, log|a|)).
  static std::shared_ptr<const QuadratureGrid> make_chart(const GroupSpec& g,
                                                          std::array<double, 2> lo,
                                                          std::array<double, 2> hi,
                                                          std::array<int, 2> res,
                                                          bool mirrored);
  // Chart-centred grid with a node at the identity: per-axis half extent and
  // half count n (2n+1 nodes per axis).
  static std::shared_ptr<const QuadratureGrid> centered(const GroupSpec& g,
                                                        std::array<double, 2> half_extent,
                                                        std::array<int, 2> half_count,
                                                        bool mirrored);

  const GroupSpec& group() const { return group_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<GroupPoint>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const GroupPoint& node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::array<int, 2> resolution() const { return res_; }
  std::array<double, 2> chart_lo() const { return lo_; }
  std::array<double, 2> chart_hi() const { return hi_; }
  std::array<double, 2> step() const { return step_; }
  int components() const { return mirrored_ ? 2 : 1; }
  bool mirrored() const { return mirrored_; }
  double total_measure() const;

  // Index of the cell containing x; nullopt outside the window.
  std::optional<std::size_t> locate(const GroupPoint& x) const;
  // Nearest node with clamping to the window edge (component must exist).
  std::size_t locate_clamped(const GroupPoint& x) const;
  // Corners, edge midpoints and centre of the cell of node i.
  std::vector<GroupPoint> cell_probes(std::size_t i) const;
  ChartPoint chart(std::size_t i) const;
  std::array<int, 3> index(std::size_t i) const;  // (i0, i1, component slot)
  std::size_t flat(int i0, int i1, int slot) const;

  std::string describe() const;

 private:
  GroupSpec group_;
  std::array<double, 2> lo_{}, hi_{}, step_{};
  std::array<int, 2> res_{1, 1};
  bool mirrored_ = false;
  std::vector<GroupPoint> nodes_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const QuadratureGrid>;

struct WeightCheck {
  double min_value = 0.0;
  double max_violation = 0.0;  // max(1 - w, w(xy) - w(x)w(y)) over sampled pairs
  bool pass = false;
};

WeightCheck check_weight(const GroupSpec& g, const Weight& w, const QuadratureGrid& grid,
                         double tol = 1e-10);

}  // namespace kframe
