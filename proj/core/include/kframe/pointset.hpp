#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "kframe/group.hpp"

namespace kframe {

class PointFamily {
 public:
  PointFamily() = default;
  PointFamily(GroupSpec g, std::vector<GroupPoint> pts);

  const GroupSpec& group() const { return group_; }
  const std::vector<GroupPoint>& points() const { return points_; }
  const GroupPoint& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  PointFamily left_translate(const GroupPoint& z) const;
  PointFamily appended(const GroupPoint& p) const;

 private:
  GroupSpec group_;
  std::vector<GroupPoint> points_;
};

class NotDenseError : public std::runtime_error {
 public:
  NotDenseError(const std::string& what, std::vector<std::size_t> nodes)
      : std::runtime_error(what), uncovered(std::move(nodes)) {}
  std::vector<std::size_t> uncovered;
};

struct DisjointCover {
  GridPtr grid;
  std::vector<int> assignment;   // node -> member index
  std::vector<double> measures;  // per member

  double total() const;
  // max/min measure ratio; +inf when a member has zero measure.
  double ratio() const;
  std::uint64_t hash() const;
};

// sup_x #{l : x^-1 l in Q} over the probes and l q for q sampled in Q.
int relative_separation(const PointFamily& lambda, const Neighborhood& q,
                        const std::vector<GroupPoint>& probes = {});
int relative_separation(const PointFamily& lambda);

struct RelCounts {
  int in_xq = 0;        // #(L cap xQ)
  int indicator_xq = 0; // sum 1_{xQ}(l)
  int indicator_lq = 0; // sum 1_{lQ}(x)
};
RelCounts rel_expressions(const PointFamily& lambda, const Neighborhood& q, const GroupPoint& x);

struct DensityReport {
  bool dense = false;
  std::vector<std::size_t> uncovered;
};
DensityReport is_dense(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid& grid);
bool is_separated(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid* grid = nullptr);

DisjointCover disjoint_cover(const PointFamily& lambda, const Neighborhood& u, GridPtr grid);
// Greedy cover under an explicit member order.
DisjointCover disjoint_cover(const PointFamily& lambda, const Neighborhood& u, GridPtr grid,
                             const std::vector<std::size_t>& order);

PointFamily separated_dense_set(const Neighborhood& v, const Neighborhood& u, const QuadratureGrid& grid);

struct UniformityReport {
  double bound = std::numeric_limits<double>::infinity();
  int covers_tried = 0;
  bool rebalanced = false;
  DisjointCover best;
};
UniformityReport uniformity(const PointFamily& lambda, const Neighborhood& u, GridPtr grid,
                            int candidates = 6, const std::vector<DisjointCover>& extra = {},
                            std::uint64_t seed = 1);
// Brute force over all admissible node assignments (tiny grids only).
double uniformity_exhaustive(const PointFamily& lambda, const Neighborhood& u, const QuadratureGrid& grid);

int near_uniform_count(double eps);                 // max(10, 1 + ceil(2/eps))
int split_count(double measure_ratio, int n);       // floor(ratio * n)

struct NearUniformResult {
  PointFamily points;
  DisjointCover cover;
  Neighborhood v;
  int n = 0;
  double ratio_bound = 0.0;        // N/(N-1)
  double achieved_ratio = 0.0;     // measured max/min piece measure
  double quantization_slack = 0.0; // achieved - bound when positive
  std::size_t seeds = 0;           // size of the separated seed set
};
NearUniformResult near_uniform_set(const Neighborhood& u, double eps, GridPtr grid);

}  // namespace kframe
