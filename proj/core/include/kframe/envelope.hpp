#pragma once

#include <Eigen/Dense>
#include <functional>

#include "kframe/group.hpp"

namespace kframe {

class PointFamily;

// A function on a group sampled on a quadrature grid.
struct GridFunction {
  GridPtr grid;
  Eigen::VectorXcd values;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXcd v);

  static GridFunction zeros(GridPtr g);
  static GridFunction real(GridPtr g, const Eigen::VectorXd& v);
  static GridFunction sample(GridPtr g, const std::function<cplx(const GroupPoint&)>& f);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  const GroupSpec& group() const { return grid->group(); }
  Eigen::VectorXd magnitude() const { return values.cwiseAbs(); }

  // Cell value, zero outside the window.
  cplx at(const GroupPoint& x) const;
  // |value| of the cell, clamped to the window edge. Used for envelope dominance.
  double bound_at(const GroupPoint& x) const;
};

// Envelope of a radial (in the chart) nonincreasing profile: each cell gets
// the profile at the cell's smallest chart distance to the identity, so the
// step function dominates the profile.
GridFunction radial_envelope(GridPtr g, const std::function<double(double)>& profile);

GridFunction inversion(const GridFunction& f);
GridFunction symmetric_min(const GridFunction& f);  // min(|f(x)|, |f(x^-1)|)
GridFunction pointwise_min(const GridFunction& f, double cap);
GridFunction add(const GridFunction& a, const GridFunction& b);
GridFunction scale(const GridFunction& a, double s);

// Node y counts for x when the quadrature cell of y meets xQ (left) or Qx (right).
GridFunction maximal_left(const GridFunction& f, const Neighborhood& q);
GridFunction maximal_right(const GridFunction& f, const Neighborhood& q);
GridFunction maximal_left(const GridFunction& f);
GridFunction maximal_right(const GridFunction& f);

struct AmalgamReport {
  double norm_two_sided = 0.0;  // || M^R M f ||_{L1_w}
  double norm_left = 0.0;       // || M f ||_{L1_w}
  double norm_right = 0.0;      // || M^R f ||_{L1_w}
  double l1w = 0.0;
  double linf = 0.0;
  double embedding_constant = 0.0;  // 1 / mu(P)
  double order_gap = 0.0;           // relative gap between M^R M f and M M^R f norms
  bool order_identity = true;
};

AmalgamReport amalgam_norms(const GridFunction& f, const Weight& w, const Neighborhood& q,
                            const Neighborhood& p);
AmalgamReport amalgam_norms(const GridFunction& f, const Weight& w);

double integral(const GridFunction& f, const Weight& w);     // sum w |f| weight
double l2_norm_squared(const GridFunction& f);

// (f*g)(x) = sum_y f(y) g(y^-1 x) weight(y), g looked up by cell, zero outside.
GridFunction convolve(const GridFunction& f, const GridFunction& g);
// |f| maximised over each cell and its index neighbours.
GridFunction cell_dilate(const GridFunction& f);

// sqrt(rel(L)/mu(Q) * ||Theta||_1 * ||Theta^v||_{W^L}); bound on the operator
// norm of c -> sum c_l Theta(l^-1 .) from l2 to L2.
double synthesis_norm_bound(const GridFunction& theta, const PointFamily& lambda);
// Largest singular value of the synthesis map discretised on `sample`.
double synthesis_operator_norm(const GridFunction& theta, const PointFamily& lambda,
                               const QuadratureGrid& sample);

}  // namespace kframe
