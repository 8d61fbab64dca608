#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kframe/envelope.hpp"
#include "kframe/pointset.hpp"
#include "kframe/rkhs.hpp"

namespace kframe {

class EnvelopeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GateFailure : public std::runtime_error {
 public:
  GateFailure(const std::string& gate, const std::string& what, double measured, double limit)
      : std::runtime_error(what), gate(gate), measured(measured), limit(limit) {}
  std::string gate;
  double measured;
  double limit;
};

struct Soundness {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // max (value - envelope) / scale
  bool pass = true;
};

inline constexpr double kSoundnessTol = 1e-12;

// Shared sampled setting: the ambient span, its atoms as sample points, the
// evaluation matrix at the atoms and the displacement grid of all envelopes.
class SpanContext {
 public:
  SpanContext(std::shared_ptr<const KernelSpan> span, GridPtr displacement);

  const KernelSpan& span() const { return *span_; }
  std::shared_ptr<const KernelSpan> span_ptr() const { return span_; }
  const GroupSpec& group() const { return span_->kernel().group; }
  const std::vector<GroupPoint>& samples() const { return span_->atoms(); }
  std::size_t size() const { return span_->atoms().size(); }
  int rank() const { return span_->rank(); }
  const Eigen::MatrixXcd& eval() const { return eval_; }
  GridPtr displacement() const { return displacement_; }
  // Displacement cell of y^-1 x for samples x = i, y = j.
  std::size_t cell(std::size_t i, std::size_t j) const { return cells_[j * size() + i]; }

 private:
  std::shared_ptr<const KernelSpan> span_;
  GridPtr displacement_;
  Eigen::MatrixXcd eval_;
  std::vector<std::size_t> cells_;
};
using ContextPtr = std::shared_ptr<const SpanContext>;

// Integral operator on the ambient span, stored as its matrix in the
// orthonormal basis, together with an envelope on the displacement grid.
struct LocalizedKernel {
  ContextPtr ctx;
  Eigen::MatrixXcd op;
  GridFunction envelope;

  // H(x, y) at sample pairs: rows x, columns y.
  Eigen::MatrixXcd values() const;
  Soundness soundness(double tol = kSoundnessTol) const;
};

LocalizedKernel reproducing_kernel(ContextPtr ctx, const GridFunction& envelope);
// Exact composition on the span; envelope Phi_H * Phi_L + Phi_L * Phi_H.
LocalizedKernel kernel_compose(const LocalizedKernel& h, const LocalizedKernel& l);
LocalizedKernel kernel_adjoint(const LocalizedKernel& h);
// Midpoint composition of kernels sampled on a grid: H diag(weights) L.
Eigen::MatrixXcd compose_on_grid(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& l, const QuadratureGrid& grid);

struct CDMatrix {
  PointFamily rows;
  PointFamily cols;
  Eigen::MatrixXcd entries;
  GridFunction envelope;
  Weight weight = Weight::constant();

  // ||envelope||_{W_w}: witness for the CD norm.
  double norm_bound() const;
  Soundness soundness(double tol = kSoundnessTol) const;
};

// Envelope equal to 1 on the cell of the identity and 0 elsewhere.
GridFunction identity_bump(GridPtr g);
CDMatrix cd_identity(const PointFamily& lambda, GridPtr displacement);

struct SchurReport {
  double max_row_sum = 0.0;
  double max_col_sum = 0.0;
  double row_bound = 0.0;  // rel(cols)/mu(Q) * ||M||
  double col_bound = 0.0;  // rel(rows)/mu(Q) * ||M||
  long worst_row = -1;
  long worst_col = -1;
  Soundness entries;
  bool pass = false;
};
SchurReport matrix_entry_bound_check(const CDMatrix& m);

CDMatrix cd_product(const CDMatrix& m, const CDMatrix& n);
// rel/mu(Q)-weighted envelope of a product, as used by cd_product.
GridFunction product_envelope(const GridFunction& a, const GridFunction& b, double rel_mid);

struct LpBound {
  int p = 2;
  double bound = 0.0;
  double measured = 0.0;  // SVD (p=2), max column sum (p=1), max row sum (p=inf)
  bool pass = false;
};
LpBound oplp_bound(const CDMatrix& m, int p);  // p = 0 encodes infinity

struct HoloSpec {
  enum class Fn { Inverse, InverseSqrt, Custom };
  Fn fn = Fn::Inverse;
  double delta = 1.0;
  double c_phi = 1.0;
  std::function<double(int)> custom;  // coefficient stream for Fn::Custom
  double truncation_tol = 1e-12;
  int max_terms = 200;

  static HoloSpec inverse();
  static HoloSpec inverse_sqrt();
  double coefficient(int n) const;
  double phi_at_one() const { return coefficient(0); }
  // First n with c_phi 2^-n below the truncation tolerance.
  int stop_index() const;
  double tail_bound(int n) const;
  std::string name() const;
};

struct ThresholdReport {
  double epsilon = 0.0;
  double beta = 0.0;        // ||Theta||_{L2}^2
  double envelope_norm = 0.0;  // ||Phi_eps||_W at the returned epsilon
  double target = 0.0;      // delta / 4
  int iterations = 0;
};
// Largest epsilon in (0, delta/2) with ||min(eps beta, Theta' + Phi')||_{W_w} <= delta/4.
ThresholdReport epsilon_threshold(const GridFunction& theta, const GridFunction& phi, double delta, const Weight& w);

struct MatrixThresholdReport {
  double epsilon = 0.0;  // 1/k
  long k = 0;
  double l_const = 0.0;  // 4 C1 / delta
  double c1 = 0.0;
  double envelope_norm = 0.0;
};
MatrixThresholdReport matrix_threshold(const GridFunction& phi, double rel, double delta, const Weight& w);

struct HoloKernelResult {
  LocalizedKernel result;
  ThresholdReport gate;
  double gap = 0.0;  // ||T_H - id|| on the span
  int terms = 0;
  double tail = 0.0;
  Soundness soundness;
};
HoloKernelResult holo_calculus_kernel(const LocalizedKernel& h, const LocalizedKernel& k, const GridFunction& theta,
                                      const HoloSpec& spec, const Weight& w = Weight::constant());

struct HoloMatrixResult {
  CDMatrix result;
  MatrixThresholdReport gate;
  double gap = 0.0;  // ||M - I||_2
  int terms = 0;
  double tail = 0.0;
  Soundness soundness;
};
HoloMatrixResult holo_calculus_matrix(const CDMatrix& m, const HoloSpec& spec);

// Spectral norm of a Hermitian-or-not square matrix minus identity.
double gap_to_identity(const Eigen::MatrixXcd& m);

}  // namespace kframe
