#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kframe/cdalgebra.hpp"
#include "kframe/pointset.hpp"
#include "kframe/rkhs.hpp"

namespace kframe {

enum class SystemKind { KernelSamples, WeightedKernels, Dual, Tight, CanonicalDual, Biorthogonal, Orthonormal };
std::string kind_name(SystemKind k);

// Members g_i = sum_y coeffs(y, i) k_y over a finite atom set. Weighted
// kernel families store only the diagonal: g_i = diag(i) k_{atoms[i]}.
struct VectorSystem {
  PointFamily index;
  SystemKind kind = SystemKind::KernelSamples;
  Kernel kernel;
  std::vector<GroupPoint> atoms;
  Eigen::MatrixXcd coeffs;  // atoms x members; empty when diagonal
  Eigen::VectorXcd diag;

  bool is_diagonal() const { return coeffs.size() == 0; }
  std::size_t size() const {
    return static_cast<std::size_t>(is_diagonal() ? diag.size() : coeffs.cols());
  }
  // m * C for m with one column per atom.
  Eigen::MatrixXcd times_coeffs(const Eigen::MatrixXcd& m) const;
  Eigen::MatrixXcd dense_coeffs() const;
  Eigen::MatrixXcd evaluate(const std::vector<GroupPoint>& xs) const;  // |xs| x members
  GridFunction member(std::size_t i, GridPtr grid) const;
  Eigen::MatrixXcd gram() const;  // (i, j) -> <g_j, g_i>
};

// Weighted kernel samples scale_i * k_{lambda_i}.
VectorSystem kernel_system(const Kernel& k, const PointFamily& lambda, const std::vector<double>& scale,
                           SystemKind kind);
// Members given by coordinates (rank x members) in the orthonormal basis of a span.
VectorSystem span_system(const KernelSpan& span, const PointFamily& index, const Eigen::MatrixXcd& coords,
                         SystemKind kind);
// (i, j) -> <a_i, b_j>.
Eigen::MatrixXcd cross_gram(const VectorSystem& a, const VectorSystem& b);
// Coordinates of the projections of the members onto the span (rank x members).
Eigen::MatrixXcd span_coords(const KernelSpan& span, const VectorSystem& s);

struct FrameReport {
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
  int dimension = 0;        // dimension of the space the bounds refer to
  std::size_t members = 0;
  double ratio() const { return lower > 0.0 ? upper / lower : std::numeric_limits<double>::infinity(); }
  double deviation() const { return std::max(upper - 1.0, 1.0 - lower); }
  bool is_frame() const { return lower > 0.0; }
};

struct MoleculeCertificate {
  GridFunction phi;
  double dominance_residual = 0.0;  // <= 0 when |g(x)| <= min(Phi(l^-1 x), Phi(x^-1 l)) everywhere sampled
  AmalgamReport norms;
  double radius = 0.0;
  double threshold = 0.0;
  double tail_max = 0.0;  // max of Phi over cells at distance >= radius
  std::size_t pairs = 0;
  bool pass = false;
};

CDMatrix gramian(const VectorSystem& s, GridPtr displacement, const MoleculeCertificate* cert = nullptr);
FrameReport frame_bounds(const VectorSystem& s, const KernelSpan& ambient);
FrameReport riesz_bounds(const VectorSystem& s);

MoleculeCertificate molecule_certify(const VectorSystem& s, const std::vector<GroupPoint>& samples,
                                     GridPtr displacement, const Weight& w, double radius, double threshold);

struct TightnessPrediction {
  double eta_sup = 0.0;
  double theta_left_norm = 0.0;  // ||Theta'||_{W^L}
  double epsilon_hat = 0.0;
};
TightnessPrediction predicted_tightness(double eta_sup, const GridFunction& theta);

struct AlmostTight {
  VectorSystem system;
  FrameReport report;
};
AlmostTight almost_tight_frame(const KernelSpan& span, const PointFamily& lambda, const std::vector<double>& tau);
AlmostTight almost_tight_frame(const KernelSpan& span, const PointFamily& lambda, const DisjointCover& cover);

// Kernel of sum tau_l k_l (x) k_l with the envelope tau_max rel/mu(Q) (M Theta * M^R Theta).
LocalizedKernel frame_operator_kernel(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                      const GridFunction& theta);

struct DualOptions {
  double radius = 4.0;
  double threshold = 1e-3;
  Weight weight = Weight::constant();
  bool dense_fallback = false;  // invert directly when the a priori gate fails
  int random_vectors = 20;
  std::uint64_t seed = 7;
  std::vector<GroupPoint> samples;  // certificate samples; span atoms when empty
};

struct DualResult {
  VectorSystem system;
  MoleculeCertificate cert;
  std::optional<HoloKernelResult> holo;  // empty when the dense fallback was used
  std::string gate_status;               // "passed" or the failure message
  double gate_gap = 0.0;
  double gate_epsilon = 0.0;
  bool dense_fallback = false;
  double residual = 0.0;     // duality (both pairings) or Parseval residual
  FrameReport output_frame;  // frame bounds of the produced system
  Eigen::MatrixXcd coords;   // span coordinates of the members
};

DualResult dual_frame_molecules(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                const GridFunction& theta, const DualOptions& opt = {});
DualResult tight_frame_molecules(ContextPtr ctx, const PointFamily& lambda, const std::vector<double>& tau,
                                 const GridFunction& theta, const DualOptions& opt = {});
// Canonical dual of the unweighted kernels; tau is taken from the median cover cell.
DualResult canonical_dual(ContextPtr ctx, const PointFamily& lambda, const DisjointCover& cover,
                          double uniformity_bound, double eps_gate, const GridFunction& theta,
                          const DualOptions& opt = {});

struct MinimalityReport {
  int trials = 0;
  int violations = 0;
  double worst_ratio = 0.0;  // max ||canonical coeffs|| / ||other coeffs||
};
// Coefficients <f, h_l> of two dual systems of the same kernel family on random span vectors.
MinimalityReport coefficient_minimality(const KernelSpan& span, const Eigen::MatrixXcd& canonical_coords,
                                        const Eigen::MatrixXcd& other_coords, int trials, std::uint64_t seed);

struct RieszResult {
  VectorSystem system;
  FrameReport report;
  double gap = 0.0;  // ||G~ - I||_2
};
RieszResult almost_orthogonal_riesz(const Kernel& k, const PointFamily& lambda, const Neighborhood& sep);

struct RieszOptions {
  bool dense_fallback = false;
};
struct BiorthogonalResult {
  VectorSystem system;
  std::optional<HoloMatrixResult> holo;
  std::string gate_status;
  bool dense_fallback = false;
  double error = 0.0;  // max |<k_l, h_l'> - delta|  (biorthogonal) or |Gram - I| (orthonormal)
  CDMatrix normalized_gram;
};
// Normalised Gramian with envelope Theta / min diagonal.
CDMatrix normalized_gramian(const Kernel& k, const PointFamily& lambda, const GridFunction& theta);
BiorthogonalResult biorthogonal_system(const Kernel& k, const PointFamily& lambda, const GridFunction& theta,
                                       const RieszOptions& opt = {});
BiorthogonalResult orthonormalize(const Kernel& k, const PointFamily& lambda, const GridFunction& theta,
                                  const RieszOptions& opt = {});

struct Interpolant {
  Kernel kernel;
  std::vector<GroupPoint> atoms;
  Eigen::VectorXcd coeffs;
  Eigen::VectorXcd node_values;  // f(lambda)
  double node_error = 0.0;       // max |f(lambda) - a_lambda|
  double norm = 0.0;
  double norm_bound = 0.0;       // ||a|| / sqrt(lower Riesz bound)

  Eigen::VectorXcd evaluate(const std::vector<GroupPoint>& xs) const;
};
Interpolant interpolate(const VectorSystem& biorthogonal, const Eigen::VectorXcd& a, double lower_riesz_bound);

}  // namespace kframe
