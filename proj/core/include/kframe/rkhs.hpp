#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "kframe/envelope.hpp"
#include "kframe/group.hpp"

namespace kframe {

using KernelFn = std::function<cplx(const GroupPoint&, const GroupPoint&)>;

struct Kernel {
  GroupSpec group;
  KernelFn eval;
  KernelFn phase;  // empty means the trivial phase
  std::string label;

  cplx operator()(const GroupPoint& x, const GroupPoint& y) const { return eval(x, y); }
  cplx gamma(const GroupPoint& x, const GroupPoint& y) const { return phase ? phase(x, y) : cplx(1.0); }
  // Rows x, columns y: k(x, y).
  Eigen::MatrixXcd matrix(const std::vector<GroupPoint>& xs, const std::vector<GroupPoint>& ys) const;
};

class KernelInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BdReport {
  double alpha = 0.0;
  double beta = 0.0;
  double floor = 1e-8;
  bool pass = false;
};
BdReport check_bd(const Kernel& k, const QuadratureGrid& grid, double floor = 1e-8);

struct SanityReport {
  double hermitian_gap = 0.0;  // max |k(x,y) - conj k(y,x)|
  double min_eig_ratio = 0.0;  // min eigenvalue / max eigenvalue of the Gram
  bool pass = false;
};
SanityReport kernel_sanity(const Kernel& k, const std::vector<GroupPoint>& pts);

struct EnvelopeFit {
  GridFunction theta;             // on the displacement grid
  std::size_t empty_bins = 0;     // bins that saw no sample pair
  std::size_t pairs = 0;
};
// Theta(u) = max over sample pairs with y^-1 x in the cell of u of max(|k(x,y)|, |k(y,x)|).
// Displacements outside the displacement window are clamped to the edge cell.
EnvelopeFit fit_envelope(const Kernel& k, const QuadratureGrid& samples, GridPtr displacement);

struct LocStep {
  double half_width = 0.0;
  double norm = 0.0;  // two-sided amalgam norm of the fitted envelope
};
struct LocReport {
  EnvelopeFit fit;  // fit on the largest window
  AmalgamReport norms;
  std::vector<LocStep> sweep;
  double growth = 0.0;  // relative norm growth over the last sweep step
  double growth_tol = 0.0;
  bool pass = false;
};
// Fits envelopes on centred windows of growing half width and accepts when the
// windowed two-sided norm has stopped growing.
LocReport loc_certificate(const Kernel& k, const Weight& w, const std::vector<double>& half_widths,
                          double step, double growth_tol = 1e-2);

struct WucReport {
  std::vector<double> offset_size;  // chart size of each offset, as given
  std::vector<double> eta;          // max over probes of ||k_{yu} - Gamma k_y||_1
  double tol = 0.0;
  bool monotone = false;
  bool pass = false;
};
// Offsets are expected in decreasing size. The L1 norm around y is integrated
// as z = y v with v on `local` (left invariance of the Haar measure).
WucReport check_wuc(const Kernel& k, const std::vector<GroupPoint>& offsets,
                    const std::vector<GroupPoint>& probes, const QuadratureGrid& local, double tol);

// (P f)(x) = sum_y k(x, y) f(y) weight(y).
GridFunction project(const Kernel& k, const GridFunction& f);

// Span of kernel slices at a finite atom set with an orthonormal basis
// e_i = sum_y B(y, i) k_y. Directions with Gram eigenvalue below drop_tol * max
// are discarded.
class KernelSpan {
 public:
  KernelSpan(Kernel k, std::vector<GroupPoint> atoms, double drop_tol = 1e-10);

  const Kernel& kernel() const { return kernel_; }
  const std::vector<GroupPoint>& atoms() const { return atoms_; }
  int rank() const { return static_cast<int>(basis_.cols()); }
  std::size_t dropped() const { return atoms_.size() - static_cast<std::size_t>(basis_.cols()); }
  double drop_tol() const { return drop_tol_; }
  const Eigen::MatrixXcd& basis() const { return basis_; }
  double gram_max_eig() const { return max_eig_; }
  // Largest discarded Gram eigenvalue: bounds |k(x,y) - (E E*)(x,y)| at the atoms.
  double truncation() const { return truncation_; }

  // E(x, i) = e_i(x).
  Eigen::MatrixXcd evaluation(const std::vector<GroupPoint>& xs) const;
  // Columns: coordinates of P k_y in the orthonormal basis.
  Eigen::MatrixXcd kernel_coords(const std::vector<GroupPoint>& ys) const;

 private:
  Kernel kernel_;
  std::vector<GroupPoint> atoms_;
  double drop_tol_;
  Eigen::MatrixXcd basis_;
  double max_eig_ = 0.0;
  double truncation_ = 0.0;
};

}  // namespace kframe
