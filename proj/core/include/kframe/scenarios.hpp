#pragma once

#include <functional>
#include <string>

#include "kframe/envelope.hpp"
#include "kframe/pointset.hpp"
#include "kframe/rkhs.hpp"

namespace kframe {

// ---- Fock space on the plane (Haar measure dx dy / pi) ----

enum class FockPhase {
  Twisted,    // Gamma(x, y) = exp(-i Im(x conj y)); makes k_x - Gamma k_y small for x near y
  Conjugate,  // the opposite sign, exp(+i Im(x conj y))
  Trivial     // Gamma = 1
};

GroupSpec fock_group();
Kernel fock_kernel(FockPhase phase = FockPhase::Twisted);
double fock_profile(double r);  // exp(-r^2 / 2)
GridFunction fock_envelope(GridPtr displacement);

// ---- Bandlimited control on the real line ----

// k(x, y) = sin(2 pi band u) / (pi u) * exp(-2 pi^2 reg^2 u^2), u = x - y.
// reg = 0 is the Paley-Wiener (sinc) kernel.
Kernel bandlimited_kernel(double band, double reg);
double bandlimited_profile(double band, double reg, double r);

// ---- Affine wavelets ----

enum class MotherWavelet { MexicanHat, Poisson };

struct WaveletSpec {
  MotherWavelet mother = MotherWavelet::MexicanHat;
  std::string name;
  std::function<double(double)> psi;
  std::function<double(double)> psi_hat;  // Fourier transform with exp(-i w t)
  double norm_sq = 0.0;                   // ||psi||^2
  double calderon = 0.0;                  // int_0^inf |psi_hat(w)|^2 / w dw
};

WaveletSpec wavelet_spec(MotherWavelet m);
MotherWavelet parse_mother(const std::string& name);

// <psi, pi(b, a) psi> with pi(b, a) psi(t) = |a|^-1/2 psi((t - b) / a).
double wavelet_coefficient(const WaveletSpec& w, double b, double a);
// The same inner product by composite Simpson quadrature on [-span, span].
double wavelet_coefficient_quadrature(const WaveletSpec& w, double b, double a, double span = 40.0, int n = 40000);
// int_{lo}^{hi} |psi_hat(w)|^2 / w dw by Simpson quadrature.
double calderon_integral(const WaveletSpec& w, double lo, double hi, int n = 20000);

struct Admissibility {
  double constant = 0.0;    // quadrature value on [cut, high]
  double inner_gap = 0.0;   // change of the integral when the inner cutoff shrinks 1e-3 -> 1e-6
  bool admissible = false;
};
// Errors are reported rather than thrown; wavelet_kernel throws on failure.
Admissibility check_admissible(const std::function<double(double)>& psi_hat);

// Affine group restricted to a > 0 with the symmetric default neighbourhoods.
GroupSpec affine_positive_group();
// k(x, y) = <psi, pi(y^-1 x) psi> / C on a > 0.
Kernel wavelet_kernel(const WaveletSpec& w);
// max over probes u of |V(u) - (V * V)(u) / C| / V(e), with V * V integrated on `grid`.
double wavelet_self_consistency(const WaveletSpec& w, const QuadratureGrid& grid, const std::vector<GroupPoint>& probes);
// Step envelope of |k| on a displacement grid from the closed form, maximised
// over each cell's probes and a refined sub-lattice.
GridFunction wavelet_envelope(const WaveletSpec& w, GridPtr displacement, int refine = 4);

// Lattice (a^j t b k, a^j t); only t = +1 unless `both_signs`.
PointFamily affine_lattice(double a, double b, int jmin, int jmax, int kmin, int kmax, bool both_signs = false);
// All lattice points inside a coordinate window (b in [lo0, hi0], a in [lo1, hi1]).
PointFamily affine_lattice(double a, double b, const Window& window);
// U = [-b/2, b/2) x [a^-1/2, a^1/2) in (b, a) coordinates, tiling the plane under the lattice.
Neighborhood affine_lattice_cell(double a, double b);

// ---- Square lattices ----

// h Z^d intersected with the centred box of half width `half_width`.
PointFamily square_lattice(const GroupSpec& g, double h, double half_width);
Neighborhood square_cell(const GroupSpec& g, double h);

}  // namespace kframe
