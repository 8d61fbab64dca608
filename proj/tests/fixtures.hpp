#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "kframe/cdalgebra.hpp"
#include "kframe/frames.hpp"
#include "kframe/scenarios.hpp"

namespace kframe::testing {

// Fock span on the 0.5-lattice of [-3, 3]^2 with a 0.5-step displacement grid.
struct FockSetting {
  ContextPtr ctx;
  GridFunction theta;
};

inline FockSetting make_fock_setting(double atom_step = 0.5, double atom_half = 3.0, double disp_half = 7.0,
                                     int disp_count = 14) {
  const GroupSpec g = fock_group();
  auto span = std::make_shared<const KernelSpan>(fock_kernel(), square_lattice(g, atom_step, atom_half).points());
  auto disp = QuadratureGrid::centered(g, {disp_half, disp_half}, {disp_count, disp_count}, false);
  return {std::make_shared<const SpanContext>(span, disp), fock_envelope(disp)};
}

inline std::vector<double> lattice_tau(std::size_t n, double h) { return std::vector<double>(n, h * h / M_PI); }

inline GridPtr line_disp() {
  static const GridPtr d = QuadratureGrid::centered(GroupSpec::real_line(), {12.05, 0.5}, {241, 0}, false);
  return d;
}

// Fresh random entries bounded by min(envelope(a^-1 b), envelope(b^-1 a)) / sqrt 2.
inline void randomize_entries(std::mt19937_64& rng, CDMatrix& m) {
  const GroupSpec& g = m.rows.group();
  std::uniform_real_distribution<double> u(-1, 1);
  m.entries.resize(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(m.cols.size()));
  for (std::size_t j = 0; j < m.cols.size(); ++j)
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      const double e = std::min(m.envelope.bound_at(g.mul(g.inv(m.cols[j]), m.rows[i])),
                                m.envelope.bound_at(g.mul(g.inv(m.rows[i]), m.cols[j])));
      m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cplx(u(rng), u(rng)) * (e / std::sqrt(2.0));
    }
}

// Random matrix on random real-line families with entries bounded by a Gaussian envelope.
inline CDMatrix random_cd(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double width, bool square = false) {
  const GroupSpec r = GroupSpec::real_line();
  std::uniform_real_distribution<double> pos(-6, 6);
  std::vector<GroupPoint> a, b;
  for (std::size_t i = 0; i < rows; ++i) a.emplace_back(pos(rng));
  if (square) b = a;
  else
    for (std::size_t i = 0; i < cols; ++i) b.emplace_back(pos(rng));
  CDMatrix m;
  m.rows = PointFamily(r, a);
  m.cols = PointFamily(r, b);
  m.envelope = radial_envelope(line_disp(), [width](double t) { return std::exp(-t * t / (2 * width * width)); });
  randomize_entries(rng, m);
  return m;
}

}  // namespace kframe::testing
