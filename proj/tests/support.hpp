#pragma once

// Small fixtures shared by the test binaries.

#include <cmath>
#include <random>
#include <vector>

#include "aafwi/gradient.hpp"
#include "aafwi/grid.hpp"

namespace aafwi::testing {

inline std::vector<double> random_field(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Two-layer model with a smooth random wobble so gradients are not degenerate.
inline VelocityModel test_model(const Grid2D& g, double c_top = 2000.0, double c_bottom = 2500.0) {
  std::vector<double> c(g.size());
  for (int ix = 0; ix < g.nx; ++ix)
    for (int iz = 0; iz < g.nz; ++iz) {
      const double base = iz < g.nz / 2 ? c_top : c_bottom;
      c[g.index(ix, iz)] = base * (1.0 + 0.02 * std::sin(0.3 * ix) * std::cos(0.2 * iz));
    }
  return VelocityModel::from_velocity(g, c);
}

/// Sources near the top, receivers along a line below them.
inline Survey test_survey(const Grid2D& g, int n_sources, int n_receivers, int nt, double dt, double freq = 20.0,
                          int border = 10) {
  Survey s;
  s.geometry.sources = AcquisitionGeometry::line(g, n_sources, 3.5 * g.dz, 2.0 * g.dx);
  s.geometry.receivers = AcquisitionGeometry::line(g, n_receivers, 2.5 * g.dz, g.dx);
  s.geometry.dt = dt;
  s.geometry.nt = nt;
  s.wavelet = make_ricker(freq, dt, nt, 1.2 / freq);
  s.config.border_width = border;
  return s;
}

}  // namespace aafwi::testing
