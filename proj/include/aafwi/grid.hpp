#pragma once

// Grids, models, acquisition geometry and source wavelets.
//
// Cell (ix, iz) is stored at ix * nz + iz (depth fastest) and its sample point
// sits at the cell centre ((ix + 1/2) dx, (iz + 1/2) dz). All models carry
// squared slowness m = 1 / c^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aafwi {

using Field = std::vector<double>;

struct Grid2D {
  int nx = 0;  ///< cells across
  int nz = 0;  ///< cells in depth
  double dx = 0.0;
  double dz = 0.0;

  Grid2D() = default;
  Grid2D(int nx_, int nz_, double dx_, double dz_) : nx(nx_), nz(nz_), dx(dx_), dz(dz_) {
    if (nx < 3 || nz < 3) throw std::invalid_argument("Grid2D: nx and nz must be >= 3");
    if (!(dx > 0.0) || !(dz > 0.0)) throw std::invalid_argument("Grid2D: spacing must be positive");
  }

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz); }
  std::size_t index(int ix, int iz) const {
    return static_cast<std::size_t>(ix) * static_cast<std::size_t>(nz) + static_cast<std::size_t>(iz);
  }
  double x_center(int ix) const { return (ix + 0.5) * dx; }
  double z_center(int iz) const { return (iz + 0.5) * dz; }

  /// Sample points span the cell centres; positions outside this box cannot be interpolated.
  bool contains(double x, double z) const {
    return x >= 0.5 * dx && x <= (nx - 0.5) * dx && z >= 0.5 * dz && z <= (nz - 0.5) * dz;
  }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* who) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite value");
}

}  // namespace detail

/// Squared slowness per cell. Every value is positive and finite.
class VelocityModel {
 public:
  VelocityModel() = default;
  VelocityModel(Grid2D grid, Field m) : grid_(grid), m_(std::move(m)) {
    if (m_.size() != grid_.size()) throw std::invalid_argument("VelocityModel: size does not match grid");
    for (double v : m_)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("VelocityModel: squared slowness must be positive and finite");
  }

  static VelocityModel from_velocity(Grid2D grid, std::span<const double> c) {
    Field m(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!(c[i] > 0.0)) throw std::invalid_argument("VelocityModel: velocity must be positive");
      m[i] = 1.0 / (c[i] * c[i]);
    }
    return {grid, std::move(m)};
  }

  const Grid2D& grid() const { return grid_; }
  const Field& m() const { return m_; }
  double operator[](std::size_t i) const { return m_[i]; }

  double max_velocity() const { return 1.0 / std::sqrt(*std::min_element(m_.begin(), m_.end())); }
  double min_velocity() const { return 1.0 / std::sqrt(*std::max_element(m_.begin(), m_.end())); }

 private:
  Grid2D grid_;
  Field m_;
};

/// Perturbation of squared slowness; any finite value is allowed.
class ReflectivityModel {
 public:
  ReflectivityModel() = default;
  ReflectivityModel(Grid2D grid, Field mr) : grid_(grid), mr_(std::move(mr)) {
    if (mr_.size() != grid_.size()) throw std::invalid_argument("ReflectivityModel: size does not match grid");
    detail::require_finite(mr_, "ReflectivityModel");
  }
  static ReflectivityModel zeros(Grid2D grid) { return {grid, Field(grid.size(), 0.0)}; }

  const Grid2D& grid() const { return grid_; }
  const Field& values() const { return mr_; }

 private:
  Grid2D grid_;
  Field mr_;
};

struct Position {
  double x = 0.0;  ///< metres from the left edge
  double z = 0.0;  ///< metres below the top edge
};

/// Sources and receivers in metres plus the time axis shared by every shot.
struct AcquisitionGeometry {
  std::vector<Position> sources;
  std::vector<Position> receivers;
  double dt = 0.0;
  int nt = 0;

  double duration() const { return nt * dt; }

  void validate(const Grid2D& grid) const {
    if (!(dt > 0.0)) throw std::invalid_argument("AcquisitionGeometry: dt must be positive");
    if (nt < 2) throw std::invalid_argument("AcquisitionGeometry: nt must be >= 2");
    if (sources.empty() || receivers.empty())
      throw std::invalid_argument("AcquisitionGeometry: need at least one source and one receiver");
    for (const auto& p : sources)
      if (!grid.contains(p.x, p.z)) throw std::invalid_argument("AcquisitionGeometry: source outside grid");
    for (const auto& p : receivers)
      if (!grid.contains(p.x, p.z)) throw std::invalid_argument("AcquisitionGeometry: receiver outside grid");
  }

  /// `count` points evenly spread across the width at a fixed depth, inset by `margin` metres.
  static std::vector<Position> line(const Grid2D& grid, int count, double depth, double margin) {
    std::vector<Position> out;
    const double left = 0.5 * grid.dx + margin;
    const double right = (grid.nx - 0.5) * grid.dx - margin;
    for (int i = 0; i < count; ++i) {
      const double x = count == 1 ? 0.5 * (left + right) : left + (right - left) * i / (count - 1);
      out.push_back({x, depth});
    }
    return out;
  }
};

struct SourceWavelet {
  std::vector<double> samples;
  double peak_freq = 0.0;
  double t0 = 0.0;
};

/// Ricker wavelet (1 - 2 pi^2 f^2 tau^2) exp(-pi^2 f^2 tau^2), tau = i dt - t0.
inline SourceWavelet make_ricker(double peak_freq, double dt, int nt, double t0) {
  if (!(peak_freq > 0.0)) throw std::invalid_argument("make_ricker: peak frequency must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("make_ricker: dt must be positive");
  if (nt < 2) throw std::invalid_argument("make_ricker: nt must be >= 2");
  SourceWavelet w{std::vector<double>(static_cast<std::size_t>(nt)), peak_freq, t0};
  const double pf2 = std::numbers::pi * std::numbers::pi * peak_freq * peak_freq;
  for (int i = 0; i < nt; ++i) {
    const double tau = i * dt - t0;
    const double a = pf2 * tau * tau;
    w.samples[static_cast<std::size_t>(i)] = (1.0 - 2.0 * a) * std::exp(-a);
  }
  return w;
}

/// Piecewise-constant layers. `layer_tops[i]` is the depth (m) where layer i starts;
/// a cell belongs to the deepest layer whose top is at or above its centre.
inline VelocityModel make_layered_model(const Grid2D& grid, std::span<const double> layer_tops,
                                        std::span<const double> layer_velocities) {
  if (layer_tops.empty() || layer_tops.size() != layer_velocities.size())
    throw std::invalid_argument("make_layered_model: need one velocity per layer");
  for (std::size_t i = 1; i < layer_tops.size(); ++i)
    if (!(layer_tops[i] > layer_tops[i - 1]))
      throw std::invalid_argument("make_layered_model: layer depths must be strictly increasing");
  for (double c : layer_velocities)
    if (!(c > 0.0)) throw std::invalid_argument("make_layered_model: velocities must be positive");

  Field column(static_cast<std::size_t>(grid.nz));
  for (int iz = 0; iz < grid.nz; ++iz) {
    const double z = grid.z_center(iz);
    std::size_t layer = 0;
    while (layer + 1 < layer_tops.size() && layer_tops[layer + 1] <= z) ++layer;
    const double c = layer_velocities[layer];
    column[static_cast<std::size_t>(iz)] = 1.0 / (c * c);
  }
  Field m(grid.size());
  for (int ix = 0; ix < grid.nx; ++ix)
    std::copy(column.begin(), column.end(), m.begin() + static_cast<std::ptrdiff_t>(grid.index(ix, 0)));
  return {grid, std::move(m)};
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int half = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + half)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

/// Separable Gaussian blur (standard deviation `radius` cells), edge-replicated.
inline Field gaussian_blur(const Grid2D& grid, std::span<const double> values, double radius) {
  if (radius < 0.0) throw std::invalid_argument("smooth_model: radius must be >= 0");
  Field out(values.begin(), values.end());
  if (radius == 0.0) return out;
  const auto k = detail::gaussian_kernel(radius);
  const int half = static_cast<int>(k.size() / 2);
  Field tmp(out.size());
  const int nx = grid.nx, nz = grid.nz;

  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) {
      double s = 0.0;
      for (int j = -half; j <= half; ++j)
        s += k[static_cast<std::size_t>(j + half)] * out[grid.index(ix, std::clamp(iz + j, 0, nz - 1))];
      tmp[grid.index(ix, iz)] = s;
    }
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) {
      double s = 0.0;
      for (int j = -half; j <= half; ++j)
        s += k[static_cast<std::size_t>(j + half)] * tmp[grid.index(std::clamp(ix + j, 0, nx - 1), iz)];
      out[grid.index(ix, iz)] = s;
    }
  return out;
}

inline VelocityModel smooth_model(const VelocityModel& model, double radius) {
  return {model.grid(), gaussian_blur(model.grid(), model.m(), radius)};
}

/// m_true - m_background, the target of least-squares migration.
inline ReflectivityModel reflectivity_between(const VelocityModel& truth, const VelocityModel& background) {
  if (!(truth.grid() == background.grid()))
    throw std::invalid_argument("reflectivity_between: grids differ");
  Field r(truth.m().size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = truth[i] - background[i];
  return {truth.grid(), std::move(r)};
}

}  // namespace aafwi
