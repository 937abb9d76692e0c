#pragma once

// Constant-density acoustic propagation on a sponge-padded grid.
//
// Discrete forward scheme, for every cell of the padded grid and n = 0 .. nt-2:
//
//   mp * [(1 + a) u^{n+1} - 2 u^n + (1 - a) u^{n-1}] / dt^2 = Lap u^n + s^n
//
// with u^{-1} = u^0 = 0, mp the edge-replicated squared slowness and a >= 0 the
// sponge damping (zero inside the physical region). The bracket divided by dt^2
// is what the rest of the code calls the second time derivative d2^n; it is
// computed as (Lap u^n + s^n) / mp.
//
// Adjoint: with r^n the receiver-injected, quadrature-weighted residual, the
// reverse recursion
//
//   q^n = C [2 q^{n+1} - (1 - a) q^{n+2} + B (Lap q^{n+1} + r^n)],  C = 1/(1+a), B = dt^2/mp
//
// starting from q^{nt} = q^{nt+1} = 0 has the same form as the forward step run
// backwards, and the exact gradient of the discrete misfit is
//
//   dJ/dmp = - sum_n d2^n q^{n+1}.
//
// The adjoint wavefield reported to callers is v^n = q^{n+1} / dt so that the
// gradient reads - sum_n d2^n v^n dt.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aafwi/errors.hpp"
#include "aafwi/gather.hpp"
#include "aafwi/grid.hpp"

namespace aafwi {

enum class HistoryMode { full, checkpoint };

struct SimConfig {
  int border_width = 30;            ///< sponge cells on each absorbing side
  double damping_strength = 0.0053; ///< per-step amplitude factor exp(-strength * d^2), d in cells
  double cfl_safety = 1.0;
  bool absorbing_top = false;       ///< false leaves a reflecting (u = 0) top edge
  HistoryMode history = HistoryMode::full;
  int checkpoint_interval = 0;      ///< steps between checkpoints; 0 picks ceil(sqrt(nt))

  void validate() const {
    if (border_width < 0) throw std::invalid_argument("SimConfig: border_width must be >= 0");
    if (!(damping_strength >= 0.0)) throw std::invalid_argument("SimConfig: damping_strength must be >= 0");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw std::invalid_argument("SimConfig: cfl_safety must be in (0, 1]");
    if (checkpoint_interval < 0) throw std::invalid_argument("SimConfig: checkpoint_interval must be >= 0");
  }
};

/// Largest stable time step of the explicit scheme: safety * h / (c_max sqrt 2), h = min(dx, dz).
inline double cfl_check(const VelocityModel& model, const SimConfig& config = {}) {
  const double h = std::min(model.grid().dx, model.grid().dz);
  return config.cfl_safety * h / (model.max_velocity() * std::numbers::sqrt2);
}

/// Physical grid surrounded by the sponge, stored with a one-cell zero halo.
struct PaddedLayout {
  Grid2D grid;
  int left = 0;  ///< sponge cells left and right
  int top = 0;   ///< sponge cells above (0 for a reflecting top)
  int bottom = 0;
  int nx = 0;    ///< padded cells across
  int nz = 0;    ///< padded cells in depth
  int stride = 0;

  PaddedLayout() = default;
  PaddedLayout(const Grid2D& g, const SimConfig& c)
      : grid(g), left(c.border_width), top(c.absorbing_top ? c.border_width : 0), bottom(c.border_width),
        nx(g.nx + 2 * c.border_width), nz(g.nz + top + c.border_width), stride(nz + 2) {}

  std::size_t size() const { return static_cast<std::size_t>(nx + 2) * static_cast<std::size_t>(stride); }
  std::size_t at(int px, int pz) const {
    return static_cast<std::size_t>(px + 1) * static_cast<std::size_t>(stride) + static_cast<std::size_t>(pz + 1);
  }
  /// Physical cell whose value a padded cell replicates.
  std::size_t owner(int px, int pz) const {
    return grid.index(std::clamp(px - left, 0, grid.nx - 1), std::clamp(pz - top, 0, grid.nz - 1));
  }
  std::size_t at_physical(int ix, int iz) const { return at(ix + left, iz + top); }
};

struct Tap {
  std::size_t index;
  double weight;
};

/// Coefficients of the time stepper for one model. Immutable once built.
class Propagator {
 public:
  Propagator(const VelocityModel& model, const SimConfig& config, double dt)
      : layout_(model.grid(), config), dt_(dt) {
    config.validate();
    const std::size_t n = layout_.size();
    mass_.assign(n, 0.0);
    inv_mass_.assign(n, 0.0);
    c2_.assign(n, 0.0);
    c1_.assign(n, 0.0);
    cb_.assign(n, 0.0);
    damping_.assign(n, 0.0);
    const double s = config.damping_strength;
    for (int px = 0; px < layout_.nx; ++px)
      for (int pz = 0; pz < layout_.nz; ++pz) {
        const std::size_t i = layout_.at(px, pz);
        const double m = model[layout_.owner(px, pz)];
        const int ddx = std::max({0, layout_.left - px, px - (layout_.left + model.grid().nx - 1)});
        const int ddz = std::max({0, layout_.top - pz, pz - (layout_.top + model.grid().nz - 1)});
        const double g = std::exp(-s * static_cast<double>(ddx * ddx + ddz * ddz));
        const double a = (1.0 - g) / (1.0 + g);
        const double C = 1.0 / (1.0 + a);
        mass_[i] = m;
        inv_mass_[i] = 1.0 / m;
        damping_[i] = a;
        c2_[i] = 2.0 * C;
        c1_[i] = C * (1.0 - a);
        cb_[i] = C * dt * dt / m;
      }
    const auto& g = model.grid();
    idx2_ = 1.0 / (g.dx * g.dx);
    idz2_ = 1.0 / (g.dz * g.dz);
  }

  const PaddedLayout& layout() const { return layout_; }
  double dt() const { return dt_; }
  const Field& mass() const { return mass_; }
  const Field& inv_mass() const { return inv_mass_; }
  const Field& damping() const { return damping_; }
  Field zeros() const { return Field(layout_.size(), 0.0); }

  /// out = 5-point Laplacian of u (zero outside the padded grid).
  void laplacian(const double* u, double* out) const {
    const int S = layout_.stride;
    for (int px = 0; px < layout_.nx; ++px) {
      const std::size_t base = layout_.at(px, 0);
      for (int pz = 0; pz < layout_.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        const double c = u[i];
        out[i] = (u[i + S] + u[i - S] - 2.0 * c) * idx2_ + (u[i + 1] + u[i - 1] - 2.0 * c) * idz2_;
      }
    }
  }

  /// next = C (2 cur - (1 - a) prev + B h).
  void advance(const double* prev, const double* cur, const double* h, double* next) const {
    for (int px = 0; px < layout_.nx; ++px) {
      const std::size_t base = layout_.at(px, 0);
      for (int pz = 0; pz < layout_.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        next[i] = c2_[i] * cur[i] - c1_[i] * prev[i] + cb_[i] * h[i];
      }
    }
  }

  void second_derivative(const double* h, double* d2) const {
    for (int px = 0; px < layout_.nx; ++px) {
      const std::size_t base = layout_.at(px, 0);
      for (int pz = 0; pz < layout_.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        d2[i] = h[i] * inv_mass_[i];
      }
    }
  }

  /// Bilinear taps of a physical position onto the padded grid.
  std::vector<Tap> taps(Position p) const {
    const auto& g = layout_.grid;
    if (!g.contains(p.x, p.z)) throw std::invalid_argument("position outside the physical grid");
    const double fx = p.x / g.dx - 0.5 + layout_.left;
    const double fz = p.z / g.dz - 0.5 + layout_.top;
    const int i0 = std::min(static_cast<int>(std::floor(fx)), layout_.nx - 2);
    const int j0 = std::min(static_cast<int>(std::floor(fz)), layout_.nz - 2);
    const double tx = fx - i0, tz = fz - j0;
    std::vector<Tap> out;
    const double w[4] = {(1 - tx) * (1 - tz), (1 - tx) * tz, tx * (1 - tz), tx * tz};
    const int di[4] = {0, 0, 1, 1}, dj[4] = {0, 1, 0, 1};
    for (int k = 0; k < 4; ++k)
      if (w[k] != 0.0) out.push_back({layout_.at(i0 + di[k], j0 + dj[k]), w[k]});
    return out;
  }

  /// Edge-replicated copy of a physical field onto the padded grid (halo stays zero).
  Field extend(std::span<const double> physical) const {
    Field out(layout_.size(), 0.0);
    for (int px = 0; px < layout_.nx; ++px)
      for (int pz = 0; pz < layout_.nz; ++pz) out[layout_.at(px, pz)] = physical[layout_.owner(px, pz)];
    return out;
  }

  /// Transpose of extend(): each padded value is added to the physical cell it replicates.
  Field restrict_sum(std::span<const double> padded) const {
    Field out(layout_.grid.size(), 0.0);
    for (int px = 0; px < layout_.nx; ++px)
      for (int pz = 0; pz < layout_.nz; ++pz) out[layout_.owner(px, pz)] += padded[layout_.at(px, pz)];
    return out;
  }

  /// Physical-region window of a padded field.
  Field crop(std::span<const double> padded) const {
    const auto& g = layout_.grid;
    Field out(g.size());
    for (int ix = 0; ix < g.nx; ++ix)
      for (int iz = 0; iz < g.nz; ++iz) out[g.index(ix, iz)] = padded[layout_.at_physical(ix, iz)];
    return out;
  }

  /// Discrete energy between levels n and n+1; non-increasing once sources stop.
  double energy(const double* cur, const double* next) const {
    Field lap(layout_.size(), 0.0);
    laplacian(cur, lap.data());
    double kinetic = 0.0, strain = 0.0;
    for (int px = 0; px < layout_.nx; ++px)
      for (int pz = 0; pz < layout_.nz; ++pz) {
        const std::size_t i = layout_.at(px, pz);
        const double v = (next[i] - cur[i]) / dt_;
        kinetic += mass_[i] * v * v;
        strain -= lap[i] * next[i];
      }
    return 0.5 * (kinetic + strain);
  }

 private:
  PaddedLayout layout_;
  double dt_;
  Field mass_, inv_mass_, damping_;
  Field c2_, c1_, cb_;
  double idx2_ = 0.0, idz2_ = 0.0;
};

namespace detail {

inline void inject(double* h, std::span<const Tap> taps, double amplitude) {
  for (const auto& t : taps) h[t.index] += t.weight * amplitude;
}

inline double sample(const double* u, std::span<const Tap> taps) {
  double s = 0.0;
  for (const auto& t : taps) s += t.weight * u[t.index];
  return s;
}

inline void require_finite_field(std::span<const double> u, const char* who) {
  for (double v : u)
    if (!std::isfinite(v)) throw StabilityError(std::string(who) + ": wavefield became non-finite");
}

}  // namespace detail

/// Shared validation and tap tables for one shot.
struct ShotSetup {
  std::vector<Tap> source;
  std::vector<std::vector<Tap>> receivers;
  std::vector<double> source_amplitude;  ///< wavelet sample / cell area, per time step
};

inline void check_stability(const VelocityModel& model, const AcquisitionGeometry& geometry, const SimConfig& config) {
  config.validate();
  geometry.validate(model.grid());
  const double bound = cfl_check(model, config);
  if (geometry.dt > bound * (1.0 + 1e-12))
    throw StabilityError("dt = " + std::to_string(geometry.dt) + " exceeds the CFL bound " + std::to_string(bound));
}

inline ShotSetup make_shot_setup(const Propagator& prop, const AcquisitionGeometry& geometry,
                                 const SourceWavelet* wavelet, int source_index) {
  ShotSetup s;
  for (const auto& r : geometry.receivers) s.receivers.push_back(prop.taps(r));
  if (wavelet) {
    if (source_index < 0 || source_index >= static_cast<int>(geometry.sources.size()))
      throw std::invalid_argument("source index out of range");
    if (static_cast<int>(wavelet->samples.size()) < geometry.nt)
      throw std::invalid_argument("wavelet shorter than nt");
    s.source = prop.taps(geometry.sources[static_cast<std::size_t>(source_index)]);
    const auto& g = prop.layout().grid;
    const double inv_area = 1.0 / (g.dx * g.dz);
    s.source_amplitude.resize(static_cast<std::size_t>(geometry.nt));
    for (int n = 0; n < geometry.nt; ++n)
      s.source_amplitude[static_cast<std::size_t>(n)] = wavelet->samples[static_cast<std::size_t>(n)] * inv_area;
  }
  return s;
}

/// Second time derivatives d2^n (n = 0 .. nt-2) of a forward run, on the padded grid.
/// Full mode keeps every slice; checkpoint mode keeps (u^{k-1}, u^k) every K steps and
/// recomputes one segment at a time on demand.
class ForwardHistory {
 public:
  ForwardHistory() = default;
  ForwardHistory(std::shared_ptr<const Propagator> prop, std::vector<Tap> source, std::vector<double> amplitude,
                 int nt, HistoryMode mode, int interval)
      : prop_(std::move(prop)), source_(std::move(source)), amplitude_(std::move(amplitude)), nt_(nt), mode_(mode) {
    slice_ = prop_->layout().size();
    interval_ = interval > 0 ? interval : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nt))));
  }

  int steps() const { return nt_ - 1; }
  const Propagator& propagator() const { return *prop_; }
  std::size_t slice_size() const { return slice_; }
  HistoryMode mode() const { return mode_; }

  std::span<const double> d2(int n) {
    if (n < 0 || n >= steps()) throw std::out_of_range("ForwardHistory: step out of range");
    if (mode_ == HistoryMode::full) return {full_.data() + static_cast<std::size_t>(n) * slice_, slice_};
    const int seg = n / interval_;
    if (seg != cached_segment_) recompute(seg);
    return {segment_.data() + static_cast<std::size_t>(n - seg * interval_) * slice_, slice_};
  }

  // Used by the forward solver while it runs.
  double* full_slot(int n) { return full_.data() + static_cast<std::size_t>(n) * slice_; }
  void reserve_full() { full_.assign(static_cast<std::size_t>(steps()) * slice_, 0.0); }
  void add_checkpoint(const Field& prev, const Field& cur) {
    checkpoints_.push_back(prev);
    checkpoints_.push_back(cur);
  }
  int interval() const { return interval_; }

 private:
  void recompute(int seg) {
    const Propagator& P = *prop_;
    const int n0 = seg * interval_;
    const int n1 = std::min(n0 + interval_, steps());
    Field prev = checkpoints_[2 * static_cast<std::size_t>(seg)];
    Field cur = checkpoints_[2 * static_cast<std::size_t>(seg) + 1];
    Field next = P.zeros(), h = P.zeros();
    segment_.assign(static_cast<std::size_t>(interval_) * slice_, 0.0);
    for (int n = n0; n < n1; ++n) {
      P.laplacian(cur.data(), h.data());
      if (!source_.empty()) detail::inject(h.data(), source_, amplitude_[static_cast<std::size_t>(n)]);
      P.second_derivative(h.data(), segment_.data() + static_cast<std::size_t>(n - n0) * slice_);
      P.advance(prev.data(), cur.data(), h.data(), next.data());
      std::swap(prev, cur);
      std::swap(cur, next);
    }
    cached_segment_ = seg;
  }

  std::shared_ptr<const Propagator> prop_;
  std::vector<Tap> source_;
  std::vector<double> amplitude_;
  int nt_ = 0;
  HistoryMode mode_ = HistoryMode::full;
  std::size_t slice_ = 0;
  int interval_ = 1;
  Field full_;
  std::vector<Field> checkpoints_;
  Field segment_;
  int cached_segment_ = -1;
};

struct ForwardResult {
  ShotGather gather;
  ForwardHistory history;  ///< empty unless requested
};

/// Called with (n, u^n) for every time level n = 0 .. nt-1.
using WavefieldObserver = std::function<void(int, std::span<const double>)>;

namespace detail {

inline ForwardResult run_forward(std::shared_ptr<const Propagator> prop, const ShotSetup& setup, int source_index,
                                 int nt, const SimConfig& config, bool keep_history, const WavefieldObserver& observe) {
  const Propagator& P = *prop;
  ForwardResult out;
  out.gather = ShotGather(source_index, nt, static_cast<int>(setup.receivers.size()), P.dt());
  if (keep_history) {
    out.history = ForwardHistory(prop, setup.source, setup.source_amplitude, nt, config.history, config.checkpoint_interval);
    if (config.history == HistoryMode::full) out.history.reserve_full();
  }
  Field prev = P.zeros(), cur = P.zeros(), next = P.zeros(), h = P.zeros(), d2;
  if (keep_history && config.history == HistoryMode::checkpoint) d2 = P.zeros();
  if (observe) observe(0, cur);
  for (int n = 0; n + 1 < nt; ++n) {
    if (keep_history && config.history == HistoryMode::checkpoint && n % out.history.interval() == 0)
      out.history.add_checkpoint(prev, cur);
    P.laplacian(cur.data(), h.data());
    inject(h.data(), setup.source, setup.source_amplitude[static_cast<std::size_t>(n)]);
    if (keep_history && config.history == HistoryMode::full) P.second_derivative(h.data(), out.history.full_slot(n));
    P.advance(prev.data(), cur.data(), h.data(), next.data());
    std::swap(prev, cur);
    std::swap(cur, next);
    auto row = out.gather.row(n + 1);
    for (std::size_t r = 0; r < setup.receivers.size(); ++r) row[r] = sample(cur.data(), setup.receivers[r]);
    if (observe) observe(n + 1, cur);
  }
  require_finite_field(cur, "forward_solve");
  return out;
}

}  // namespace detail

/// Forward modelling of one shot. Receiver traces start at t = 0 (always zero).
inline ForwardResult forward_solve(const VelocityModel& model, const SourceWavelet& wavelet,
                                   const AcquisitionGeometry& geometry, int source_index, const SimConfig& config = {},
                                   bool keep_history = true, const WavefieldObserver& observe = {}) {
  check_stability(model, geometry, config);
  auto prop = std::make_shared<const Propagator>(model, config, geometry.dt);
  const auto setup = make_shot_setup(*prop, geometry, &wavelet, source_index);
  return detail::run_forward(std::move(prop), setup, source_index, geometry.nt, config, keep_history, observe);
}

/// Born scattered data from an existing background history (d2 of u_0), any access order.
inline ShotGather born_from_history(ForwardHistory& history, std::span<const double> reflectivity,
                                    const ShotSetup& setup, int source_index) {
  const Propagator& P = history.propagator();
  const int nt = history.steps() + 1;
  ShotGather out(source_index, nt, static_cast<int>(setup.receivers.size()), P.dt());
  const Field mr = P.extend(reflectivity);
  Field prev = P.zeros(), cur = P.zeros(), next = P.zeros(), h = P.zeros();
  const auto& L = P.layout();
  for (int n = 0; n + 1 < nt; ++n) {
    P.laplacian(cur.data(), h.data());
    const auto d2 = history.d2(n);
    for (int px = 0; px < L.nx; ++px) {
      const std::size_t base = L.at(px, 0);
      for (int pz = 0; pz < L.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        h[i] -= mr[i] * d2[i];
      }
    }
    P.advance(prev.data(), cur.data(), h.data(), next.data());
    std::swap(prev, cur);
    std::swap(cur, next);
    auto row = out.row(n + 1);
    for (std::size_t r = 0; r < setup.receivers.size(); ++r) row[r] = detail::sample(cur.data(), setup.receivers[r]);
  }
  detail::require_finite_field(cur, "born_solve");
  return out;
}

/// Born modelling: background and scattered fields are stepped together, nothing is stored.
inline ShotGather born_solve(const VelocityModel& background, const ReflectivityModel& reflectivity,
                             const SourceWavelet& wavelet, const AcquisitionGeometry& geometry, int source_index,
                             const SimConfig& config = {}) {
  if (!(background.grid() == reflectivity.grid())) throw std::invalid_argument("born_solve: grids differ");
  check_stability(background, geometry, config);
  const Propagator P(background, config, geometry.dt);
  const auto setup = make_shot_setup(P, geometry, &wavelet, source_index);
  const int nt = geometry.nt;
  ShotGather out(source_index, nt, static_cast<int>(setup.receivers.size()), P.dt());
  const Field mr = P.extend(reflectivity.values());
  Field u0p = P.zeros(), u0 = P.zeros(), u0n = P.zeros(), h0 = P.zeros();
  Field up = P.zeros(), u = P.zeros(), un = P.zeros(), h = P.zeros();
  const auto& L = P.layout();
  const auto& inv_m = P.inv_mass();
  for (int n = 0; n + 1 < nt; ++n) {
    P.laplacian(u0.data(), h0.data());
    detail::inject(h0.data(), setup.source, setup.source_amplitude[static_cast<std::size_t>(n)]);
    P.laplacian(u.data(), h.data());
    for (int px = 0; px < L.nx; ++px) {
      const std::size_t base = L.at(px, 0);
      for (int pz = 0; pz < L.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        h[i] -= mr[i] * (h0[i] * inv_m[i]);
      }
    }
    P.advance(u0p.data(), u0.data(), h0.data(), u0n.data());
    P.advance(up.data(), u.data(), h.data(), un.data());
    std::swap(u0p, u0);
    std::swap(u0, u0n);
    std::swap(up, u);
    std::swap(u, un);
    auto row = out.row(n + 1);
    for (std::size_t r = 0; r < setup.receivers.size(); ++r) row[r] = detail::sample(u.data(), setup.receivers[r]);
  }
  detail::require_finite_field(u, "born_solve");
  return out;
}

/// Reverse sweep driven by a data residual. `on_level(n, q^n)` is called for n = nt-1 .. 1.
template <class OnLevel>
void adjoint_sweep(const Propagator& P, const ShotSetup& setup, const ShotGather& residual, OnLevel&& on_level) {
  const int nt = residual.nt;
  if (static_cast<int>(setup.receivers.size()) != residual.n_receivers)
    throw std::invalid_argument("adjoint source does not match the receiver count");
  Field q2 = P.zeros(), q1 = P.zeros(), q0 = P.zeros(), h = P.zeros();  // q^{n+2}, q^{n+1}, q^n
  for (int n = nt - 1; n >= 1; --n) {
    P.laplacian(q1.data(), h.data());
    const double w = time_weight(n, nt, residual.dt);
    const auto row = residual.row(n);
    for (std::size_t r = 0; r < setup.receivers.size(); ++r) detail::inject(h.data(), setup.receivers[r], w * row[r]);
    P.advance(q2.data(), q1.data(), h.data(), q0.data());
    on_level(n, std::span<const double>(q0));
    std::swap(q2, q1);
    std::swap(q1, q0);
  }
  detail::require_finite_field(q1, "adjoint_solve");
}

/// Adjoint wavefield v^n (n = 0 .. nt-2) on the padded grid.
struct AdjointHistory {
  PaddedLayout layout;
  int nt = 0;
  std::vector<double> values;

  std::span<const double> at(int n) const {
    return {values.data() + static_cast<std::size_t>(n) * layout.size(), layout.size()};
  }
};

/// Backward solve driven by `adjoint_source` (the data residual f - g, unweighted).
inline AdjointHistory adjoint_solve(const VelocityModel& model, const ShotGather& adjoint_source,
                                    const AcquisitionGeometry& geometry, const SimConfig& config = {}) {
  check_stability(model, geometry, config);
  if (adjoint_source.nt != geometry.nt || adjoint_source.n_receivers != static_cast<int>(geometry.receivers.size()))
    throw std::invalid_argument("adjoint_solve: adjoint source does not match the geometry");
  const Propagator P(model, config, geometry.dt);
  const auto setup = make_shot_setup(P, geometry, nullptr, 0);
  AdjointHistory out{P.layout(), geometry.nt, std::vector<double>(static_cast<std::size_t>(geometry.nt - 1) * P.layout().size(), 0.0)};
  const double inv_dt = 1.0 / geometry.dt;
  adjoint_sweep(P, setup, adjoint_source, [&](int n, std::span<const double> q) {
    double* dst = out.values.data() + static_cast<std::size_t>(n - 1) * P.layout().size();
    for (std::size_t i = 0; i < q.size(); ++i) dst[i] = q[i] * inv_dt;
  });
  return out;
}

/// Zero-lag imaging  - sum_n d2^n q^{n+1}  summed back onto the physical grid.
inline Field adjoint_image(ForwardHistory& history, const ShotSetup& setup, const ShotGather& residual) {
  const Propagator& P = history.propagator();
  const auto& L = P.layout();
  Field image(L.size(), 0.0);
  adjoint_sweep(P, setup, residual, [&](int n, std::span<const double> q) {
    const auto d2 = history.d2(n - 1);
    for (int px = 0; px < L.nx; ++px) {
      const std::size_t base = L.at(px, 0);
      for (int pz = 0; pz < L.nz; ++pz) {
        const std::size_t i = base + static_cast<std::size_t>(pz);
        image[i] -= d2[i] * q[i];
      }
    }
  });
  return P.restrict_sum(image);
}

}  // namespace aafwi
