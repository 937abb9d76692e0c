#pragma once

// Least-squares objectives and their adjoint-state gradients.
//
// Data-space inner product: trapezoid in time (weights from time_weight), plain sum over
// receivers and shots. Model-space inner product: plain sum over physical cells.
// With these, apply_born_adjoint is the exact transpose of apply_born.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aafwi/gather.hpp"
#include "aafwi/grid.hpp"
#include "aafwi/parallel.hpp"
#include "aafwi/wave.hpp"

namespace aafwi {

struct ObjectiveEval {
  double value = 0.0;
  Field gradient;
  int gradient_eval_count_delta = 0;
};

/// 1/2 sum_s sum_t w_t sum_r (f - g)^2. Symmetric in its arguments.
inline double misfit_l2(const GatherSet& synthetic, const GatherSet& observed) {
  require_same_shape(synthetic, observed, "misfit_l2");
  double total = 0.0;
  for (std::size_t s = 0; s < synthetic.size(); ++s) {
    const auto& f = synthetic[s];
    const auto& g = observed[s];
    double shot = 0.0;
    for (int it = 0; it < f.nt; ++it) {
      double acc = 0.0;
      const auto rf = f.row(it);
      const auto rg = g.row(it);
      for (std::size_t r = 0; r < rf.size(); ++r) {
        const double d = rf[r] - rg[r];
        acc += d * d;
      }
      shot += time_weight(it, f.nt, f.dt) * acc;
    }
    total += shot;
  }
  return 0.5 * total;
}

/// dJ/df = f - g, per shot.
inline GatherSet adjoint_source(const GatherSet& synthetic, const GatherSet& observed) {
  require_same_shape(synthetic, observed, "adjoint_source");
  GatherSet out = synthetic;
  for (std::size_t s = 0; s < out.size(); ++s)
    for (std::size_t k = 0; k < out[s].samples.size(); ++k) out[s].samples[k] -= observed[s].samples[k];
  return out;
}

/// Shot-independent inputs of every modelling run.
struct Survey {
  SourceWavelet wavelet;
  AcquisitionGeometry geometry;
  SimConfig config;
  int threads = 1;

  int shots() const { return static_cast<int>(geometry.sources.size()); }
};

/// Forward-modelled data for every source.
inline GatherSet model_data(const VelocityModel& model, const Survey& survey) {
  GatherSet out(static_cast<std::size_t>(survey.shots()));
  parallel_for(survey.shots(), survey.threads, [&](int s) {
    out[static_cast<std::size_t>(s)] =
        forward_solve(model, survey.wavelet, survey.geometry, s, survey.config, false).gather;
  });
  return out;
}

/// J(m) and its gradient by one forward and one adjoint solve per shot.
inline ObjectiveEval fwi_gradient(const VelocityModel& model, const GatherSet& observed, const Survey& survey) {
  if (static_cast<int>(observed.size()) != survey.shots())
    throw std::invalid_argument("fwi_gradient: observed data does not match the source count");
  const auto n = static_cast<std::size_t>(survey.shots());
  std::vector<Field> grads(n);
  std::vector<double> values(n, 0.0);
  parallel_for(survey.shots(), survey.threads, [&](int s) {
    auto fwd = forward_solve(model, survey.wavelet, survey.geometry, s, survey.config, true);
    const GatherSet syn{fwd.gather};
    const GatherSet obs{observed[static_cast<std::size_t>(s)]};
    values[static_cast<std::size_t>(s)] = misfit_l2(syn, obs);
    const auto residual = adjoint_source(syn, obs).front();
    const auto setup = make_shot_setup(fwd.history.propagator(), survey.geometry, nullptr, s);
    grads[static_cast<std::size_t>(s)] = adjoint_image(fwd.history, setup, residual);
  });
  ObjectiveEval out;
  for (double v : values) out.value += v;
  out.gradient = pairwise_sum(std::move(grads));
  out.gradient_eval_count_delta = 1;
  return out;
}

/// The model with squared slowness `m`, or nothing when it is not admissible
/// (non-positive or non-finite slowness, CFL violation).
inline std::optional<VelocityModel> admissible_model(std::span<const double> m, const Grid2D& grid, const Survey& survey) {
  std::optional<VelocityModel> model;
  try {
    model.emplace(grid, Field(m.begin(), m.end()));
    check_stability(*model, survey.geometry, survey.config);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  } catch (const StabilityError&) {
    return std::nullopt;
  }
  return model;
}

/// J(m) alone (forward solves only). Inadmissible models evaluate to +inf so that line
/// searches reject them.
inline double fwi_objective(std::span<const double> m, const Grid2D& grid, const GatherSet& observed,
                            const Survey& survey) {
  const auto model = admissible_model(m, grid, survey);
  if (!model) return std::numeric_limits<double>::infinity();
  return misfit_l2(model_data(*model, survey), observed);
}

/// Born operator L about a fixed background, plus its transpose. Background histories are
/// computed once per shot and reused by every application.
class BornOperator {
 public:
  BornOperator(VelocityModel background, Survey survey) : background_(std::move(background)), survey_(std::move(survey)) {
    check_stability(background_, survey_.geometry, survey_.config);
    prop_ = std::make_shared<const Propagator>(background_, survey_.config, survey_.geometry.dt);
    for (int s = 0; s < survey_.shots(); ++s) setups_.push_back(make_shot_setup(*prop_, survey_.geometry, &survey_.wavelet, s));
    histories_.resize(static_cast<std::size_t>(survey_.shots()));
  }

  const Grid2D& grid() const { return background_.grid(); }
  const VelocityModel& background() const { return background_; }
  const Survey& survey() const { return survey_; }
  std::size_t model_size() const { return grid().size(); }

  /// L m_r: scattered data at the receivers.
  GatherSet apply(std::span<const double> reflectivity) {
    if (reflectivity.size() != model_size()) throw std::invalid_argument("apply_born: size does not match grid");
    ensure_histories();
    GatherSet out(static_cast<std::size_t>(survey_.shots()));
    parallel_for(survey_.shots(), survey_.threads, [&](int s) {
      const auto k = static_cast<std::size_t>(s);
      out[k] = born_from_history(histories_[k], reflectivity, setups_[k], s);
    });
    return out;
  }

  /// L^T d: zero-lag cross-correlation of background d2 with the data-driven adjoint field.
  Field adjoint(const GatherSet& data) {
    if (static_cast<int>(data.size()) != survey_.shots()) throw std::invalid_argument("apply_born_adjoint: shot count mismatch");
    ensure_histories();
    std::vector<Field> parts(data.size());
    parallel_for(survey_.shots(), survey_.threads, [&](int s) {
      const auto k = static_cast<std::size_t>(s);
      parts[k] = adjoint_image(histories_[k], setups_[k], data[k]);
    });
    return pairwise_sum(std::move(parts));
  }

  GatherSet zero_data() const {
    GatherSet out;
    for (int s = 0; s < survey_.shots(); ++s)
      out.emplace_back(s, survey_.geometry.nt, static_cast<int>(survey_.geometry.receivers.size()), survey_.geometry.dt);
    return out;
  }

 private:
  void ensure_histories() {
    if (ready_) return;
    parallel_for(survey_.shots(), survey_.threads, [&](int s) {
      const auto k = static_cast<std::size_t>(s);
      histories_[k] = detail::run_forward(prop_, setups_[k], s, survey_.geometry.nt, survey_.config, true, {}).history;
    });
    ready_ = true;
  }

  VelocityModel background_;
  Survey survey_;
  std::shared_ptr<const Propagator> prop_;
  std::vector<ShotSetup> setups_;
  std::vector<ForwardHistory> histories_;
  bool ready_ = false;
};

inline GatherSet apply_born(BornOperator& op, std::span<const double> reflectivity) { return op.apply(reflectivity); }
inline Field apply_born_adjoint(BornOperator& op, const GatherSet& data) { return op.adjoint(data); }

/// 1/2 ||L m_r - d_r||^2 and its gradient L^T (L m_r - d_r).
inline ObjectiveEval lsrtm_objective(BornOperator& op, std::span<const double> reflectivity, const GatherSet& observed) {
  const auto predicted = op.apply(reflectivity);
  const auto residual = adjoint_source(predicted, observed);
  ObjectiveEval out;
  out.value = misfit_l2(predicted, observed);
  out.gradient = op.adjoint(residual);
  out.gradient_eval_count_delta = 1;
  return out;
}

inline double lsrtm_value(BornOperator& op, std::span<const double> reflectivity, const GatherSet& observed) {
  return misfit_l2(op.apply(reflectivity), observed);
}

/// Negated 5-point Laplacian with edge replication.
inline Field laplacian_filter(const Grid2D& grid, std::span<const double> image) {
  if (image.size() != grid.size()) throw std::invalid_argument("laplacian_filter: size does not match grid");
  Field out(image.size());
  const double idx2 = 1.0 / (grid.dx * grid.dx), idz2 = 1.0 / (grid.dz * grid.dz);
  auto at = [&](int ix, int iz) { return image[grid.index(std::clamp(ix, 0, grid.nx - 1), std::clamp(iz, 0, grid.nz - 1))]; };
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iz = 0; iz < grid.nz; ++iz) {
      const double c = at(ix, iz);
      const double lap = (at(ix + 1, iz) + at(ix - 1, iz) - 2.0 * c) * idx2 + (at(ix, iz + 1) + at(ix, iz - 1) - 2.0 * c) * idz2;
      out[grid.index(ix, iz)] = -lap;
    }
  return out;
}

}  // namespace aafwi
