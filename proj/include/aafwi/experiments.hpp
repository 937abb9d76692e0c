#pragma once

// Experiment pipeline behind the command-line tool: model generation, data synthesis,
// noise injection, inversion under each optimizer, RTM imaging.
//
// Layout under the output root (relative paths in [paths] are resolved against it):
//   <model_dir>/true_model.json, initial_model.json, reflectivity.json (lsrtm)
//   <data_dir>/shot_<k>.json                 clean data
//   <noisy_data_dir>/shot_<k>.json, noise.json
//   <output_dir>/<method>/report.csv, final_model.json, summary.json, snapshots/*.pgm
//   <output_dir>/rtm/rtm_image.*, rtm_filtered.*

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aafwi/anderson.hpp"
#include "aafwi/config.hpp"
#include "aafwi/gmres.hpp"
#include "aafwi/image.hpp"
#include "aafwi/lbfgs.hpp"
#include "aafwi/ncg.hpp"
#include "aafwi/problems.hpp"
#include "aafwi/steepest.hpp"

namespace aafwi {

namespace fs = std::filesystem;

enum class ExperimentMode { fwi, lsrtm };

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::fwi;

  fs::path model_dir = "model";
  fs::path data_dir = "data";
  fs::path noisy_data_dir = "data_noisy";
  fs::path output_dir = "runs";

  std::string model_kind = "layered";  // layered | file
  fs::path model_source;               // velocity grid file for kind = file
  Grid2D grid;
  std::vector<double> layer_tops, layer_velocities;
  double smoothing_radius = 0.0;

  double dt = 0.0;
  int nt = 0;
  double peak_freq = 0.0;
  double t0 = 0.0;
  int border_width = 30;
  bool absorbing_top = false;

  int n_sources = 0;
  double source_depth = 0.0;
  double source_margin = 0.0;
  int n_receivers = 0;
  double receiver_depth = 0.0;
  double receiver_margin = 0.0;

  std::string method = "sd";
  int memory = -1;  // -1: not given
  double eta = 0.0;
  double beta = 1.0;
  bool line_search = true;
  double budget = std::numeric_limits<double>::infinity();
  int max_iterations = 1 << 30;
  double gtol = 0.0;
  int snapshot_every = 10;
  bool zero_start = false;
  double tol = 0.0;

  bool noise_enabled = false;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  int threads = 1;

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "experiment.mode",
        "paths.model_dir", "paths.data_dir", "paths.noisy_data_dir", "paths.output_dir",
        "model.kind", "model.source", "model.nx", "model.nz", "model.dx", "model.dz", "model.layer_tops",
        "model.layer_velocities", "model.smoothing_radius",
        "physics.dt", "physics.nt", "physics.peak_freq", "physics.t0", "physics.border_width", "physics.absorbing_top",
        "geometry.n_sources", "geometry.source_depth", "geometry.source_margin", "geometry.n_receivers",
        "geometry.receiver_depth", "geometry.receiver_margin",
        "optimizer.method", "optimizer.memory", "optimizer.eta", "optimizer.beta", "optimizer.line_search",
        "optimizer.budget", "optimizer.max_iterations", "optimizer.gtol", "optimizer.snapshot_every",
        "optimizer.zero_start", "optimizer.tol",
        "noise.enabled", "noise.snr_db", "noise.seed"};
    return keys;
  }

  /// Reads and validates; relative paths are resolved against `root`.
  static ExperimentConfig from(const Config& c, const fs::path& root = {}) {
    c.require_known(known_keys());
    ExperimentConfig e;
    const auto mode = c.string("experiment.mode", "fwi");
    if (mode == "fwi") e.mode = ExperimentMode::fwi;
    else if (mode == "lsrtm") e.mode = ExperimentMode::lsrtm;
    else throw ConfigError("experiment.mode must be \"fwi\" or \"lsrtm\"");

    auto path = [&](const char* key, const fs::path& def) {
      const fs::path p = c.has(key) ? fs::path(c.string(key)) : def;
      return p.is_absolute() || root.empty() ? p : root / p;
    };
    e.model_dir = path("paths.model_dir", e.model_dir);
    e.data_dir = path("paths.data_dir", e.data_dir);
    e.noisy_data_dir = path("paths.noisy_data_dir", e.noisy_data_dir);
    e.output_dir = path("paths.output_dir", e.output_dir);

    e.model_kind = c.string("model.kind", "layered");
    if (e.model_kind == "layered") {
      try {
        e.grid = Grid2D(c.integer("model.nx"), c.integer("model.nz"), c.number("model.dx"), c.number("model.dz"));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
      e.layer_tops = c.numbers("model.layer_tops");
      e.layer_velocities = c.numbers("model.layer_velocities");
    } else if (e.model_kind == "file") {
      e.model_source = c.string("model.source");
      if (e.model_source.is_relative() && !root.empty()) e.model_source = root / e.model_source;
    } else {
      throw ConfigError("model.kind must be \"layered\" or \"file\"");
    }
    e.smoothing_radius = c.number("model.smoothing_radius", 0.0);
    if (!(e.smoothing_radius >= 0.0)) throw ConfigError("model.smoothing_radius must be >= 0");

    e.dt = c.number("physics.dt");
    e.nt = c.integer("physics.nt");
    e.peak_freq = c.number("physics.peak_freq");
    e.t0 = c.number("physics.t0", 1.0 / e.peak_freq);
    e.border_width = c.integer("physics.border_width", e.border_width);
    e.absorbing_top = c.boolean("physics.absorbing_top", e.absorbing_top);
    if (!(e.dt > 0.0) || e.nt < 2 || !(e.peak_freq > 0.0) || e.border_width < 0)
      throw ConfigError("physics: need dt > 0, nt >= 2, peak_freq > 0, border_width >= 0");

    e.n_sources = c.integer("geometry.n_sources");
    e.source_depth = c.number("geometry.source_depth");
    e.source_margin = c.number("geometry.source_margin", 0.0);
    e.n_receivers = c.integer("geometry.n_receivers");
    e.receiver_depth = c.number("geometry.receiver_depth");
    e.receiver_margin = c.number("geometry.receiver_margin", 0.0);
    if (e.n_sources < 1 || e.n_receivers < 1) throw ConfigError("geometry: need at least one source and receiver");

    e.method = c.string("optimizer.method", "sd");
    static const std::set<std::string> methods{"sd", "aa", "lbfgs", "ncg", "gmres"};
    if (!methods.count(e.method)) throw ConfigError("optimizer.method must be one of sd, aa, lbfgs, ncg, gmres");
    if (e.method == "gmres" && e.mode != ExperimentMode::lsrtm)
      throw ConfigError("optimizer.method = \"gmres\" needs experiment.mode = \"lsrtm\"");
    if (e.method == "aa" || e.method == "lbfgs" || e.method == "gmres") {
      if (!c.has("optimizer.memory")) throw ConfigError("optimizer.memory is required for " + e.method);
      e.memory = c.integer("optimizer.memory");
      if (e.memory < (e.method == "aa" ? 0 : 1)) throw ConfigError("optimizer.memory out of range");
    }
    e.eta = c.number("optimizer.eta", 0.0);
    e.beta = c.number("optimizer.beta", 1.0);
    e.line_search = c.boolean("optimizer.line_search", true);
    if (!c.has("optimizer.budget") && !c.has("optimizer.max_iterations"))
      throw ConfigError("optimizer: give budget (gradient-equivalents) or max_iterations");
    e.budget = c.number("optimizer.budget", e.budget);
    e.max_iterations = c.integer("optimizer.max_iterations", e.max_iterations);
    e.gtol = c.number("optimizer.gtol", 0.0);
    e.snapshot_every = c.integer("optimizer.snapshot_every", e.snapshot_every);
    e.zero_start = c.boolean("optimizer.zero_start", false);
    e.tol = c.number("optimizer.tol", 0.0);
    if (!(e.budget > 0.0)) throw ConfigError("optimizer.budget must be > 0");
    if (e.max_iterations < 0) throw ConfigError("optimizer.max_iterations must be >= 0");
    if (!(e.eta >= 0.0) || !(e.gtol >= 0.0) || !(e.tol >= 0.0) || e.snapshot_every < 0)
      throw ConfigError("optimizer: eta, gtol, tol and snapshot_every must be >= 0");

    e.noise_enabled = c.boolean("noise.enabled", false);
    e.snr_db = c.number("noise.snr_db", e.snr_db);
    const double seed = c.number("noise.seed", 0.0);
    if (!(seed >= 0.0) || seed != std::floor(seed) || seed > 9.007199254740992e15)
      throw ConfigError("noise.seed must be a non-negative integer");
    e.seed = static_cast<std::uint64_t>(seed);
    if (e.noise_enabled && std::isnan(e.snr_db)) throw ConfigError("noise.snr_db must be a number");
    return e;
  }

  static ExperimentConfig load(const fs::path& file, const fs::path& root = {}) {
    return from(Config::load(file), root);
  }

  fs::path true_model_path() const { return model_dir / "true_model.json"; }
  fs::path initial_model_path() const { return model_dir / "initial_model.json"; }
  fs::path reflectivity_path() const { return model_dir / "reflectivity.json"; }
  fs::path observed_dir() const { return noise_enabled ? noisy_data_dir : data_dir; }
  fs::path run_dir() const { return output_dir / method; }

  Survey survey(const Grid2D& g) const {
    Survey s;
    s.wavelet = make_ricker(peak_freq, dt, nt, t0);
    s.geometry.sources = AcquisitionGeometry::line(g, n_sources, source_depth, source_margin);
    s.geometry.receivers = AcquisitionGeometry::line(g, n_receivers, receiver_depth, receiver_margin);
    s.geometry.dt = dt;
    s.geometry.nt = nt;
    s.config.border_width = border_width;
    s.config.absorbing_top = absorbing_top;
    s.threads = threads;
    try {
      s.geometry.validate(g);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
    return s;
  }
};

// ---------------------------------------------------------------- gen-model

struct GeneratedModels {
  VelocityModel truth, initial;
  std::optional<ReflectivityModel> reflectivity;
};

inline GeneratedModels cmd_gen_model(const ExperimentConfig& cfg) {
  GeneratedModels out;
  if (cfg.model_kind == "file") {
    out.truth = load_velocity_model(cfg.model_source);
  } else {
    try {
      out.truth = make_layered_model(cfg.grid, cfg.layer_tops, cfg.layer_velocities);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
  }
  out.initial = smooth_model(out.truth, cfg.smoothing_radius);
  save_velocity_model(out.truth, cfg.true_model_path());
  save_velocity_model(out.initial, cfg.initial_model_path());
  if (cfg.mode == ExperimentMode::lsrtm) {
    out.reflectivity = reflectivity_between(out.truth, out.initial);
    save_reflectivity(out.truth.grid(), out.reflectivity->values(), cfg.reflectivity_path());
  }
  return out;
}

// ---------------------------------------------------------------- synthesize

inline GatherSet cmd_synthesize(const ExperimentConfig& cfg) {
  GatherSet data;
  if (cfg.mode == ExperimentMode::fwi) {
    const auto truth = load_velocity_model(cfg.true_model_path());
    const auto survey = cfg.survey(truth.grid());
    check_stability(truth, survey.geometry, survey.config);
    data = model_data(truth, survey);
  } else {
    const auto background = load_velocity_model(cfg.initial_model_path());
    const auto refl = load_reflectivity(cfg.reflectivity_path());
    BornOperator op(background, cfg.survey(background.grid()));
    data = op.apply(refl.values());
  }
  for (const auto& g : data)
    for (double v : g.samples)
      if (!std::isfinite(v)) throw StabilityError("synthesize: non-finite data");
  save_gathers(data, cfg.data_dir);
  return data;
}

// ---------------------------------------------------------------- add-noise

/// Mean square over every sample of every shot.
inline double data_power(const GatherSet& d) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : d) {
    for (double v : g.samples) sum += v * v;
    n += g.samples.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// 10 log10(P(clean) / P(noisy - clean)).
inline double measured_snr_db(const GatherSet& clean, const GatherSet& noisy) {
  require_same_shape(clean, noisy, "measured_snr_db");
  GatherSet diff = noisy;
  for (std::size_t s = 0; s < diff.size(); ++s)
    for (std::size_t k = 0; k < diff[s].samples.size(); ++k) diff[s].samples[k] -= clean[s].samples[k];
  return 10.0 * std::log10(data_power(clean) / data_power(diff));
}

/// Zero-mean uniform noise scaled so the dataset SNR is exactly `snr_db`. +inf returns the data unchanged.
inline GatherSet add_uniform_noise(const GatherSet& clean, double snr_db, std::uint64_t seed) {
  for (const auto& g : clean)
    for (double v : g.samples)
      if (!std::isfinite(v)) throw StabilityError("add_noise: non-finite data");
  if (std::isnan(snr_db)) throw std::invalid_argument("add_noise: SNR is NaN");
  GatherSet out = clean;
  const double ps = data_power(clean);
  if (snr_db == std::numeric_limits<double>::infinity() || ps == 0.0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GatherSet noise = clean;
  double mean = 0.0;
  std::size_t n = 0;
  for (auto& g : noise)
    for (double& v : g.samples) {
      v = u(rng);
      mean += v;
      ++n;
    }
  mean /= static_cast<double>(n);
  for (auto& g : noise)
    for (double& v : g.samples) v -= mean;
  const double scale = std::sqrt(ps / (data_power(noise) * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t s = 0; s < out.size(); ++s)
    for (std::size_t k = 0; k < out[s].samples.size(); ++k) out[s].samples[k] += scale * noise[s].samples[k];
  return out;
}

struct NoiseOutcome {
  GatherSet noisy;
  double target_snr_db = 0.0;
  double achieved_snr_db = 0.0;  // from the written (float32) files
};

/// Reads clean data, writes noisy data plus noise.json. With noise disabled the copy is exact.
inline NoiseOutcome cmd_add_noise(const ExperimentConfig& cfg) {
  const auto clean = load_gathers(cfg.data_dir, cfg.n_sources);
  const double snr = cfg.noise_enabled ? cfg.snr_db : std::numeric_limits<double>::infinity();
  NoiseOutcome out;
  out.target_snr_db = snr;
  out.noisy = add_uniform_noise(clean, snr, cfg.seed);
  save_gathers(out.noisy, cfg.noisy_data_dir);
  out.noisy = load_gathers(cfg.noisy_data_dir, cfg.n_sources);
  out.achieved_snr_db = measured_snr_db(clean, out.noisy);
  nlohmann::ordered_json j;
  j["enabled"] = cfg.noise_enabled;
  j["seed"] = cfg.seed;
  j["target_snr_db"] = std::isfinite(snr) ? nlohmann::ordered_json(snr) : nlohmann::ordered_json("inf");
  j["achieved_snr_db"] = std::isfinite(out.achieved_snr_db) ? nlohmann::ordered_json(out.achieved_snr_db)
                                                             : nlohmann::ordered_json("inf");
  j["signal_power"] = data_power(clean);
  io::write_atomic(cfg.noisy_data_dir / "noise.json", j.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- invert

struct InvertOutcome {
  std::string method;
  Grid2D grid;
  Field model;                 // squared slowness (fwi) or reflectivity (lsrtm)
  OptimizerReport report;      // empty for gmres
  std::optional<GmresResult> gmres;
  std::string reason;
  EvalCounter counter;
  double cost = 0.0;           // gradient-equivalents spent
  double objective = 0.0;      // J at the final model; NaN for gmres
  long aa_weight_solves = 0;   // checks of |sum alpha_i f_i| <= |f_k|
  double aa_worst_ratio = 0.0;
};

namespace detail {

inline void write_model_snapshot(const ExperimentConfig& cfg, const Grid2D& grid, const Vec& p, const fs::path& path,
                                 nlohmann::ordered_json extra) {
  if (cfg.mode == ExperimentMode::fwi) {
    Field c(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) c[static_cast<std::size_t>(i)] = p(i) > 0.0 ? 1.0 / std::sqrt(p(i)) : 0.0;
    write_pgm(path, grid, c, "velocity_mps", std::move(extra));
  } else {
    write_pgm(path, grid, as_span(p), "reflectivity", std::move(extra));
  }
}

inline std::string snapshot_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%05d.pgm", k);
  return buf;
}

}  // namespace detail

inline InvertOutcome cmd_invert(const ExperimentConfig& cfg) {
  const auto initial = load_velocity_model(cfg.initial_model_path());
  const Grid2D grid = initial.grid();
  const auto survey = cfg.survey(grid);
  const auto observed = load_gathers(cfg.observed_dir(), cfg.n_sources);
  for (const auto& g : observed)
    if (g.nt != cfg.nt || g.n_receivers != cfg.n_receivers)
      throw ConfigError("observed data do not match physics.nt / geometry.n_receivers");
  const fs::path dir = cfg.run_dir();
  fs::create_directories(dir / "snapshots");

  InvertOutcome out;
  out.method = cfg.method;
  out.grid = grid;
  std::optional<BornOperator> op;
  Problem problem;
  Vec p0;
  if (cfg.mode == ExperimentMode::fwi) {
    check_stability(initial, survey.geometry, survey.config);
    problem = fwi_problem(grid, observed, survey);
    p0 = to_vec(initial.m());
  } else {
    op.emplace(initial, survey);
    problem = lsrtm_problem(*op, observed);
    p0 = Vec::Zero(static_cast<Eigen::Index>(grid.size()));
  }

  const IterationObserver observe = [&](int k, const Vec& p) {
    if (cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0)
      detail::write_model_snapshot(cfg, grid, p, dir / "snapshots" / detail::snapshot_name(k), {{"iteration", k}});
  };
  StopCriteria stop;
  stop.budget = cfg.budget;
  stop.max_iterations = cfg.max_iterations;
  stop.gtol = cfg.gtol;

  Vec final_p = p0;
  if (cfg.method == "gmres") {
    LsrtmGmresOptions go;
    go.restart = cfg.memory;
    go.zero_start = cfg.zero_start;
    go.tol = cfg.tol;
    // image (1) and, unless starting from zero, the scaled start (1) come out of the budget
    const double upfront = cfg.zero_start ? 1.0 : 2.0;
    const double room = std::isfinite(cfg.budget) ? std::floor(cfg.budget - upfront) : 1e9;
    go.iterations = static_cast<int>(std::min<double>(cfg.max_iterations, room));
    GmresResult solve;
    if (go.iterations >= 1) {
      auto r = lsrtm_gmres(*op, observed, go);
      solve = std::move(r.solve);
      final_p = solve.x;
      out.reason = solve.converged ? "converged" : "max_iterations";
    } else {
      out.reason = "budget";
    }
    out.cost = solve.history.empty() ? 0.0 : solve.history.back().grad_equivalents;
    out.counter.grad_evals = static_cast<long>(out.cost);
    out.objective = std::numeric_limits<double>::quiet_NaN();
    solve.write_csv(dir / "report.csv");
    out.gmres = std::move(solve);
  } else {
    OptimizerResult r;
    if (cfg.method == "sd") {
      SteepestOptions o;
      o.eta = cfg.eta;
      o.line_search = cfg.line_search;
      r = steepest_descent(problem, p0, o, stop, observe);
    } else if (cfg.method == "aa") {
      AndersonOptions o;
      o.memory = cfg.memory;
      o.eta = cfg.eta;
      o.beta = cfg.beta;
      o.line_search = cfg.line_search;
      o.on_weights = [&out](const WeightSolution& s, const Vec& f) {
        ++out.aa_weight_solves;
        const double fn = f.norm();
        if (fn > 0.0) out.aa_worst_ratio = std::max(out.aa_worst_ratio, s.residual_norm / fn);
      };
      r = anderson_gd(problem, p0, o, stop, observe);
    } else if (cfg.method == "lbfgs") {
      LbfgsOptions o;
      o.memory = cfg.memory;
      o.eta = cfg.eta;
      r = lbfgs(problem, p0, o, stop, observe);
    } else {
      NcgOptions o;
      o.eta = cfg.eta;
      r = ncg(problem, p0, o, stop, observe);
    }
    final_p = r.p;
    out.report = r.report;
    out.reason = to_string(r.reason);
    out.counter = r.counter;
    out.cost = r.counter.equivalents();
    out.objective = r.report.records.empty() ? std::numeric_limits<double>::quiet_NaN() : r.objective;
    r.report.write_csv(dir / "report.csv");
  }
  out.model = to_field(final_p);

  if (cfg.mode == ExperimentMode::fwi)
    save_velocity_model(VelocityModel(grid, out.model), dir / "final_model.json");
  else
    save_reflectivity(grid, out.model, dir / "final_model.json");
  detail::write_model_snapshot(cfg, grid, final_p, dir / "snapshots" / "final.pgm", {{"iteration", "final"}});

  nlohmann::ordered_json s;
  s["method"] = out.method;
  s["mode"] = cfg.mode == ExperimentMode::fwi ? "fwi" : "lsrtm";
  s["stop_reason"] = out.reason;
  s["grad_evals"] = out.counter.grad_evals;
  s["obj_evals"] = out.counter.obj_evals;
  s["gradient_equivalents"] = out.cost;
  s["budget"] = std::isfinite(cfg.budget) ? nlohmann::ordered_json(cfg.budget) : nlohmann::ordered_json("inf");
  s["final_objective"] = std::isfinite(out.objective) ? nlohmann::ordered_json(out.objective) : nlohmann::ordered_json(nullptr);
  if (out.gmres) s["final_residual_norm"] = out.gmres->history.empty() ? 0.0 : out.gmres->history.back().residual_norm;
  io::write_atomic(dir / "summary.json", s.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- rtm

struct RtmOutcome {
  Grid2D grid;
  Field image, filtered;
};

inline RtmOutcome cmd_rtm(const ExperimentConfig& cfg) {
  const auto background = load_velocity_model(cfg.initial_model_path());
  const auto observed = load_gathers(cfg.observed_dir(), cfg.n_sources);
  BornOperator op(background, cfg.survey(background.grid()));
  RtmOutcome out;
  out.grid = background.grid();
  out.image = apply_born_adjoint(op, observed);
  out.filtered = laplacian_filter(out.grid, out.image);
  const fs::path dir = cfg.output_dir / "rtm";
  save_reflectivity(out.grid, out.image, dir / "rtm_image.json");
  save_reflectivity(out.grid, out.filtered, dir / "rtm_filtered.json");
  write_pgm(dir / "rtm_image.pgm", out.grid, out.image, "reflectivity");
  write_pgm(dir / "rtm_filtered.pgm", out.grid, out.filtered, "reflectivity");
  return out;
}

}  // namespace aafwi
