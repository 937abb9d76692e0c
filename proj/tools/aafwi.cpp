// aafwi: experiment driver. Verbs: gen-model, synthesize, add-noise, invert, rtm.
// Exit codes: 0 success, 1 I/O or other failure, 2 invalid config or arguments, 3 numerical failure.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "aafwi/experiments.hpp"

namespace {

int run(const std::string& verb, aafwi::ExperimentConfig& cfg) {
  using namespace aafwi;
  if (verb == "gen-model") {
    const auto m = cmd_gen_model(cfg);
    std::printf("gen-model: %dx%d grid, velocities %.1f..%.1f m/s -> %s\n", m.truth.grid().nx, m.truth.grid().nz,
                m.truth.min_velocity(), m.truth.max_velocity(), cfg.model_dir.string().c_str());
  } else if (verb == "synthesize") {
    const auto d = cmd_synthesize(cfg);
    std::printf("synthesize: %zu shots, power %.6e -> %s\n", d.size(), data_power(d), cfg.data_dir.string().c_str());
  } else if (verb == "add-noise") {
    const auto n = cmd_add_noise(cfg);
    std::printf("add-noise: target %.4f dB, achieved %.4f dB -> %s\n", n.target_snr_db, n.achieved_snr_db,
                cfg.noisy_data_dir.string().c_str());
  } else if (verb == "invert") {
    const auto r = cmd_invert(cfg);
    const bool normal_eq = r.gmres.has_value();
    const double last = normal_eq ? (r.gmres->history.empty() ? 0.0 : r.gmres->history.back().residual_norm) : r.objective;
    std::printf("invert[%s]: stop=%s, %.1f gradient-equivalents, final %s %.9e -> %s\n", r.method.c_str(),
                r.reason.c_str(), r.cost, normal_eq ? "normal-equation residual" : "objective", last,
                cfg.run_dir().string().c_str());
  } else {
    cmd_rtm(cfg);
    std::printf("rtm: -> %s\n", (cfg.output_dir / "rtm").string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anderson-accelerated FWI / LSRTM experiments"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  int threads = 1;
  long long seed = -1;
  app.add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "root for relative paths in the config (default: current directory)");
  app.add_option("--threads", threads, "shot-level worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "noise seed (overrides noise.seed)")->check(CLI::NonNegativeNumber);
  for (const char* verb : {"gen-model", "synthesize", "add-noise", "invert", "rtm"}) app.add_subcommand(verb)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    auto cfg = aafwi::ExperimentConfig::load(config_path, out_dir);
    cfg.threads = threads;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    return run(verb, cfg);
  } catch (const aafwi::ConfigError& e) {
    std::fprintf(stderr, "aafwi %s: invalid config: %s\n", verb.c_str(), e.what());
    return 2;
  } catch (const aafwi::StabilityError& e) {
    std::fprintf(stderr, "aafwi %s: numerical failure: %s\n", verb.c_str(), e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "aafwi %s: %s\n", verb.c_str(), e.what());
    return 1;
  }
}
