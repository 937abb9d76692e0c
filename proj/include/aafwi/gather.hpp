#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aafwi/io.hpp"

namespace aafwi {

/// Receiver traces for one source, time-major: sample (it, ir) at it * n_receivers + ir.
struct ShotGather {
  int source_index = 0;
  int nt = 0;
  int n_receivers = 0;
  double dt = 0.0;
  std::vector<double> samples;

  ShotGather() = default;
  ShotGather(int source, int nt_, int nr, double dt_)
      : source_index(source), nt(nt_), n_receivers(nr), dt(dt_),
        samples(static_cast<std::size_t>(nt_) * static_cast<std::size_t>(nr), 0.0) {}

  double& at(int it, int ir) { return samples[static_cast<std::size_t>(it) * n_receivers + ir]; }
  double at(int it, int ir) const { return samples[static_cast<std::size_t>(it) * n_receivers + ir]; }
  std::span<double> row(int it) { return {samples.data() + static_cast<std::size_t>(it) * n_receivers, static_cast<std::size_t>(n_receivers)}; }
  std::span<const double> row(int it) const { return {samples.data() + static_cast<std::size_t>(it) * n_receivers, static_cast<std::size_t>(n_receivers)}; }

  bool same_shape(const ShotGather& o) const { return nt == o.nt && n_receivers == o.n_receivers; }
};

using GatherSet = std::vector<ShotGather>;

/// Trapezoid weight (times dt) of time sample `it` on an `nt`-sample axis.
inline double time_weight(int it, int nt, double dt) { return (it == 0 || it == nt - 1) ? 0.5 * dt : dt; }

inline void require_same_shape(const GatherSet& a, const GatherSet& b, const char* who) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(who) + ": shot counts differ");
  for (std::size_t s = 0; s < a.size(); ++s)
    if (!a[s].same_shape(b[s])) throw std::invalid_argument(std::string(who) + ": gather shapes differ");
}

/// Quadrature-weighted inner product sum_s sum_t w_t sum_r a b, the data-space inner product.
inline double data_dot(const GatherSet& a, const GatherSet& b) {
  require_same_shape(a, b, "data_dot");
  double total = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    double shot = 0.0;
    for (int it = 0; it < a[s].nt; ++it) {
      double acc = 0.0;
      const auto ra = a[s].row(it);
      const auto rb = b[s].row(it);
      for (std::size_t r = 0; r < ra.size(); ++r) acc += ra[r] * rb[r];
      shot += time_weight(it, a[s].nt, a[s].dt) * acc;
    }
    total += shot;
  }
  return total;
}

inline void save_gather(const ShotGather& g, const std::filesystem::path& header_path) {
  const auto bin = io::data_path(header_path);
  nlohmann::ordered_json h;
  h["magic"] = io::kGatherMagic;
  h["nt"] = g.nt;
  h["dt"] = g.dt;
  h["n_receivers"] = g.n_receivers;
  h["source_index"] = g.source_index;
  h["data_file"] = bin.filename().string();
  io::write_atomic(bin, io::encode_f32le(std::vector<float>(g.samples.begin(), g.samples.end())));
  io::write_atomic(header_path, h.dump(2) + "\n");
}

inline ShotGather load_gather(const std::filesystem::path& header_path) {
  const auto h = io::parse_header(header_path, io::kGatherMagic);
  const int nt = io::header_field<int>(h, "nt", header_path);
  const int nr = io::header_field<int>(h, "n_receivers", header_path);
  if (nt < 1 || nr < 1) throw FormatError(FormatError::Kind::header_mismatch, header_path.string() + ": bad dimensions");
  ShotGather g(io::header_field<int>(h, "source_index", header_path), nt, nr, io::header_field<double>(h, "dt", header_path));
  const auto bin = header_path.parent_path() / io::header_field<std::string>(h, "data_file", header_path);
  const auto v = io::decode_f32le(io::read_all(bin), g.samples.size(), bin.string());
  g.samples.assign(v.begin(), v.end());
  return g;
}

/// Shot files are named shot_<index>.json inside a data directory.
inline std::filesystem::path gather_path(const std::filesystem::path& dir, int source_index) {
  return dir / ("shot_" + std::to_string(source_index) + ".json");
}

inline void save_gathers(const GatherSet& set, const std::filesystem::path& dir) {
  for (const auto& g : set) save_gather(g, gather_path(dir, g.source_index));
}

inline GatherSet load_gathers(const std::filesystem::path& dir, int n_sources) {
  GatherSet set;
  for (int s = 0; s < n_sources; ++s) set.push_back(load_gather(gather_path(dir, s)));
  return set;
}

}  // namespace aafwi
