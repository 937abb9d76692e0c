#pragma once

// 8-bit PGM snapshots with linear min-max scaling; the scaling goes into a JSON sidecar.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "aafwi/grid.hpp"
#include "aafwi/io.hpp"

namespace aafwi {

struct PgmScale {
  double min = 0.0;
  double max = 0.0;
};

/// Rows are depth, columns are x. A constant image maps to 0.
inline std::string encode_pgm(const Grid2D& grid, std::span<const double> values, PgmScale* scale = nullptr) {
  if (values.size() != grid.size()) throw std::invalid_argument("encode_pgm: size does not match grid");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double a = *lo, b = *hi;
  if (scale) *scale = {a, b};
  std::string out = "P5\n" + std::to_string(grid.nx) + " " + std::to_string(grid.nz) + "\n255\n";
  const auto header = out.size();
  out.resize(header + grid.size());
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double v = values[grid.index(ix, iz)];
      const double t = b > a ? (v - a) / (b - a) : 0.0;
      out[header + static_cast<std::size_t>(iz) * grid.nx + ix] =
          static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0))));
    }
  return out;
}

/// Writes `path` and `path`.json holding the scaling.
inline void write_pgm(const std::filesystem::path& path, const Grid2D& grid, std::span<const double> values,
                      const std::string& quantity, nlohmann::ordered_json extra = {}) {
  PgmScale s;
  const auto bytes = encode_pgm(grid, values, &s);
  nlohmann::ordered_json side;
  side["image"] = path.filename().string();
  side["quantity"] = quantity;
  side["min"] = s.min;
  side["max"] = s.max;
  side["scaling"] = "linear: pixel = round(255 (v - min) / (max - min))";
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) side[it.key()] = it.value();
  io::write_atomic(path, bytes);
  auto sidecar = path;
  sidecar += ".json";
  io::write_atomic(sidecar, side.dump(2) + "\n");
}

}  // namespace aafwi
