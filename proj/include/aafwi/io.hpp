#pragma once

// On-disk formats.
//
//   grid file:   <stem>.json header {magic, nx, nz, dx, dz, quantity, data_file}
//                + <stem>.bin holding nx*nz float32 little-endian, index ix*nz + iz.
//   shot gather: <stem>.json header {magic, nt, dt, n_receivers, source_index, data_file}
//                + <stem>.bin holding nt*n_receivers float32 little-endian, index it*nr + ir.
//
// Every write goes to a temporary file that is renamed into place.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aafwi/errors.hpp"
#include "aafwi/grid.hpp"

namespace aafwi {

enum class Quantity { velocity_mps, slowness_sq, reflectivity };

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::velocity_mps: return "velocity_mps";
    case Quantity::slowness_sq: return "slowness_sq";
    case Quantity::reflectivity: return "reflectivity";
  }
  return "";
}

inline Quantity quantity_from_string(const std::string& s) {
  if (s == "velocity_mps") return Quantity::velocity_mps;
  if (s == "slowness_sq") return Quantity::slowness_sq;
  if (s == "reflectivity") return Quantity::reflectivity;
  throw FormatError(FormatError::Kind::header_mismatch, "unknown quantity '" + s + "'");
}

/// Raw contents of a grid file; round trips bit-exactly.
struct GridFile {
  Grid2D grid;
  Quantity quantity = Quantity::slowness_sq;
  std::vector<float> values;
};

namespace io {

inline constexpr const char* kGridMagic = "aafwi-grid-v1";
inline constexpr const char* kGatherMagic = "aafwi-gather-v1";

inline std::filesystem::path data_path(const std::filesystem::path& header) {
  auto p = header;
  p.replace_extension(".bin");
  return p;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError(FormatError::Kind::io, "rename failed: " + path.string() + ": " + ec.message());
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string encode_f32le(const std::vector<float>& v) {
  std::string out(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  return out;
}

inline std::vector<float> decode_f32le(const std::string& bytes, std::size_t expected, const std::string& what) {
  if (bytes.size() != expected * 4)
    throw FormatError(FormatError::Kind::size_mismatch,
                      what + ": expected " + std::to_string(expected * 4) + " bytes, found " +
                          std::to_string(bytes.size()));
  std::vector<float> v(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + static_cast<std::size_t>(b)])) << (8 * b);
    v[i] = std::bit_cast<float>(bits);
  }
  return v;
}

inline nlohmann::json parse_header(const std::filesystem::path& path, const char* magic) {
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(read_all(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::header_mismatch, path.string() + ": " + e.what());
  }
  if (!h.is_object() || !h.contains("magic") || h["magic"] != magic)
    throw FormatError(FormatError::Kind::header_mismatch, path.string() + ": bad magic");
  return h;
}

template <class T>
T header_field(const nlohmann::json& h, const char* key, const std::filesystem::path& path) {
  try {
    return h.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(FormatError::Kind::header_mismatch, path.string() + ": missing or invalid '" + key + "'");
  }
}

}  // namespace io

inline void save_grid(const GridFile& file, const std::filesystem::path& header_path) {
  if (file.values.size() != file.grid.size()) throw std::invalid_argument("save_grid: size does not match grid");
  const auto bin = io::data_path(header_path);
  nlohmann::ordered_json h;
  h["magic"] = io::kGridMagic;
  h["nx"] = file.grid.nx;
  h["nz"] = file.grid.nz;
  h["dx"] = file.grid.dx;
  h["dz"] = file.grid.dz;
  h["quantity"] = to_string(file.quantity);
  h["data_file"] = bin.filename().string();
  io::write_atomic(bin, io::encode_f32le(file.values));
  io::write_atomic(header_path, h.dump(2) + "\n");
}

inline GridFile load_grid(const std::filesystem::path& header_path) {
  const auto h = io::parse_header(header_path, io::kGridMagic);
  GridFile f;
  try {
    f.grid = Grid2D(io::header_field<int>(h, "nx", header_path), io::header_field<int>(h, "nz", header_path),
                    io::header_field<double>(h, "dx", header_path), io::header_field<double>(h, "dz", header_path));
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatError::Kind::header_mismatch, header_path.string() + ": " + e.what());
  }
  f.quantity = quantity_from_string(io::header_field<std::string>(h, "quantity", header_path));
  const auto bin = header_path.parent_path() / io::header_field<std::string>(h, "data_file", header_path);
  f.values = io::decode_f32le(io::read_all(bin), f.grid.size(), bin.string());
  return f;
}

/// Velocity models are written as m/s and converted back to squared slowness on load.
inline void save_velocity_model(const VelocityModel& model, const std::filesystem::path& path) {
  GridFile f{model.grid(), Quantity::velocity_mps, {}};
  f.values.reserve(model.m().size());
  for (double m : model.m()) f.values.push_back(static_cast<float>(1.0 / std::sqrt(m)));
  save_grid(f, path);
}

inline VelocityModel load_velocity_model(const std::filesystem::path& path) {
  const auto f = load_grid(path);
  std::vector<double> v(f.values.begin(), f.values.end());
  switch (f.quantity) {
    case Quantity::velocity_mps: return VelocityModel::from_velocity(f.grid, v);
    case Quantity::slowness_sq: return {f.grid, std::move(v)};
    case Quantity::reflectivity: break;
  }
  throw FormatError(FormatError::Kind::header_mismatch, path.string() + ": not a velocity model");
}

/// Model-shaped arrays (reflectivity, gradients, images).
inline void save_reflectivity(const Grid2D& grid, std::span<const double> values, const std::filesystem::path& path) {
  save_grid({grid, Quantity::reflectivity, std::vector<float>(values.begin(), values.end())}, path);
}

inline ReflectivityModel load_reflectivity(const std::filesystem::path& path) {
  const auto f = load_grid(path);
  if (f.quantity != Quantity::reflectivity)
    throw FormatError(FormatError::Kind::header_mismatch, path.string() + ": not a reflectivity grid");
  return {f.grid, Field(f.values.begin(), f.values.end())};
}

}  // namespace aafwi
