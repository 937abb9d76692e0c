#pragma once

// FWI and LSRTM objectives wrapped as optimizer problems over a flat parameter vector.

#include <limits>
#include <memory>
#include <span>
#include <stdexcept>

#include "aafwi/gradient.hpp"
#include "aafwi/optim.hpp"

namespace aafwi {

inline std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline Vec to_vec(std::span<const double> f) { return Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size())); }
inline Field to_field(const Vec& v) { return {v.data(), v.data() + v.size()}; }

/// p = squared slowness per cell. Inadmissible models (m <= 0, CFL violation) give J = +inf
/// and a zero gradient.
inline Problem fwi_problem(const Grid2D& grid, GatherSet observed, Survey survey) {
  auto obs = std::make_shared<const GatherSet>(std::move(observed));
  auto sv = std::make_shared<const Survey>(std::move(survey));
  Problem p;
  p.value = [grid, obs, sv](const Vec& m) { return fwi_objective(as_span(m), grid, *obs, *sv); };
  p.value_grad = [grid, obs, sv](const Vec& m, Vec& g) {
    const auto model = admissible_model(as_span(m), grid, *sv);
    if (!model) {
      g = Vec::Zero(m.size());
      return std::numeric_limits<double>::infinity();
    }
    const auto e = fwi_gradient(*model, *obs, *sv);
    g = to_vec(e.gradient);
    return e.value;
  };
  return p;
}

/// p = reflectivity; J = 1/2 |L p - d|^2. The operator must outlive the problem.
inline Problem lsrtm_problem(BornOperator& op, GatherSet observed) {
  auto obs = std::make_shared<const GatherSet>(std::move(observed));
  Problem p;
  p.value = [&op, obs](const Vec& r) { return lsrtm_value(op, as_span(r), *obs); };
  p.value_grad = [&op, obs](const Vec& r, Vec& g) {
    const auto e = lsrtm_objective(op, as_span(r), *obs);
    g = to_vec(e.gradient);
    return e.value;
  };
  return p;
}

}  // namespace aafwi
