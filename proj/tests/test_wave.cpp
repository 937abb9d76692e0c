#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "aafwi/wave.hpp"
#include "support.hpp"

using namespace aafwi;
using aafwi::testing::dot;
using aafwi::testing::norm;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

VelocityModel homogeneous(const Grid2D& g, double c) {
  return VelocityModel::from_velocity(g, std::vector<double>(g.size(), c));
}

}  // namespace

TEST(Cfl, MatchesClosedForm) {
  const Grid2D g(10, 10, 20.0, 20.0);
  EXPECT_NEAR(cfl_check(homogeneous(g, 2000.0)), 20.0 / (2000.0 * std::numbers::sqrt2), 1e-15);
  EXPECT_NEAR(cfl_check(homogeneous(g, 2000.0)), 7.0710678e-3, 1e-9);
}

TEST(Cfl, LinearInSpacingAndGovernedByMaxVelocity) {
  const Grid2D g(10, 10, 20.0, 20.0), half(10, 10, 10.0, 10.0);
  EXPECT_DOUBLE_EQ(cfl_check(homogeneous(half, 2000.0)), 0.5 * cfl_check(homogeneous(g, 2000.0)));
  auto c = std::vector<double>(g.size(), 1500.0);
  c[37] = 3000.0;
  EXPECT_DOUBLE_EQ(cfl_check(VelocityModel::from_velocity(g, c)), cfl_check(homogeneous(g, 3000.0)));
  SimConfig cfg;
  cfg.cfl_safety = 0.5;
  EXPECT_DOUBLE_EQ(cfl_check(homogeneous(g, 2000.0), cfg), 0.5 * cfl_check(homogeneous(g, 2000.0)));
}

TEST(ForwardSolve, ZeroWaveletGivesZeroField) {
  const Grid2D g(30, 30, 10.0, 10.0);
  auto survey = aafwi::testing::test_survey(g, 1, 5, 100, 1e-3);
  std::fill(survey.wavelet.samples.begin(), survey.wavelet.samples.end(), 0.0);
  double field_max = 0.0;
  auto res = forward_solve(homogeneous(g, 2000.0), survey.wavelet, survey.geometry, 0, survey.config, false,
                           [&](int, std::span<const double> u) {
                             for (double x : u) field_max = std::max(field_max, std::abs(x));
                           });
  EXPECT_EQ(max_abs(res.gather.samples), 0.0);
  EXPECT_EQ(field_max, 0.0);
}

TEST(ForwardSolve, RejectsUnstableStepAndOutsidePositions) {
  const Grid2D g(30, 30, 10.0, 10.0);
  auto survey = aafwi::testing::test_survey(g, 1, 5, 50, 1e-2);
  EXPECT_THROW(forward_solve(homogeneous(g, 2000.0), survey.wavelet, survey.geometry, 0), StabilityError);
  survey = aafwi::testing::test_survey(g, 1, 5, 50, 1e-3);
  survey.geometry.sources[0].x = -5.0;
  EXPECT_THROW(forward_solve(homogeneous(g, 2000.0), survey.wavelet, survey.geometry, 0), std::invalid_argument);
  survey = aafwi::testing::test_survey(g, 1, 5, 50, 1e-3);
  survey.geometry.receivers.push_back({100.0, 400.0});
  EXPECT_THROW(forward_solve(homogeneous(g, 2000.0), survey.wavelet, survey.geometry, 0), std::invalid_argument);
}

TEST(ForwardSolve, FirstArrivalMatchesTravelTime) {
  const Grid2D g(100, 100, 10.0, 10.0);
  const double c = 2000.0, dt = 1e-3, f = 15.0;
  const int nt = 500;
  AcquisitionGeometry geo;
  geo.sources = {{205.0, 505.0}};
  geo.receivers = {{505.0, 505.0}, {705.0, 505.0}, {505.0, 805.0}};
  geo.dt = dt;
  geo.nt = nt;
  const auto w = make_ricker(f, dt, nt, 0.1);
  SimConfig cfg;
  cfg.border_width = 30;
  cfg.absorbing_top = true;
  const auto res = forward_solve(homogeneous(g, c), w, geo, 0, cfg, false);

  // Onset: first sample above 1e-3 of the trace peak, against the wavelet's own onset.
  auto onset = [](auto&& value, int n) {
    double peak = 0.0;
    for (int i = 0; i < n; ++i) peak = std::max(peak, std::abs(value(i)));
    for (int i = 0; i < n; ++i)
      if (std::abs(value(i)) > 1e-3 * peak) return i;
    return n;
  };
  const int w_onset = onset([&](int i) { return w.samples[static_cast<std::size_t>(i)]; }, nt);
  for (int r = 0; r < 3; ++r) {
    const double d = std::hypot(geo.receivers[static_cast<std::size_t>(r)].x - 205.0,
                                geo.receivers[static_cast<std::size_t>(r)].z - 505.0);
    const int arrival = onset([&](int i) { return res.gather.at(i, r); }, nt);
    const double measured = (arrival - w_onset) * dt;
    EXPECT_NEAR(measured, d / c, 2.0 * g.dx / c) << "receiver " << r;
  }
}

TEST(ForwardSolve, SecondOrderSelfConvergence) {
  // 600 m box, rigid walls, dt proportional to h so space and time errors shrink together.
  const double L = 600.0, c = 2000.0, f = 10.0, T = 0.24;
  auto run = [&](double h) {
    const int n = static_cast<int>(std::lround(L / h));
    const Grid2D g(n, n, h, h);
    const double dt = 0.4 * h / c;
    const int nt = static_cast<int>(std::lround(T / dt)) + 1;
    AcquisitionGeometry geo;
    geo.sources = {{250.0, 300.0}};
    geo.receivers = {{430.0, 340.0}};
    geo.dt = dt;
    geo.nt = nt;
    SimConfig cfg;
    cfg.border_width = 0;
    const auto res = forward_solve(homogeneous(g, c), make_ricker(f, dt, nt, 0.1), geo, 0, cfg, false);
    std::vector<double> trace(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) trace[static_cast<std::size_t>(i)] = res.gather.at(i, 0);
    return trace;
  };
  const auto t20 = run(20.0), t10 = run(10.0), ref = run(2.5);
  // L2 in time, so the sample count of the coarse trace does not enter.
  auto error = [&](const std::vector<double>& coarse, int stride) {
    const double dt = T / static_cast<double>(coarse.size() - 1);
    double e = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      const double d = coarse[i] - ref[i * static_cast<std::size_t>(stride)];
      e += d * d;
    }
    return std::sqrt(dt * e);
  };
  const double e20 = error(t20, 8), e10 = error(t10, 4);
  const double order = std::log2(e20 / e10);
  EXPECT_GE(order, 1.8) << "e20=" << e20 << " e10=" << e10;
}

TEST(ForwardSolve, EnergyNonIncreasingAfterSourceStops) {
  const Grid2D g(40, 40, 10.0, 10.0);
  const double dt = 2e-3;
  const int nt = 600;
  AcquisitionGeometry geo;
  geo.sources = {{200.0, 200.0}};
  geo.receivers = {{100.0, 100.0}};
  geo.dt = dt;
  geo.nt = nt;
  auto w = make_ricker(20.0, dt, nt, 0.06);
  const int off = 60;
  for (int i = off; i < nt; ++i) w.samples[static_cast<std::size_t>(i)] = 0.0;
  SimConfig cfg;
  cfg.border_width = 20;
  cfg.absorbing_top = true;
  const auto model = aafwi::testing::test_model(g);
  const Propagator P(model, cfg, dt);
  std::vector<double> prev_field, energies;
  bool finite = true;
  forward_solve(model, w, geo, 0, cfg, false, [&](int n, std::span<const double> u) {
    for (double x : u) finite = finite && std::isfinite(x);
    if (!prev_field.empty() && n > off) energies.push_back(P.energy(prev_field.data(), u.data()));
    prev_field.assign(u.begin(), u.end());
  });
  ASSERT_TRUE(finite);
  ASSERT_GT(energies.front(), 0.0);
  for (std::size_t i = 1; i < energies.size(); ++i)
    ASSERT_LE(energies[i], energies[i - 1] * (1.0 + 1e-8) + 1e-300) << "step " << i;
  EXPECT_LT(energies.back(), 0.05 * energies.front());  // the sponge actually absorbs
}

TEST(BornSolve, ZeroAndLinear) {
  const Grid2D g(30, 40, 10.0, 10.0);
  const auto survey = aafwi::testing::test_survey(g, 1, 8, 200, 1e-3);
  const auto bg = aafwi::testing::test_model(g);
  const auto zero = born_solve(bg, ReflectivityModel::zeros(g), survey.wavelet, survey.geometry, 0, survey.config);
  EXPECT_EQ(max_abs(zero.samples), 0.0);

  const auto mr = aafwi::testing::random_field(g.size(), 7, 1e-8);
  std::vector<double> scaled(mr);
  for (auto& x : scaled) x *= -3.5;
  const auto d1 = born_solve(bg, {g, mr}, survey.wavelet, survey.geometry, 0, survey.config);
  const auto d2 = born_solve(bg, {g, scaled}, survey.wavelet, survey.geometry, 0, survey.config);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < d1.samples.size(); ++i) {
    err += std::pow(d2.samples[i] + 3.5 * d1.samples[i], 2);
    ref += std::pow(3.5 * d1.samples[i], 2);
  }
  EXPECT_LE(std::sqrt(err / ref), 1e-10);
}

TEST(BornSolve, LinearizesForwardModelling) {
  const Grid2D g(30, 40, 10.0, 10.0);
  auto survey = aafwi::testing::test_survey(g, 1, 8, 300, 1e-3);
  const auto bg = aafwi::testing::test_model(g);
  auto dm = aafwi::testing::random_field(g.size(), 11, 1.0);
  dm = gaussian_blur(g, dm, 2.0);
  const double scale = 0.05 * bg[0] / aafwi::testing::norm(dm) * std::sqrt(static_cast<double>(g.size()));
  for (auto& x : dm) x *= scale;

  const auto base = forward_solve(bg, survey.wavelet, survey.geometry, 0, survey.config, false).gather;
  const auto born = born_solve(bg, {g, dm}, survey.wavelet, survey.geometry, 0, survey.config);
  auto remainder = [&](double eps) {
    std::vector<double> m = bg.m();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += eps * dm[i];
    const auto pert = forward_solve({g, m}, survey.wavelet, survey.geometry, 0, survey.config, false).gather;
    double e = 0.0;
    for (std::size_t i = 0; i < pert.samples.size(); ++i)
      e += std::pow(pert.samples[i] - base.samples[i] - eps * born.samples[i], 2);
    return std::sqrt(e);
  };
  const double r1 = remainder(0.2), r2 = remainder(0.1);
  EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(AdjointSolve, ZeroSourceGivesZeroField) {
  const Grid2D g(20, 20, 10.0, 10.0);
  const auto survey = aafwi::testing::test_survey(g, 1, 4, 80, 1e-3);
  const ShotGather zero(0, 80, 4, 1e-3);
  const auto adj = adjoint_solve(aafwi::testing::test_model(g), zero, survey.geometry, survey.config);
  EXPECT_EQ(max_abs(adj.values), 0.0);
}

TEST(AdjointSolve, IsForwardSolveOfTimeReversedSource) {
  // v^n dt is the forward field at level nt-1-n driven by the reversed, quadrature-weighted
  // residual injected through the receiver taps (forward sources are scaled by 1/(dx dz)).
  const Grid2D g(50, 50, 10.0, 10.0);
  const int nt = 240;
  const double dt = 1.5e-3;
  auto survey = aafwi::testing::test_survey(g, 1, 1, nt, dt);
  survey.geometry.receivers = {{252.0, 137.0}};
  survey.config.absorbing_top = true;
  const auto model = aafwi::testing::test_model(g);
  ShotGather residual(0, nt, 1, dt);
  const auto noise = aafwi::testing::random_field(static_cast<std::size_t>(nt), 3);
  for (int i = 0; i < nt; ++i) residual.at(i, 0) = make_ricker(25.0, dt, nt, 0.15).samples[static_cast<std::size_t>(i)] + 0.1 * noise[static_cast<std::size_t>(i)];
  const auto adj = adjoint_solve(model, residual, survey.geometry, survey.config);

  SourceWavelet reversed{std::vector<double>(static_cast<std::size_t>(nt)), 0.0, 0.0};
  for (int j = 0; j < nt; ++j) {
    const int n = nt - 1 - j;
    reversed.samples[static_cast<std::size_t>(j)] = time_weight(n, nt, dt) * residual.at(n, 0) * g.dx * g.dz;
  }
  AcquisitionGeometry fgeo = survey.geometry;
  fgeo.sources = fgeo.receivers;
  std::vector<std::vector<double>> fields(static_cast<std::size_t>(nt));
  forward_solve(model, reversed, fgeo, 0, survey.config, false,
                [&](int n, std::span<const double> u) { fields[static_cast<std::size_t>(n)].assign(u.begin(), u.end()); });
  double err = 0.0, ref = 0.0;
  for (int n = 0; n + 1 < nt; ++n) {
    const auto v = adj.at(n);
    const auto& u = fields[static_cast<std::size_t>(nt - 1 - n)];
    for (std::size_t i = 0; i < v.size(); ++i) {
      err += std::pow(v[i] * dt - u[i], 2);
      ref += u[i] * u[i];
    }
  }
  ASSERT_GT(ref, 0.0);
  EXPECT_LE(std::sqrt(err / ref), 1e-12);
}

TEST(ForwardHistory, CheckpointModeReproducesFullHistory) {
  const Grid2D g(20, 25, 10.0, 10.0);
  const auto survey = aafwi::testing::test_survey(g, 1, 4, 157, 1e-3);
  const auto model = aafwi::testing::test_model(g);
  auto full = forward_solve(model, survey.wavelet, survey.geometry, 0, survey.config, true);
  SimConfig cp = survey.config;
  cp.history = HistoryMode::checkpoint;
  auto ckpt = forward_solve(model, survey.wavelet, survey.geometry, 0, cp, true);
  EXPECT_EQ(full.gather.samples, ckpt.gather.samples);
  for (int n = full.history.steps() - 1; n >= 0; n -= 3) {
    const auto a = full.history.d2(n);
    const auto b = ckpt.history.d2(n);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << "step " << n;
  }
}

TEST(BornAdjoint, DotTestSmallGrid) {
  const Grid2D g(24, 30, 10.0, 10.0);
  auto survey = aafwi::testing::test_survey(g, 2, 6, 220, 1e-3);
  BornOperator L(aafwi::testing::test_model(g), survey);
  const auto x = aafwi::testing::random_field(g.size(), 21, 1e-8);
  auto y = L.zero_data();
  std::uint64_t seed = 99;
  for (auto& shot : y) shot.samples = aafwi::testing::random_field(shot.samples.size(), seed++);
  const auto Lx = L.apply(x);
  const auto Lty = L.adjoint(y);
  const double lhs = data_dot(Lx, y);
  const double rhs = dot(x, Lty);
  const double scale = std::sqrt(data_dot(Lx, Lx)) * std::sqrt(data_dot(y, y));
  EXPECT_LE(std::abs(lhs - rhs) / scale, 1e-10);
}
