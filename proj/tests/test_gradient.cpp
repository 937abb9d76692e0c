#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aafwi/gradient.hpp"
#include "support.hpp"

using namespace aafwi;
using aafwi::testing::dot;
using aafwi::testing::norm;
using aafwi::testing::random_field;

namespace {

GatherSet noise_gathers(int shots, int nt, int nr, double dt, std::uint64_t seed) {
  GatherSet out;
  for (int s = 0; s < shots; ++s) {
    out.emplace_back(s, nt, nr, dt);
    out.back().samples = random_field(out.back().samples.size(), seed + static_cast<std::uint64_t>(s));
  }
  return out;
}

/// Central differences over a sweep of step sizes; returns the smallest relative error.
template <class Objective>
double best_fd_error(Objective&& J, const std::vector<double>& m, const std::vector<double>& dir, double directional,
                     double scale) {
  double best = std::numeric_limits<double>::infinity();
  for (double e : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
    const double eps = e * scale;
    std::vector<double> plus(m), minus(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      plus[i] += eps * dir[i];
      minus[i] -= eps * dir[i];
    }
    const double fd = (J(plus) - J(minus)) / (2.0 * eps);
    best = std::min(best, std::abs(fd - directional) / std::abs(directional));
  }
  return best;
}

}  // namespace

TEST(Misfit, IdenticalDataIsZero) {
  const auto a = noise_gathers(2, 10, 3, 0.01, 1);
  EXPECT_EQ(misfit_l2(a, a), 0.0);
}

TEST(Misfit, SingleInteriorSampleGivesHalfDt) {
  GatherSet zero{ShotGather(0, 10, 3, 0.004)};
  GatherSet unit = zero;
  unit[0].at(4, 1) = 1.0;
  EXPECT_DOUBLE_EQ(misfit_l2(unit, zero), 0.5 * 0.004);
}

TEST(Misfit, MatchesNaiveSummationAndIsSymmetric) {
  const auto a = noise_gathers(3, 17, 5, 0.002, 10), b = noise_gathers(3, 17, 5, 0.002, 20);
  double naive = 0.0;
  for (int s = 0; s < 3; ++s)
    for (int t = 0; t < 17; ++t)
      for (int r = 0; r < 5; ++r) {
        const double w = (t == 0 || t == 16) ? 0.001 : 0.002;
        const double d = a[static_cast<std::size_t>(s)].at(t, r) - b[static_cast<std::size_t>(s)].at(t, r);
        naive += 0.5 * w * d * d;
      }
  EXPECT_NEAR(misfit_l2(a, b), naive, 1e-12 * naive);
  EXPECT_DOUBLE_EQ(misfit_l2(a, b), misfit_l2(b, a));
  EXPECT_GT(misfit_l2(a, b), 0.0);
}

TEST(Misfit, ShapeMismatchThrows) {
  const auto a = noise_gathers(2, 10, 3, 0.01, 1), b = noise_gathers(2, 10, 4, 0.01, 1), c = noise_gathers(1, 10, 3, 0.01, 1);
  EXPECT_THROW(misfit_l2(a, b), std::invalid_argument);
  EXPECT_THROW(misfit_l2(a, c), std::invalid_argument);
  EXPECT_THROW(adjoint_source(a, b), std::invalid_argument);
}

TEST(AdjointSource, ResidualCases) {
  const auto f = noise_gathers(2, 8, 3, 0.01, 3), g = noise_gathers(2, 8, 3, 0.01, 4);
  for (const auto& shot : adjoint_source(f, f))
    for (double x : shot.samples) EXPECT_EQ(x, 0.0);
  GatherSet zero = f;
  for (auto& shot : zero) std::fill(shot.samples.begin(), shot.samples.end(), 0.0);
  EXPECT_EQ(adjoint_source(f, zero)[1].samples, f[1].samples);
  GatherSet f2 = f;
  for (auto& shot : f2)
    for (auto& x : shot.samples) x *= 3.0;
  const auto r1 = adjoint_source(f, g), r2 = adjoint_source(f2, g);
  for (std::size_t k = 0; k < r1[0].samples.size(); ++k)
    EXPECT_NEAR(r2[0].samples[k] - r1[0].samples[k], 2.0 * f[0].samples[k], 1e-14);
}

class FwiGradient : public ::testing::Test {
 protected:
  FwiGradient() : grid_(60, 40, 10.0, 10.0), survey_(aafwi::testing::test_survey(grid_, 2, 12, 320, 1e-3, 20.0, 12)) {
    truth_ = aafwi::testing::test_model(grid_);
    initial_ = smooth_model(truth_, 3.0);
    observed_ = model_data(truth_, survey_);
  }

  Grid2D grid_;
  Survey survey_;
  VelocityModel truth_, initial_;
  GatherSet observed_;
};

TEST_F(FwiGradient, VanishesAtTheTrueModel) {
  const auto eval = fwi_gradient(truth_, observed_, survey_);
  EXPECT_EQ(eval.value, 0.0);
  for (double g : eval.gradient) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(eval.gradient_eval_count_delta, 1);
}

TEST_F(FwiGradient, MatchesCentralDifferences) {
  const auto eval = fwi_gradient(initial_, observed_, survey_);
  ASSERT_GT(eval.value, 0.0);
  EXPECT_DOUBLE_EQ(eval.value, fwi_objective(initial_.m(), grid_, observed_, survey_));
  const double scale = initial_[0];
  auto J = [&](const std::vector<double>& m) { return fwi_objective(m, grid_, observed_, survey_); };
  for (std::uint64_t k = 0; k < 3; ++k) {
    auto dir = gaussian_blur(grid_, random_field(grid_.size(), 100 + k), 2.0);
    const double directional = dot(eval.gradient, dir);
    EXPECT_LE(best_fd_error(J, initial_.m(), dir, directional, scale), 1e-4) << "direction " << k;
  }
}

TEST_F(FwiGradient, CheckpointingAndThreadsDoNotChangeTheGradient) {
  const auto ref = fwi_gradient(initial_, observed_, survey_);
  Survey other = survey_;
  other.config.history = HistoryMode::checkpoint;
  other.threads = 2;
  const auto alt = fwi_gradient(initial_, observed_, other);
  EXPECT_EQ(ref.value, alt.value);
  EXPECT_EQ(ref.gradient, alt.gradient);
}

TEST(FwiGradientFocus, PeaksNearPointPerturbation) {
  // Sources and receivers on all four sides so illumination is balanced.
  const Grid2D g(60, 60, 10.0, 10.0);
  Survey survey;
  survey.geometry.dt = 1e-3;
  survey.geometry.nt = 450;
  for (double s : {100.0, 300.0, 500.0}) {
    survey.geometry.sources.push_back({s, 25.0});
    survey.geometry.sources.push_back({s, 575.0});
    survey.geometry.sources.push_back({25.0, s});
    survey.geometry.sources.push_back({575.0, s});
  }
  for (double r = 25.0; r <= 575.0; r += 50.0) {
    survey.geometry.receivers.push_back({r, 15.0});
    survey.geometry.receivers.push_back({r, 585.0});
    survey.geometry.receivers.push_back({15.0, r});
    survey.geometry.receivers.push_back({585.0, r});
  }
  survey.wavelet = make_ricker(25.0, 1e-3, 450, 0.05);
  survey.config.border_width = 20;
  survey.config.absorbing_top = true;
  const VelocityModel background(g, std::vector<double>(g.size(), 1.0 / (2000.0 * 2000.0)));
  std::vector<double> m = background.m();
  const int px = 33, pz = 27;
  m[g.index(px, pz)] *= 1.1;
  const auto observed = model_data(VelocityModel(g, m), survey);
  const auto eval = fwi_gradient(background, observed, survey);
  std::size_t arg = 0;
  for (std::size_t i = 0; i < eval.gradient.size(); ++i)
    if (std::abs(eval.gradient[i]) > std::abs(eval.gradient[arg])) arg = i;
  const int ax = static_cast<int>(arg) / g.nz, az = static_cast<int>(arg) % g.nz;
  EXPECT_LE(std::hypot(ax - px, az - pz), 5.0) << "argmax at (" << ax << ", " << az << ")";
}

class BornPair : public ::testing::Test {
 protected:
  BornPair() : grid_(36, 24, 10.0, 10.0), survey_(aafwi::testing::test_survey(grid_, 2, 9, 260, 1e-3, 25.0, 10)),
               op_(smooth_model(aafwi::testing::test_model(grid_), 2.0), survey_) {}

  Grid2D grid_;
  Survey survey_;
  BornOperator op_;
};

TEST_F(BornPair, ZeroInZeroOut) {
  for (const auto& shot : apply_born(op_, std::vector<double>(grid_.size(), 0.0)))
    for (double x : shot.samples) EXPECT_EQ(x, 0.0);
  for (double x : apply_born_adjoint(op_, op_.zero_data())) EXPECT_EQ(x, 0.0);
}

TEST_F(BornPair, DotTest) {
  const auto x = random_field(grid_.size(), 31, 1e-8);
  const auto y = noise_gathers(2, 260, 9, 1e-3, 41);
  const auto Lx = apply_born(op_, x);
  const auto Lty = apply_born_adjoint(op_, y);
  const double scale = std::sqrt(data_dot(Lx, Lx) * data_dot(y, y));
  EXPECT_LE(std::abs(data_dot(Lx, y) - dot(x, Lty)) / scale, 1e-10);
}

TEST_F(BornPair, MatchesStandaloneBornSolve) {
  const auto x = random_field(grid_.size(), 32, 1e-8);
  const auto cached = apply_born(op_, x);
  for (int s = 0; s < 2; ++s) {
    const auto direct = born_solve(op_.background(), {grid_, x}, survey_.wavelet, survey_.geometry, s, survey_.config);
    for (std::size_t k = 0; k < direct.samples.size(); ++k)
      EXPECT_NEAR(direct.samples[k], cached[static_cast<std::size_t>(s)].samples[k], 1e-12 * (1.0 + std::abs(direct.samples[k])));
  }
}

TEST_F(BornPair, LsrtmGradientMatchesCentralDifferences) {
  const auto truth = random_field(grid_.size(), 50, 1e-8);
  const auto observed = apply_born(op_, truth);
  const auto m0 = random_field(grid_.size(), 51, 5e-9);
  const auto eval = lsrtm_objective(op_, m0, observed);
  EXPECT_EQ(eval.gradient_eval_count_delta, 1);
  auto J = [&](const std::vector<double>& m) { return lsrtm_value(op_, m, observed); };
  for (std::uint64_t k = 0; k < 3; ++k) {
    const auto dir = random_field(grid_.size(), 60 + k, 1.0);
    EXPECT_LE(best_fd_error(J, m0, dir, dot(eval.gradient, dir), 1e-8), 1e-4);
  }
}

TEST_F(BornPair, LsrtmAtExactSolutionAndAtZero) {
  const auto truth = random_field(grid_.size(), 52, 1e-8);
  const auto observed = apply_born(op_, truth);
  const auto at_truth = lsrtm_objective(op_, truth, observed);
  EXPECT_EQ(at_truth.value, 0.0);
  for (double g : at_truth.gradient) EXPECT_EQ(g, 0.0);

  const auto at_zero = lsrtm_objective(op_, std::vector<double>(grid_.size(), 0.0), observed);
  const auto rtm = apply_born_adjoint(op_, observed);
  for (std::size_t i = 0; i < rtm.size(); ++i) EXPECT_NEAR(at_zero.gradient[i], -rtm[i], 1e-12 * std::abs(rtm[i]) + 1e-300);
}

TEST_F(BornPair, LsrtmGradientIsAffine) {
  const auto observed = noise_gathers(2, 260, 9, 1e-3, 70);
  const auto mr = random_field(grid_.size(), 71, 1e-8);
  const auto g1 = lsrtm_objective(op_, mr, observed).gradient;
  const auto g0 = lsrtm_objective(op_, std::vector<double>(grid_.size(), 0.0), observed).gradient;
  const auto normal = apply_born_adjoint(op_, apply_born(op_, mr));
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < mr.size(); ++i) {
    err += std::pow(g1[i] - g0[i] - normal[i], 2);
    ref += normal[i] * normal[i];
  }
  EXPECT_LE(std::sqrt(err / ref), 1e-10);
}

TEST(LaplacianFilter, ConstantSpikeAndLinearity) {
  const Grid2D g(9, 7, 2.0, 4.0);
  for (double v : laplacian_filter(g, std::vector<double>(g.size(), 3.7))) EXPECT_EQ(v, 0.0);

  std::vector<double> spike(g.size(), 0.0);
  spike[g.index(4, 3)] = 1.0;
  const auto out = laplacian_filter(g, spike);
  EXPECT_DOUBLE_EQ(out[g.index(4, 3)], 2.0 / 4.0 + 2.0 / 16.0);
  EXPECT_DOUBLE_EQ(out[g.index(3, 3)], -1.0 / 4.0);
  EXPECT_DOUBLE_EQ(out[g.index(5, 3)], -1.0 / 4.0);
  EXPECT_DOUBLE_EQ(out[g.index(4, 2)], -1.0 / 16.0);
  EXPECT_DOUBLE_EQ(out[g.index(4, 4)], -1.0 / 16.0);
  int nonzero = 0;
  for (double v : out) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 5);

  const auto a = random_field(g.size(), 1), b = random_field(g.size(), 2);
  std::vector<double> c(g.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] - 4.0 * b[i];
  const auto la = laplacian_filter(g, a), lb = laplacian_filter(g, b), lc = laplacian_filter(g, c);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(lc[i], la[i] - 4.0 * lb[i], 1e-12);
}
