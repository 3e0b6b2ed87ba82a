#include "interp_lab/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ilab;

TEST(Pca, RecoversLine) {
  const int d = 20;
  Eigen::VectorXd dir = Eigen::VectorXd::LinSpaced(d, 1.0, 2.0).normalized();
  Rng rng(5, Stream::Aux, 1);
  SampleBatch b(2000, d, 1.0, 0);
  std::vector<double> s(2000);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    s[static_cast<std::size_t>(i)] = 3.0 * rng.normal();
    for (int j = 0; j < d; ++j) b.states(i, j) = s[static_cast<std::size_t>(i)] * dir[j] + 0.05 * rng.normal();
  }
  const auto proj = pca_project_1d(b);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sxy += s[i] * proj[i];
    sxx += s[i] * s[i];
    syy += proj[i] * proj[i];
  }
  EXPECT_GT(std::abs(sxy) / std::sqrt(sxx * syy), 0.999);
}

TEST(Pca, IsotropicVarianceIsTopEigenvalue) {
  const auto b = sample_target(Target{GaussianTarget::diagonal(std::vector<double>(10, 1.0))}, 20000, 8);
  const auto proj = pca_project_1d(b);
  double sq = 0.0;
  for (double v : proj) sq += v * v;
  // Top eigenvalue of a 10 x 10 sample covariance sits slightly above 1.
  EXPECT_NEAR(sq / static_cast<double>(proj.size()), 1.0, 0.06);
}

TEST(Pca, BimodalProjectionHasModesAtRootD) {
  const int d = 100;
  const auto b = sample_target(Target{BimodalGmmTarget::ones(d, 0.5)}, 4000, 3);
  const auto proj = pca_project_1d(b);
  double abs_mean = 0.0;
  for (double v : proj) abs_mean += std::abs(v);
  abs_mean /= static_cast<double>(proj.size());
  EXPECT_NEAR(abs_mean, std::sqrt(static_cast<double>(d)), 0.1);
  SampleBatch flat(5, 3, 0.0, 0);
  flat.states.setConstant(2.0);
  EXPECT_THROW(pca_project_1d(flat), DegenerateError);
}

TEST(Em, RecoversAsymmetricWeights) {
  const auto b = sample_target(Target{BimodalGmmTarget::one_d(5.0, 0.3)}, 10000, 7);
  std::vector<double> v(b.states.data(), b.states.data() + b.size());
  const auto fit = fit_bimodal_1d(v, 1);
  EXPECT_NEAR(fit.weight2, 0.3, 0.02);
  EXPECT_NEAR(fit.mean2, 5.0, 0.1);
  EXPECT_NEAR(fit.mean1, -5.0, 0.1);
  EXPECT_NEAR(fit.var1, 1.0, 0.1);
  EXPECT_TRUE(fit.resolved());
  EXPECT_LT(fit.mean1, fit.mean2);
}

TEST(Em, SymmetricAndUnimodal) {
  const auto b = sample_target(Target{BimodalGmmTarget::one_d(4.0, 0.5)}, 10000, 2);
  std::vector<double> v(b.states.data(), b.states.data() + b.size());
  EXPECT_NEAR(fit_bimodal_1d(v, 0).minor_weight(), 0.5, 0.02);

  const auto g = sample_target(Target{GaussianTarget::diagonal({1.0})}, 10000, 2);
  std::vector<double> u(g.states.data(), g.states.data() + g.size());
  EXPECT_LT(fit_bimodal_1d(u, 0).separation, 1.0);

  EXPECT_THROW(fit_bimodal_1d(std::vector<double>(50, 1.5)), DegenerateError);
  EXPECT_THROW(fit_bimodal_1d(std::vector<double>{1.0, 2.0}), ParameterError);
}

TEST(SignAudit, NoViolationsAlongBimodalFlow) {
  const auto target = BimodalGmmTarget::ones(10, 0.3);
  const auto s = Schedule::linear_trig();
  IntegratorConfig cfg;
  cfg.steps = 50;
  cfg.store_trajectory = true;
  auto z = sample_noise(Target{target}, 2000, 4);
  z.states *= s.eval(cfg.t_min).alpha;
  Trajectory tr;
  integrate_ode(bimodal_drift(s, target), z, cfg, &tr);
  const auto audit = sign_monotonicity_audit(tr, target.r(), target.h());
  EXPECT_EQ(audit.samples, 2000u);
  EXPECT_GT(audit.absorbed, 1000u);
  EXPECT_EQ(audit.violations, 0u);
}

TEST(Grf, CoefficientFlowEqualsGridFlow) {
  GrfSpec spec;
  spec.grid = 10;
  const auto field = spec.target();
  const auto modal = GaussianTarget::diagonal({field.eigenvalues().begin(), field.eigenvalues().end()});
  const auto s = Schedule::designed_gaussian(field.min_eigenvalue());
  IntegratorConfig cfg;
  cfg.steps = 6;
  auto z = sample_noise(Target{field}, 20, 3);
  z.states *= s.eval(cfg.t_min).alpha;
  const auto grid = integrate_ode(gaussian_drift(s, field), z, cfg);
  const auto coef = from_sine_coefficients(field, integrate_ode(gaussian_drift(s, modal), to_sine_coefficients(field, z), cfg));
  EXPECT_LT((grid.states - coef.states).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Grf, SmallBenchDesignedBeatsLinear) {
  GrfBenchConfig cfg;
  cfg.resolutions = {16};
  cfg.steps = {20};
  cfg.n_samples = 256;
  cfg.k_max = 8;
  const auto r = grf_spectrum_bench(cfg);
  ASSERT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.resolutions.size(), 1u);
  EXPECT_EQ(r.runs[0].schedule, "linear");
  EXPECT_LT(r.runs[1].error, r.runs[0].error);
  EXPECT_LT(r.runs[1].error, 0.1);
  EXPECT_LT(r.resolutions[0].truth_error, 0.1);
}

TEST(KlBench, DeltaZeroIsZero) {
  KlBenchConfig cfg;
  cfg.delta = 0.0;
  cfg.quad.quad_points = 33;
  cfg.quad.mc_per_t = 50;
  const auto r = kl_invariance_bench(cfg);
  EXPECT_EQ(r.analytic, 0.0);
  for (const auto& row : r.rows) EXPECT_NEAR(row.report.estimate, 0.0, 1e-25) << row.schedule;  // two score formulas, roundoff only
}

TEST(GmmBench, ReproducibleAndComplete) {
  GmmBenchConfig cfg;
  cfg.d = 50;
  cfg.n = 500;
  cfg.seeds = 2;
  const auto a = gmm_mode_weight_bench(cfg);
  const auto b = gmm_mode_weight_bench(cfg);
  ASSERT_EQ(a.runs.size(), 12u);
  ASSERT_EQ(a.summary.size(), 6u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].minor_weight, b.runs[i].minor_weight);
    EXPECT_GE(a.runs[i].minor_weight, 0.0);
    EXPECT_LE(a.runs[i].minor_weight, 0.5);
  }
  EXPECT_TRUE(std::isnan(reference_minor_weight("linear-trig", 5)));
  EXPECT_EQ(reference_minor_weight("approx-minlip-gmm", 2), 0.42);
  cfg.schedules = {"nope"};
  EXPECT_THROW(gmm_mode_weight_bench(cfg), ParameterError);
}

// Full-size bench: at 2 RK4 steps the minor-weight gap between schedules
// should exceed 0.3 for every one of 5 seeds.
TEST(GmmBench, TwoStepGapAcrossSeeds) {
  GmmBenchConfig cfg;
  cfg.steps = {2};
  const auto r = gmm_mode_weight_bench(cfg);
  for (int s = 0; s < cfg.seeds; ++s) {
    double lin = 0.0, minlip = 0.0;
    for (const auto& run : r.runs) {
      if (run.seed != static_cast<std::uint64_t>(s)) continue;
      (run.schedule == "linear-trig" ? lin : minlip) = run.minor_weight;
    }
    EXPECT_GT(minlip - lin, 0.3) << "seed " << s << ": " << minlip << " vs " << lin;
  }
}
