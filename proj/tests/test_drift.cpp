#include "interp_lab/drift.hpp"
#include "interp_lab/dynamics.hpp"
#include "interp_lab/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ilab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

double scalar(const DriftOracle& b, double t, double x) { return b.eval(t, vec({x}))[0]; }

}  // namespace

TEST(GaussianDrift, TrigScheduleUnitVarianceIsZero) {
  const auto b = gaussian_drift(Schedule::linear_trig(), GaussianTarget::diagonal({1.0}));
  for (double t : {0.1, 0.5, 0.9}) EXPECT_NEAR(scalar(b, t, 1.7), 0.0, 1e-15);
}

TEST(GaussianDrift, LinearMultiplier) {
  const auto b = gaussian_drift(Schedule::linear(), GaussianTarget::diagonal({4.0}));
  EXPECT_NEAR(scalar(b, 0.5, 1.0), 1.2, 1e-15);
}

TEST(GaussianDrift, DesignedIsConstant) {
  const double m = 7.0;
  const auto b = gaussian_drift(Schedule::designed_gaussian(m), GaussianTarget::diagonal({m}));
  for (double t : {1e-3, 0.2, 0.5, 0.999}) EXPECT_NEAR(scalar(b, t, 2.0), std::log(m), 1e-12);
}

TEST(GaussianDrift, DesignedJacobianNormConstant) {
  for (double l : {1e-4, 1e-2, 0.5}) {
    const auto target = GaussianTarget::diagonal({1.0, 0.5 * (1.0 + l), l});
    const auto b = gaussian_drift(Schedule::designed_gaussian(l), target);
    const std::vector<double> x{0.1, -0.2, 0.3};
    for (int i = 0; i < 128; ++i) {
      const double t = (i + 0.5) / 128.0;
      EXPECT_NEAR(b.jacobian_norm(t, x), 0.5 * std::abs(std::log(l)), 1e-10) << t;
    }
  }
}

TEST(GaussianDrift, ScoreClosedForm) {
  const auto s = Schedule::approx_min_lip_gmm(2.0);
  const auto score = gaussian_score(s, GaussianTarget::diagonal({3.0}));
  for (double t : {0.1, 0.6}) {
    const auto v = s.eval(t);
    EXPECT_NEAR(score.eval(t, vec({1.5}))[0], -1.5 / (v.alpha * v.alpha + v.beta * v.beta * 3.0), 1e-14);
  }
}

TEST(GeneralGmm, SingleModeReducesToGaussian) {
  const double m = 5.0;
  const GeneralGmmTarget g({1.0}, {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Constant(1, 1, m)});
  for (const auto& s : {Schedule::linear(), Schedule::designed_gaussian(0.1), Schedule::approx_min_lip_gmm(2.0)}) {
    const auto a = general_gmm_drift(s, g);
    const auto b = gaussian_drift(s, GaussianTarget::diagonal({m}));
    for (double t : {0.01, 0.3, 0.7, 0.99})
      for (double x : {-3.0, 0.2, 4.0}) EXPECT_NEAR(scalar(a, t, x), scalar(b, t, x), 1e-10) << s.name();
  }
}

TEST(GeneralGmm, SymmetricZeroAtOrigin) {
  const auto g = GeneralGmmTarget::from_bimodal(BimodalGmmTarget::one_d(2.0, 0.5));
  EXPECT_NEAR(scalar(general_gmm_drift(Schedule::linear_trig(), g), 0.4, 0.0), 0.0, 1e-15);
}

TEST(GeneralGmm, MatchesBimodalClosedForm) {
  const auto b = BimodalGmmTarget::one_d(2.0, 0.3);
  const auto s = Schedule::linear_trig();
  const double a = scalar(general_gmm_drift(s, GeneralGmmTarget::from_bimodal(b)), 0.5, 1.0);
  EXPECT_NEAR(a, scalar(bimodal_drift(s, b), 0.5, 1.0), 1e-10);
}

TEST(GeneralGmm, FarSeparatedModesStayFinite) {
  using V = Eigen::VectorXd;
  using M = Eigen::MatrixXd;
  const GeneralGmmTarget g({0.5, 0.5}, {V::Constant(2, 1e3), V::Constant(2, -1e3)}, {M::Identity(2, 2), M::Identity(2, 2)});
  const auto b = general_gmm_drift(Schedule::linear(), g);
  for (double t : {0.1, 0.5, 0.9}) {
    const auto v = b.eval(t, vec({30.0, -20.0}));
    EXPECT_TRUE(v.allFinite());
    EXPECT_TRUE(b.jacobian(t, std::vector<double>{30.0, -20.0}).allFinite());
  }
}

TEST(GeneralGmm, NonIdentityNoiseMatchesGaussian) {
  // Single mode N(0, C) with noise N(0, C0) is the Gaussian path with
  // covariance alpha^2 C0 + beta^2 C.
  Eigen::MatrixXd c(2, 2), c0(2, 2);
  c << 3.0, 0.5, 0.5, 1.0;
  c0 << 1.5, -0.2, -0.2, 0.7;
  const GeneralGmmTarget g({1.0}, {Eigen::VectorXd::Zero(2)}, {c}, c0);
  const auto s = Schedule::linear();
  const auto b = general_gmm_drift(s, g);
  const Eigen::Vector2d x(0.3, -1.1);
  for (double t : {0.2, 0.6}) {
    const auto v = s.eval(t);
    const Eigen::MatrixXd cov = v.alpha * v.alpha * c0 + v.beta * v.beta * c;
    const Eigen::MatrixXd dcov = v.alpha * v.alpha_dot * c0 + v.beta * v.beta_dot * c;
    const Eigen::VectorXd expected = dcov * cov.ldlt().solve(x);
    EXPECT_NEAR((b.eval(t, x) - expected).norm(), 0.0, 1e-12);
  }
}

TEST(BimodalDrift, Examples) {
  const auto sym = BimodalGmmTarget::one_d(2.0, 0.5);
  const auto s = Schedule::linear_trig();
  EXPECT_EQ(scalar(bimodal_drift(s, sym), 0.3, 0.0), 0.0);
  EXPECT_NEAR(scalar(bimodal_drift(s, sym), 0.5, 1.0), 2.0 * std::tanh(1.0), 1e-14);
  EXPECT_NEAR(2.0 * std::tanh(1.0), 1.52318, 1e-5);
  const auto skew = BimodalGmmTarget::one_d(2.0, 0.3);
  for (double x : {-5.0, 0.0, 5.0}) EXPECT_NEAR(scalar(bimodal_drift(s, skew), 0.0, x), 2.0 * std::tanh(skew.h()), 1e-14);
  EXPECT_THROW(bimodal_drift(Schedule::linear(), sym), ContractError);
}

TEST(BimodalDrift, HighDimensionalJacobianNorm) {
  const int d = 50;
  const auto target = BimodalGmmTarget::ones(d, 0.3);
  const auto s = Schedule::linear_trig();
  const auto b = bimodal_drift(s, target);
  std::vector<double> x(d, 0.01);
  const double t = 0.4;
  const auto v = s.eval(t);
  const double arg = target.h() + v.beta * 0.01 * d;
  const double sech2 = 1.0 / (std::cosh(arg) * std::cosh(arg));
  EXPECT_NEAR(b.jacobian_norm(t, x), d * v.beta_dot * v.beta * sech2, 1e-12);
}

TEST(OtDrift, Examples) {
  EXPECT_NEAR(scalar(ot_gaussian_drift(3.0, 3.0), 0.4, 2.0), 0.0, 1e-15);
  EXPECT_NEAR(scalar(ot_gaussian_drift(4.0, 1.0), 0.0, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(scalar(ot_gaussian_drift(100.0, 1.0), 0.0, 1.0), 9.0, 1e-14);
  const auto designed = gaussian_drift(Schedule::designed_gaussian(100.0), GaussianTarget::diagonal({100.0}));
  EXPECT_NEAR(designed.jacobian_norm(0.0005, std::vector<double>{1.0}), 0.5 * std::log(100.0), 1e-12);
}

TEST(OtDrift, PathScheduleMatchesGaussianDrift) {
  const double m = 4.0;
  const auto s = ot_path_schedule(m);
  const auto a = ot_gaussian_drift(m, 1.0);
  const auto b = gaussian_drift(s, GaussianTarget::diagonal({m}));
  for (double t : {0.05, 0.3, 0.8}) EXPECT_NEAR(scalar(a, t, 1.3), scalar(b, t, 1.3), 1e-12) << t;
}

TEST(Transfer, LinearIsIdentity) {
  const auto g = GeneralGmmTarget::from_bimodal(BimodalGmmTarget::one_d(2.0, 0.3));
  const auto ref = general_gmm_drift(Schedule::linear(), g);
  const auto moved = transfer_drift(ref, Schedule::linear());
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ut(1e-3, 1.0 - 1e-3), ux(-6.0, 6.0);
  for (int i = 0; i < 200; ++i) {
    const double t = ut(gen), x = ux(gen);
    EXPECT_NEAR(scalar(moved, t, x), scalar(ref, t, x), 1e-12);
  }
}

TEST(Transfer, GaussianToDesigned) {
  for (double m : {0.01, 4.0, 100.0}) {
    const auto ref = gaussian_drift(Schedule::linear(), GaussianTarget::diagonal({m}));
    const auto moved = transfer_drift(ref, Schedule::designed_gaussian(m));
    for (int i = 0; i <= 100; ++i) {
      const double t = 1e-3 + (1.0 - 2e-3) * i / 100.0;
      EXPECT_NEAR(scalar(moved, t, 2.5), 0.5 * std::log(m) * 2.5, 1e-9) << "M=" << m << " t=" << t;
    }
  }
}

TEST(Transfer, BimodalToTrigSquare) {
  const auto b = BimodalGmmTarget::one_d(2.0, 0.3);
  const auto sq = Schedule::trig_from_beta(BetaCurve::power(2.0));
  const auto moved = transfer_drift(general_gmm_drift(Schedule::linear(), GeneralGmmTarget::from_bimodal(b)), sq);
  const auto closed = bimodal_drift(sq, b);
  for (double t : {1e-3, 0.1, 0.5, 0.9, 0.999})
    for (double x : {-6.0, -1.0, 0.0, 2.0, 6.0}) EXPECT_NEAR(scalar(moved, t, x), scalar(closed, t, x), 1e-8);
}

TEST(Transfer, Endpoints) {
  const auto ref = gaussian_drift(Schedule::linear(), GaussianTarget::diagonal({2.0}));
  const auto moved = transfer_drift(ref, Schedule::linear_trig());
  // At t = 0 the denoiser form still evaluates (beta = 0, no division).
  EXPECT_TRUE(std::isfinite(scalar(moved, 0.0, 1.0)));
  EXPECT_NEAR(scalar(moved, 0.0, 1.0), scalar(gaussian_drift(Schedule::linear_trig(), GaussianTarget::diagonal({2.0})), 0.0, 1.0),
              1e-12);
}

TEST(Transfer, RejectsNonLinearReference) {
  const auto ref = gaussian_drift(Schedule::linear_trig(), GaussianTarget::diagonal({2.0}));
  EXPECT_THROW(transfer_drift(ref, Schedule::linear()), ContractError);
}

TEST(Transfer, ThenScoreRoundTripReproducesReference) {
  const auto g = GeneralGmmTarget::from_bimodal(BimodalGmmTarget::one_d(1.5, 0.4));
  const auto ref = general_gmm_drift(Schedule::linear(), g);
  const auto s = Schedule::approx_min_lip_gmm(1.5);
  const auto moved = transfer_drift(ref, s);
  // Score of the moved drift under s equals the score of the reference under
  // the linear schedule at the matching time and rescaled state.
  const auto score_s = score_from_drift(moved, s);
  for (double t : {0.05, 0.4, 0.9}) {
    const auto v = s.eval(t);
    const double c = v.alpha + v.beta;
    const double tl = v.beta / c;
    const double x = 0.7;
    const auto score_lin = score_from_drift(ref, Schedule::linear());
    const double expected = score_lin.eval(tl, vec({x / c}))[0] / c;
    EXPECT_NEAR(score_s.eval(t, vec({x}))[0], expected, 1e-8) << t;
    const auto back = drift_from_score(score_s, s);
    EXPECT_NEAR(scalar(back, t, x), scalar(moved, t, x), 1e-8);
  }
}

TEST(ScoreConversion, RoundTrip) {
  const auto s = Schedule::designed_gaussian(0.2);
  const auto b = gaussian_drift(s, GaussianTarget::diagonal({0.2}));
  const auto back = drift_from_score(score_from_drift(b, s), s);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> ut(1e-3, 1.0 - 1e-3), ux(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double t = ut(gen), x = ux(gen);
    EXPECT_NEAR(scalar(back, t, x), scalar(b, t, x), 1e-10);
  }
}

TEST(ScoreConversion, GaussianScoreFromDrift) {
  for (const auto& s : {Schedule::linear(), Schedule::linear_trig(), Schedule::approx_min_lip_gmm(3.0)}) {
    const auto b = gaussian_drift(s, GaussianTarget::diagonal({2.5}));
    const auto score = score_from_drift(b, s);
    for (double t : {0.1, 0.5, 0.9}) {
      const auto v = s.eval(t);
      EXPECT_NEAR(score.eval(t, vec({1.2}))[0], -1.2 / (v.alpha * v.alpha + 2.5 * v.beta * v.beta), 1e-10);
    }
  }
}

TEST(ScoreConversion, LinearUnitVariance) {
  const auto target = GaussianTarget::diagonal({1.0});
  const auto b = drift_from_score(gaussian_score(Schedule::linear(), target), Schedule::linear());
  const auto ref = gaussian_drift(Schedule::linear(), target);
  for (double t : {0.2, 0.5, 0.8}) EXPECT_NEAR(scalar(b, t, 0.9), scalar(ref, t, 0.9), 1e-10);
}

TEST(ScoreConversion, SingularEndpoints) {
  const auto s = Schedule::linear();
  const auto b = gaussian_drift(s, GaussianTarget::diagonal({2.0}));
  const auto score = score_from_drift(b, s);
  EXPECT_THROW(score.eval(0.0, vec({1.0})), DomainError);
  EXPECT_THROW(score.eval(1.0, vec({1.0})), DomainError);
  const auto back = drift_from_score(score, s);
  EXPECT_THROW(back.eval(0.0, vec({1.0})), DomainError);
}

TEST(OptimalEpsilon, Examples) {
  const auto lin = optimal_epsilon(Schedule::linear());
  const auto trig = optimal_epsilon(Schedule::linear_trig());
  for (double t : {0.1, 0.4, 0.8}) {
    EXPECT_NEAR(lin(t), (1.0 - t) / t, 1e-14);
    EXPECT_NEAR(trig(t), 1.0 / t, 1e-12);
  }
  for (const auto& s : {Schedule::designed_gaussian(0.01), Schedule::approx_min_lip_gmm(3.0), Schedule::dilated(1.0, 2.0)}) {
    const auto e = optimal_epsilon(s);
    for (int i = 1; i < 100; ++i) EXPECT_GT(e(i / 100.0), 0.0) << s.name();
  }
  EXPECT_EQ(lin(1.0), 0.0);
  EXPECT_TRUE(std::isinf(lin(0.0)));
}

TEST(MatrixSchedule, Examples) {
  EXPECT_NEAR(matrix_schedule_drift(GaussianTarget::diagonal({1.0, 1.0})).eval(0.3, vec({2.0, -1.0})).norm(), 0.0, 1e-15);
  const auto b = matrix_schedule_drift(GaussianTarget::diagonal({std::exp(2.0), std::exp(-2.0)}));
  const auto v = b.eval(0.7, vec({3.0, 5.0}));
  EXPECT_NEAR(v[0], 3.0, 1e-14);
  EXPECT_NEAR(v[1], -5.0, 1e-14);
  EXPECT_NEAR(b.jacobian_norm(0.2, std::vector<double>{0.0, 0.0}), 1.0, 1e-14);
}

TEST(MatrixSchedule, FlowReachesTargetCovariance) {
  const double c = std::cos(0.3), s = std::sin(0.3);
  Eigen::MatrixXd u(2, 2);
  u << c, -s, s, c;
  const auto target = GaussianTarget::orthogonal({9.0, 0.25}, u);
  const auto b = matrix_schedule_drift(target);
  auto z = sample_noise(Target{target}, 50000, 2);
  IntegratorConfig cfg;
  cfg.t_min = 0.0;
  cfg.t_max = 1.0;
  cfg.steps = 40;
  const auto x = integrate_ode(b, z, cfg);
  const Eigen::MatrixXd proj = x.states * u;
  for (int j = 0; j < 2; ++j) {
    std::vector<double> sq(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) sq[static_cast<std::size_t>(i)] = proj(i, j) * proj(i, j);
    const auto st = num::mean_stat(sq);
    EXPECT_NEAR(st.mean, j == 0 ? 9.0 : 0.25, 4.0 * st.std_error);
  }
}

TEST(Jacobian, AnalyticMatchesFiniteDifferences) {
  using V = Eigen::VectorXd;
  using M = Eigen::MatrixXd;
  Eigen::MatrixXd c1(2, 2);
  c1 << 2.0, 0.3, 0.3, 0.5;
  const GeneralGmmTarget g3({0.2, 0.5, 0.3}, {vec({1.0, 2.0}), vec({-1.0, 0.0}), vec({0.0, -2.0})},
                            {c1, M::Identity(2, 2), 0.3 * M::Identity(2, 2)});
  const auto bim = BimodalGmmTarget::ones(3, 0.3);
  const std::vector<DriftOracle> oracles = {
      gaussian_drift(Schedule::linear(), GaussianTarget::diagonal({4.0, 0.1})),
      general_gmm_drift(Schedule::linear(), g3),
      general_gmm_drift(Schedule::approx_min_lip_gmm(2.0), g3),
      bimodal_drift(Schedule::linear_trig(), bim),
      transfer_drift(general_gmm_drift(Schedule::linear(), g3), Schedule::designed_gaussian(0.1)),
      matrix_schedule_drift(GaussianTarget::diagonal({3.0, 0.2})),
  };
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ut(0.02, 0.98), ux(-2.0, 2.0);
  for (const auto& o : oracles) {
    ASSERT_TRUE(o.has_jacobian()) << o.name();
    for (int p = 0; p < 50; ++p) {
      const double t = ut(gen);
      std::vector<double> x(static_cast<std::size_t>(o.dim()));
      for (auto& v : x) v = ux(gen);
      const auto a = o.jacobian(t, x);
      const auto f = o.fd_jacobian(t, x);
      EXPECT_LE((a - f).norm(), 1e-4 * std::max(1.0, a.norm())) << o.name() << " t=" << t;
    }
  }
}

TEST(Jacobian, SpectralNormPowerIterationAgreesWithSvd) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd j(100, 100);
  for (Eigen::Index r = 0; r < j.rows(); ++r)
    for (Eigen::Index c = 0; c < j.cols(); ++c) j(r, c) = nd(gen);
  j += 30.0 * Eigen::VectorXd::Ones(100) * Eigen::VectorXd::Ones(100).transpose() / 100.0;
  const double exact = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues()[0];
  PowerIterationOptions opt;
  opt.iterations = 500;
  EXPECT_NEAR(DriftOracle::spectral_norm(j, opt), exact, 1e-4 * exact);
}

TEST(Jacobian, FiniteDifferenceFallback) {
  // An oracle without an analytic Jacobian.
  DriftOracle o("cubic", "linear", 1, [](double t, std::span<const double> x, std::span<double> out) {
    out[0] = t * x[0] * x[0] * x[0];
  });
  EXPECT_FALSE(o.has_jacobian());
  EXPECT_NEAR(o.jacobian(0.5, std::vector<double>{2.0})(0, 0), 6.0, 1e-6);
  EXPECT_NEAR(o.jacobian_norm(0.5, std::vector<double>{2.0}), 6.0, 1e-6);
}
