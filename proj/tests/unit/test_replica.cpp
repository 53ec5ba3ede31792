#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "masm/error.hpp"
#include "masm/replica.hpp"

namespace masm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double snr_sigma2(double db) { return std::pow(10.0, -db / 10.0); }

cplx l0_by_enumeration(cplx y, double tau, double a, const Constellation& c) {
  cplx best = 0.0;
  double best_cost = std::norm(y) / tau;
  for (auto s : c.points) {
    const double cost = std::norm(y - s) / tau + a;
    if (cost < best_cost) {
      best_cost = cost;
      best = s;
    }
  }
  return best;
}

TEST(ScalarRls, BoxLassoMatchesGridSearch) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> y(-3.0, 3.0), u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double tau = 0.2 + 2.0 * u(rng), lambda = u(rng);
    const BoxLassoEstimator est = i % 2 ? BoxLassoEstimator{lambda, 0.5 * u(rng), 1.0}
                                        : BoxLassoEstimator::classic(lambda);
    const double yi = y(rng);
    auto cost = [&](double v) { return (yi - v) * (yi - v) / tau + lambda * std::abs(v); };
    const double lo = std::isfinite(est.lower) ? -est.lower : -8.0;
    const double hi = std::isfinite(est.upper) ? est.upper : 8.0;
    ASSERT_NEAR(scalar_rls(est, yi, tau).real(), oracle::grid_argmin(cost, lo, hi), 1e-6);
  }
}

TEST(ScalarRls, L0MatchesEnumeration) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (const auto& c : {Constellation::ssk(), Constellation::bpsk(), Constellation::qam4()}) {
    for (int i = 0; i < 1000; ++i) {
      const cplx y(n(rng), n(rng));
      const double tau = u(rng) * 3.0, a = u(rng);
      ASSERT_EQ(scalar_rls(L0Estimator{a, c}, y, tau), l0_by_enumeration(y, tau, a, c));
    }
  }
}

TEST(ScalarRls, NumericIntervalMatchesGridSearch) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> y(-2.0, 2.0), u(0.1, 1.0);
  // A smooth non-convex penalty has no closed-form minimizer.
  auto reg = [](cplx v) { return 0.3 * std::log1p(4.0 * std::abs(v.real())); };
  const NumericEstimator est{reg, Interval{-1.0, 1.5}};
  for (int i = 0; i < 1000; ++i) {
    const double yi = y(rng), tau = u(rng);
    auto cost = [&](double v) { return (yi - v) * (yi - v) / tau + reg(v); };
    const double want = oracle::grid_argmin(cost, -1.0, 1.5);
    const double got = scalar_rls(est, yi, tau).real();
    // Compare through the cost so near-ties between two basins are accepted.
    ASSERT_LE(cost(got), cost(want) + 1e-12) << yi << " " << tau;
    if (std::abs(cost(got) - cost(want)) > 1e-9) ASSERT_NEAR(got, want, 1e-6);
  }
}

TEST(ScalarRls, NumericL1ReproducesProx) {
  const NumericEstimator est{[](cplx v) { return 0.4 * std::abs(v.real()); }, Interval{0.0, 1.0}};
  for (double y = -2.0; y <= 2.0; y += 0.013)
    ASSERT_NEAR(scalar_rls(est, y, 0.8).real(), scalar_rls(BoxLassoEstimator{0.4, 0.0, 1.0}, y, 0.8).real(),
                1e-6);
}

TEST(ScalarRls, NumericPointSetIsEnumeration) {
  const Constellation q = Constellation::qam4();
  std::vector<cplx> pts{0.0};
  pts.insert(pts.end(), q.points.begin(), q.points.end());
  const NumericEstimator est{[](cplx v) { return v == cplx(0.0) ? 0.0 : 0.3; }, PointSet{pts}};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const cplx y(n(rng), n(rng));
    ASSERT_EQ(scalar_rls(est, y, 0.7), l0_by_enumeration(y, 0.7, 0.3, q));
  }
}

TEST(TauTheta, RayleighClosedFormAndFiniteDifferences) {
  for (double xi : {0.25, 0.5, 2.0})
    for (double c : {0.0, 0.03, 0.4, 2.0})
      for (double q : {0.001, 0.05, 0.3}) {
        const double s2 = 0.08;
        const SpectralModel model = rayleigh_r_transform(xi);
        const DecoupledState a = tau_theta(model, c, q, s2);
        const DecoupledState f = tau_theta(model.without_derivative(), c, q, s2);
        EXPECT_NEAR(a.tau, xi * (1.0 + c), 1e-12);
        EXPECT_NEAR(a.theta, std::sqrt(xi * (s2 + q)), 1e-12);
        EXPECT_NEAR(f.tau, a.tau, 1e-8);
        EXPECT_NEAR(f.theta, a.theta, 1e-8);
      }
}

TEST(TauTheta, Errors) {
  // R(w) = 1 + 5w, so at c = 0.15, q = 0 the radicand is 0.25 - 0.75 < 0.
  const SpectralModel bad = custom_spectrum(
      "linear", [](double w) { return 1.0 + 5.0 * w; }, [](double) { return 5.0; }, 10.0);
  try {
    tau_theta(bad, 0.15, 0.0, 1.0);
    FAIL() << "expected NegativeRadicand";
  } catch (const NegativeRadicand& e) {
    EXPECT_DOUBLE_EQ(e.c(), 0.15);
  }
  EXPECT_THROW(tau_theta(bad, 0.5, 0.1, 1.0), InvalidArgument);  // R(-0.5) < 0
}

struct McCase {
  const char* name;
  ScalarEstimatorSpec spec;
  DecoupledInput input;
  ScalarDecision decision;
  DecoupledState state;
};

class FunctionalsVsMonteCarlo : public ::testing::TestWithParam<int> {};

std::vector<McCase> mc_cases() {
  const double s2 = snr_sigma2(11.0);
  const DecoupledInput ssk{0.125, Constellation::ssk()};
  const DecoupledInput bpsk{0.125, Constellation::bpsk()};
  const DecoupledInput qam{0.125, Constellation::qam4()};
  const DecoupledState st{0.05, 0.02, 0.6, 0.35};
  return {
      {"box", BoxLassoEstimator{0.17, 0.0, 1.0}, ssk, HardThreshold{0.5}, st},
      {"classic", BoxLassoEstimator::classic(0.3), ssk, HardThreshold{0.5}, st},
      {"classic-bpsk", BoxLassoEstimator::classic(0.3), bpsk, SignThreshold{0.5}, st},
      {"box-identity", BoxLassoEstimator{0.2, 0.5, 1.0}, bpsk, IdentityDecision{}, st},
      {"l0-ssk", L0Estimator{l0_weight(s2, 0.125, 0), Constellation::ssk()}, ssk,
       IdentityDecision{}, st},
      {"l0-bpsk", L0Estimator{l0_weight(s2, 0.125, 1), Constellation::bpsk()}, bpsk,
       IdentityDecision{}, st},
      {"l0-qam", L0Estimator{l0_weight(0.3, 0.125, 2), Constellation::qam4()}, qam,
       IdentityDecision{}, {0.1, 0.05, 2.0, 0.8}},
  };
}

TEST_P(FunctionalsVsMonteCarlo, WithinThreeStandardErrors) {
  const McCase c = mc_cases()[static_cast<std::size_t>(GetParam())];
  const Functionals f = functionals(c.spec, c.state, c.input, c.decision);
  std::vector<cplx> support{0.0};
  std::vector<double> weights{1.0 - c.input.eta};
  for (auto p : c.input.constellation.points) {
    support.push_back(p);
    weights.push_back(c.input.eta / c.input.constellation.size());
  }
  // Independent scalar estimators, not the library's.
  std::function<cplx(cplx)> estimate;
  if (const auto* b = std::get_if<BoxLassoEstimator>(&c.spec)) {
    const double kappa = c.state.tau * b->lambda / 2.0;
    estimate = [=](cplx y) {
      const double r = y.real();
      const double soft = r > kappa ? r - kappa : (r < -kappa ? r + kappa : 0.0);
      return cplx(std::clamp(soft, -b->lower, b->upper));
    };
  } else {
    const auto l0 = std::get<L0Estimator>(c.spec);
    estimate = [=](cplx y) { return l0_by_enumeration(y, c.state.tau, l0.a, l0.constellation); };
  }
  const double power = c.input.constellation.power;
  const auto dec = c.decision;
  auto decide = [=](cplx v) { return apply_scalar_decision(dec, v, power); };
  const oracle::McMoments m = oracle::scalar_monte_carlo(support, weights, c.state.theta, estimate,
                                                         decide, 10'000'000, 77);
  EXPECT_LE(std::abs(f.c_corr - m.c), 3.0 * m.c_se + 1e-12) << c.name;
  EXPECT_LE(std::abs(f.e_mse - m.e), 3.0 * m.e_se + 1e-12) << c.name;
  EXPECT_LE(std::abs(f.error_rate - m.err), 3.0 * m.err_se + 1e-12) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Cases, FunctionalsVsMonteCarlo, ::testing::Range(0, 7));

TEST(Functionals, GaussHermiteAgreesWithClosedForm) {
  const DecoupledInput in{0.125, Constellation::ssk()};
  const DecoupledState st{0.05, 0.02, 0.6, 0.35};
  const Functionals exact = functionals(BoxLassoEstimator{0.2, 0.0, 1.0}, st, in, HardThreshold{0.5});
  const NumericEstimator num{[](cplx v) { return 0.2 * std::abs(v.real()); }, Interval{0.0, 1.0}};
  QuadratureOptions q;
  q.tol = 1e-5;
  const Functionals gh = functionals(num, st, in, HardThreshold{0.5}, q);
  EXPECT_GT(gh.quadrature_nodes, 0);
  EXPECT_NEAR(gh.c_corr, exact.c_corr, 1e-4);
  EXPECT_NEAR(gh.e_mse, exact.e_mse, 1e-4);
}

TEST(Functionals, NoiselessLimit) {
  const DecoupledInput in{0.125, Constellation::bpsk()};
  const DecoupledState st{0.0, 0.0, 1.0, 0.0};
  const Functionals f = functionals(BoxLassoEstimator::classic(0.0), st, in, SignThreshold{0.5});
  EXPECT_DOUBLE_EQ(f.e_mse, 0.0);
  EXPECT_DOUBLE_EQ(f.error_rate, 0.0);
  EXPECT_THROW(functionals(BoxLassoEstimator::classic(0.1), st,
                           DecoupledInput{0.125, Constellation::qam4()}, SignThreshold{0.5}),
               InvalidArgument);
}

TEST(GaussHermite, Moments) {
  for (int n : {8, 64, 512}) {
    const GaussHermite& g = gauss_hermite(n);
    double m0 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
      m0 += g.weights[i];
      m2 += g.weights[i] * g.nodes[i] * g.nodes[i];
      m4 += g.weights[i] * std::pow(g.nodes[i], 4);
    }
    const double sp = std::sqrt(std::numbers::pi);
    EXPECT_NEAR(m0, sp, 1e-10);
    EXPECT_NEAR(m2, sp / 2.0, 1e-10);
    EXPECT_NEAR(m4, 3.0 * sp / 4.0, 1e-9);
  }
  EXPECT_THROW(gauss_hermite(0), InvalidArgument);
}

TEST(FixedPoint, ClassicLassoOperatingPoint) {
  const SpectralModel model = rayleigh_r_transform(0.5);
  const DecoupledInput in{0.125, Constellation::ssk()};
  const double s2 = snr_sigma2(11.0);
  const FixedPointResult hi = solve_fixed_point(BoxLassoEstimator::classic(0.56), model, s2, in,
                                                HardThreshold{0.5});
  const FixedPointResult lo = solve_fixed_point(BoxLassoEstimator::classic(0.06), model, s2, in,
                                                HardThreshold{0.5});
  ASSERT_TRUE(hi.converged);
  ASSERT_TRUE(lo.converged);
  EXPECT_LE(hi.residual_c, 1e-10);
  EXPECT_LE(hi.residual_q, 1e-10);
  EXPECT_NEAR(10.0 * std::log10(hi.mse()), -20.73, 0.4);
  EXPECT_NEAR(10.0 * std::log10(lo.mse()), -16.73, 0.4);
  // q* is the MSE at the fixed point.
  EXPECT_NEAR(hi.q_star, hi.mse(), 1e-10);
}

TEST(FixedPoint, NonConvergenceIsReported) {
  FixedPointOptions o;
  o.max_iter = 2;
  const FixedPointResult r =
      solve_fixed_point(BoxLassoEstimator::classic(0.3), rayleigh_r_transform(0.5), 0.1,
                        DecoupledInput{}, HardThreshold{0.5}, o);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.residual(), 1e-10);
  o.damping = 0.0;
  EXPECT_THROW(solve_fixed_point(BoxLassoEstimator::classic(0.3), rayleigh_r_transform(0.5), 0.1,
                                 DecoupledInput{}, HardThreshold{0.5}, o),
               InvalidArgument);
}

TEST(FixedPoint, NumericEstimatorConverges) {
  const NumericEstimator num{[](cplx v) { return 0.3 * std::abs(v.real()); }, Interval{0.0, 1.0}};
  const FixedPointResult r = solve_fixed_point(num, rayleigh_r_transform(0.5), snr_sigma2(11.0),
                                               DecoupledInput{}, HardThreshold{0.5});
  ASSERT_TRUE(r.converged);
  const FixedPointResult exact =
      solve_fixed_point(BoxLassoEstimator{0.3, 0.0, 1.0}, rayleigh_r_transform(0.5),
                        snr_sigma2(11.0), DecoupledInput{}, HardThreshold{0.5});
  EXPECT_NEAR(r.mse(), exact.mse(), 1e-4 * exact.mse() + 1e-6);
}

TEST(Tune, BoxAndClassicMinimizers) {
  const SpectralModel model = rayleigh_r_transform(0.5);
  const DecoupledInput in{0.125, Constellation::ssk()};
  const double s2 = snr_sigma2(11.0);
  const TuneResult box = tune(box_lasso_family(0.0, 1.0), model, s2, in, Metric::kErrorRate);
  const TuneResult classic = tune(classic_lasso_family(), model, s2, in, Metric::kErrorRate);
  EXPECT_GE(box.lambda_star, 0.15);
  EXPECT_LE(box.lambda_star, 0.19);
  EXPECT_GE(classic.lambda_star, 0.19);
  EXPECT_LE(classic.lambda_star, 0.22);
  EXPECT_LT(box.metric_star, classic.metric_star);
  for (const auto& p : box.evaluated)
    if (p.converged) EXPECT_GE(p.value, box.metric_star);
}

TEST(Tune, DictionaryCsv) {
  const auto rows = tuning_dictionary(box_lasso_family(0.0, 1.0), rayleigh_r_transform(0.5),
                                      DecoupledInput{}, {9.0, 11.0}, Metric::kErrorRate);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GT(rows[0].lambda, rows[1].lambda);
  std::ostringstream os;
  write_dictionary_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 7), "snr_db,");
  EXPECT_THROW(tuning_dictionary(box_lasso_family(0.0, 1.0), rayleigh_r_transform(0.5),
                                 DecoupledInput{}, {}, Metric::kMse),
               InvalidArgument);
}

TEST(MapBound, ShapeOnSmallGrid) {
  const SpectralModel model = rayleigh_r_transform(2.0);
  double prev[3] = {1.0, 1.0, 1.0};
  for (double db : {5.0, 9.0, 13.0}) {
    double err[3];
    int k = 0;
    for (const auto& c : {Constellation::ssk(), Constellation::bpsk(), Constellation::qam4()}) {
      const double s2 = snr_sigma2(db);
      const FixedPointResult r =
          solve_fixed_point(L0Estimator{l0_weight(s2, 0.125, c.bits_per_symbol), c}, model, s2,
                            DecoupledInput{0.125, c}, IdentityDecision{});
      ASSERT_TRUE(r.converged);
      err[k] = r.error_rate();
      EXPECT_LE(err[k], prev[k]);
      prev[k] = err[k];
      ++k;
    }
    EXPECT_LE(err[0], err[1]);
    EXPECT_LE(err[1], err[2]);
  }
}

}  // namespace
}  // namespace masm
