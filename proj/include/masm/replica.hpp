#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "masm/channel.hpp"
#include "masm/codec.hpp"
#include "masm/detect.hpp"

namespace masm {

/// Scalar input law x = psi s with psi ~ Bernoulli(eta) and s uniform on S.
struct DecoupledInput {
  double eta = 0.125;
  Constellation constellation = Constellation::ssk();

  double second_moment() const { return eta * constellation.power; }
  void validate() const;
};

struct DecoupledState {
  double c = 0.0;
  double q = 0.0;
  double tau = 0.0;
  double theta = 0.0;
};

/// Clipped soft threshold on Re(y) over [-lower, upper]; infinite bounds give
/// the classic LASSO.
struct BoxLassoEstimator {
  double lambda = 0.0;
  double lower = 0.0;
  double upper = 1.0;

  static BoxLassoEstimator classic(double lambda) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {lambda, inf, inf};
  }
};

/// argmin over S_0 of (1/tau)|y - v|^2 + a 1{v != 0}.
struct L0Estimator {
  double a = 0.0;
  Constellation constellation = Constellation::ssk();
};

/// Real interval [lo, hi]; either end may be infinite.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};
struct PointSet {
  std::vector<cplx> points;
};
using ScalarDomain = std::variant<Interval, PointSet>;

/// Any regularizer, minimized numerically (grid plus golden-section refinement
/// on intervals, enumeration on point sets).
struct NumericEstimator {
  std::function<double(cplx)> regularizer;
  ScalarDomain domain = Interval{};
};

using ScalarEstimatorSpec = std::variant<BoxLassoEstimator, L0Estimator, NumericEstimator>;

/// sqrt(P) sign(x) 1{|x| > eps}.
struct SignThreshold {
  double epsilon = 0.5;
};
using ScalarDecision = std::variant<HardThreshold, SignThreshold, IdentityDecision>;

/// Identity for discrete estimators, sqrt(P)/2 hard threshold for SSK and a
/// sqrt(P)/2 sign threshold otherwise.
ScalarDecision default_decision(const ScalarEstimatorSpec& spec, const DecoupledInput& input);

cplx apply_scalar_decision(const ScalarDecision& decision, cplx soft, double power);

/// tau = 1/R(-c), theta = tau sqrt(d/dc[(sigma2 c - q) R(-c)]).
DecoupledState tau_theta(const SpectralModel& spectral, double c, double q, double sigma2);

/// Decoupled scalar RLS estimate for observation y.
cplx scalar_rls(const ScalarEstimatorSpec& spec, cplx y, double tau);

struct QuadratureOptions {
  int nodes = 64;
  int max_nodes = 512;
  // Kinked estimators converge only O(1/n) in the node count.
  double tol = 1e-4;
  bool adaptive = true;
};

struct Functionals {
  double c_corr = 0.0;     // E[Re((x* - x) z*)]
  double e_mse = 0.0;      // E[|x* - x|^2]
  double error_rate = 0.0; // 1 - P_C under the decision rule
  double p_correct = 0.0;
  std::vector<double> weights;        // law of x over S_0, zero first
  std::vector<double> correct_given;  // G_s, same order as weights
  int quadrature_nodes = 0;           // 0 for closed forms
};

Functionals functionals(const ScalarEstimatorSpec& spec, const DecoupledState& state,
                        const DecoupledInput& input, const ScalarDecision& decision,
                        const QuadratureOptions& quad = {});

struct FixedPointOptions {
  double damping = 0.5;
  std::optional<double> c0;  // defaults to sigma2
  std::optional<double> q0;  // defaults to eta P
  double tol = 1e-10;
  int max_iter = 10000;
  QuadratureOptions quad = {};
};

struct FixedPointResult {
  double c_star = 0.0;
  double q_star = 0.0;
  double residual_c = 0.0;  // |c theta - tau C|
  double residual_q = 0.0;  // |q - E|
  int iterations = 0;
  bool converged = false;
  DecoupledState state;
  Functionals at_solution;

  double residual() const { return std::max(residual_c, residual_q); }
  double mse() const { return at_solution.e_mse; }
  double error_rate() const { return at_solution.error_rate; }
};

/// Damped iteration on the pair of replica-symmetric fixed-point equations.
FixedPointResult solve_fixed_point(const ScalarEstimatorSpec& spec, const SpectralModel& spectral,
                                   double sigma2, const DecoupledInput& input,
                                   const ScalarDecision& decision,
                                   const FixedPointOptions& opts = {});

double metric_value(const FixedPointResult& r, Metric metric);

using EstimatorFamily = std::function<ScalarEstimatorSpec(double lambda)>;

EstimatorFamily box_lasso_family(double lower, double upper);
EstimatorFamily classic_lasso_family();

struct TuneOptions {
  std::vector<double> grid;  // empty: default_lambda_grid()
  bool refine = true;
  double refine_tol = 1e-5;
  FixedPointOptions fixed_point = {};
};

std::vector<double> default_lambda_grid();

struct TunePoint {
  double lambda = 0.0;
  double value = 0.0;
  bool converged = false;
};

struct TuneResult {
  double lambda_star = 0.0;
  double metric_star = 0.0;
  FixedPointResult at_optimum;
  std::vector<TunePoint> evaluated;
};

/// Grid search of the asymptotic metric over lambda, then golden-section
/// refinement around the best grid point.
TuneResult tune(const EstimatorFamily& family, const SpectralModel& spectral, double sigma2,
                const DecoupledInput& input, Metric metric,
                const std::optional<ScalarDecision>& decision = std::nullopt,
                const TuneOptions& opts = {});

struct DictionaryRow {
  double snr_db = 0.0;
  double lambda = 0.0;
  double c_star = 0.0;
  double q_star = 0.0;
  double residual = 0.0;
  double mse = 0.0;
  double error_rate = 0.0;
  bool converged = false;
};

/// One tune() per SNR point, sigma2 = P 10^(-snr/10). Failed rows hold NaN.
std::vector<DictionaryRow> tuning_dictionary(const EstimatorFamily& family,
                                             const SpectralModel& spectral,
                                             const DecoupledInput& input,
                                             const std::vector<double>& snr_db, Metric metric,
                                             const std::optional<ScalarDecision>& decision =
                                                 std::nullopt,
                                             const TuneOptions& opts = {});

/// Columns snr_db,lambda,c_star,q_star,residual,mse,error_rate,converged.
void write_dictionary_csv(std::ostream& os, const std::vector<DictionaryRow>& rows);

/// Gauss-Hermite rule for weight exp(-t^2).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite(int n);

}  // namespace masm
