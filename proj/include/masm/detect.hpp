#pragma once

#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "masm/codec.hpp"

namespace masm {

/// Real interval [-lower, upper] with lower, upper >= 0.
struct Box {
  double lower = 0.0;
  double upper = 1.0;
};
struct FullReal {};
struct FullComplex {};
/// Finite search alphabet, S_0 = {0} u S per entry.
struct Discrete {
  Constellation constellation;
};
/// Concatenations of valid codewords of K users sharing one codebook.
struct CodebookSet {
  SmCodebook codebook;
  Constellation constellation;
  int users = 1;
};
using FeasibleSet = std::variant<Box, FullReal, FullComplex, Discrete, CodebookSet>;

struct L1 {
  double lambda = 0.0;
};
/// a ||v||_0. `b` is the additive constant of the postulated prior; it never
/// changes the minimizer and is carried for reporting only.
struct L0 {
  double a = 0.0;
  double b = 0.0;
};
struct NoRegularizer {};
using Regularizer = std::variant<L1, L0, NoRegularizer>;

/// sqrt(P) 1{x >= eps}.
struct HardThreshold {
  double epsilon = 0.5;
};
/// Keep the `keep` largest magnitudes, map them to sqrt(P) sign(x).
struct SignWithSparsity {
  int keep = 1;
};
struct IdentityDecision {};
using Decision = std::variant<HardThreshold, SignWithSparsity, IdentityDecision>;

struct RlsSpec {
  FeasibleSet feasible = FullReal{};
  Regularizer regularizer = L1{};
  Decision decision = HardThreshold{};

  void validate() const;
};

/// Mismatched-MAP weight sigma^2 [S ln 2 + ln(1 - eta) - ln eta].
double l0_weight(double sigma2, double eta, int bits_per_symbol);
/// Dropped constant -sigma^2 ln(1 - eta).
double l0_offset(double sigma2, double eta);

struct SoftEstimate {
  Eigen::VectorXd values;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
};

struct ProxGradOptions {
  double tol = 1e-8;
  int max_iter = 50000;
};

/// clip(soft_threshold(w, kappa), -lower, upper).
double prox_box_soft_threshold(double w, double kappa, double lower, double upper);

/// Real-valued minimizer of ||y - H v||^2 + lambda ||v||_1 over Box or FullReal
/// by proximal gradient with a power-iteration step size.
SoftEstimate solve_box_lasso(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                             const Eigen::Ref<const Eigen::VectorXcd>& y, double lambda,
                             const FeasibleSet& feasible, const ProxGradOptions& opts = {});

/// Objective ||y - H v||^2 + lambda ||v||_1 for real v.
double lasso_objective(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                       const Eigen::Ref<const Eigen::VectorXcd>& y,
                       const Eigen::Ref<const Eigen::VectorXd>& v, double lambda);

struct IidMismatched {};
struct CodebookExact {
  SmCodebook codebook;
  int users = 1;
};
using L0Mode = std::variant<IidMismatched, CodebookExact>;

inline constexpr double kMaxSearchSpace = 16777216.0;  // 2^24

/// Global minimizer by enumeration. IidMismatched minimizes
/// ||y - Hv||^2 + a ||v||_0 over S_0^M; CodebookExact minimizes ||y - Hv||^2 over
/// valid codeword concatenations. Ties keep the first candidate in
/// lexicographic order.
Eigen::VectorXcd solve_l0_exhaustive(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                                     const Eigen::Ref<const Eigen::VectorXcd>& y, double a,
                                     const Constellation& constellation, const L0Mode& mode);

/// Maps a soft estimate to S_0^M.
Eigen::VectorXcd apply_decision(const Eigen::Ref<const Eigen::VectorXcd>& soft,
                                const Decision& decision, double power);
Eigen::VectorXcd apply_decision(const SoftEstimate& soft, const RlsSpec& spec, double power);

enum class Metric { kErrorRate, kMse };

Metric parse_metric(const std::string& name);
const char* to_string(Metric m);

/// Per-entry symbol error rate or mean squared error.
double distortion(const Eigen::Ref<const Eigen::VectorXcd>& estimate,
                  const Eigen::Ref<const Eigen::VectorXcd>& truth, Metric metric);

}  // namespace masm
