#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "masm/channel.hpp"
#include "masm/codec.hpp"
#include "masm/detect.hpp"
#include "masm/replica.hpp"

namespace masm {

/// Detector selection as it appears in config files and on the command line.
struct DetectorSettings {
  std::string kind = "box";  // box | classic | map | exact
  double lambda = 0.1;
  double lower = 0.0;
  double upper = 1.0;
  double epsilon = -1.0;  // negative: sqrt(P) / 2
  Metric metric = Metric::kErrorRate;
};

struct RunConfig {
  ExperimentConfig experiment;
  DetectorSettings detector;
  int threads = 0;  // 0: hardware concurrency
};

/// INI-style file with [system], [channel], [detector] and [experiment]
/// sections. Unknown keys are rejected.
RunConfig load_config(const std::string& path);
RunConfig parse_config(std::istream& is);
/// Applies one "section.key=value" or "key=value" override.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

SmCodebook make_codebook(const ExperimentConfig& cfg);
RlsSpec make_detector(const DetectorSettings& d, const ExperimentConfig& cfg);

struct McOptions {
  int threads = 0;
  bool keep_values = true;
  ProxGradOptions prox = {};
};

struct AggregateResult {
  std::string metric;
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;         // trials that entered the mean
  int failed = 0;         // solver threw; excluded
  int not_converged = 0;  // iteration cap reached; still included
  std::vector<double> values;

  double mean_db() const;
};

/// Per-trial seed, independent of scheduling.
std::uint64_t trial_seed(std::uint64_t master, int trial);

struct TrialOutcome {
  double value = 0.0;
  bool converged = true;
};

/// One realization: random payloads for all users, encoding, Rayleigh channel,
/// AWGN, detection and distortion. MSE is measured on the soft estimate, the
/// error rate after the decision rule.
TrialOutcome run_trial(const ExperimentConfig& cfg, const SmCodebook& codebook,
                       const RlsSpec& detector, Metric metric, std::uint64_t seed,
                       const ProxGradOptions& prox = {});

AggregateResult run_monte_carlo(const ExperimentConfig& cfg, const RlsSpec& detector,
                                Metric metric, int trials, const McOptions& opts = {});

/// A regularizer family known to both the replica analysis and the simulator.
struct DetectorFamily {
  std::string name;
  EstimatorFamily replica;
  std::function<RlsSpec(double lambda)> detector;
};

DetectorFamily box_lasso_detector(const ExperimentConfig& cfg, double lower, double upper,
                                  double epsilon = -1.0);
DetectorFamily classic_lasso_detector(const ExperimentConfig& cfg, double epsilon = -1.0);

/// Replica analysis matching `cfg` (Rayleigh channel, xi = M / N).
DecoupledInput decoupled_input(const ExperimentConfig& cfg);
ScalarDecision replica_decision(const ExperimentConfig& cfg, double epsilon = -1.0);

struct CompareRow {
  double lambda = 0.0;
  double replica = 0.0;
  bool replica_converged = false;
  double mc_mean = 0.0;
  double mc_std_error = 0.0;
  int mc_trials = 0;
};

struct Comparison {
  Metric metric = Metric::kMse;
  std::vector<CompareRow> rows;
  double max_abs_dev_db = 0.0;  // MSE only; NaN for the error rate
};

Comparison compare_replica_mc(const ExperimentConfig& cfg, const DetectorFamily& family,
                              const std::vector<double>& lambdas, Metric metric,
                              const McOptions& opts = {});

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Header row, then one line per row with 17 significant digits.
void write_csv(std::ostream& os, const Table& table);

struct FigureOptions {
  int trials = 1000;
  int draws = 100000;
  bool with_mc = true;
  int threads = 0;
  std::uint64_t seed = 1;
  std::vector<double> snr_db;   // empty: 5..13 dB in 1 dB steps
  std::vector<double> lambdas;  // empty: figure default
};

/// Built-in configurations of the reproduced figures.
ExperimentConfig prior_config();     // K=10, M_u=16, L_u=2, BPSK
ExperimentConfig lasso_config();     // K=10, M_u=8, L_u=1, N=160, SSK, 11 dB
ExperimentConfig map_bound_config(); // M_u=8, L_u=1, alpha=1/4, xi=2

/// Seed of the random prior codebook (see README).
inline constexpr std::uint64_t kPriorCodebookSeed = 0;
/// 1-based transmit entry plotted by fig-prior.
inline constexpr int kPriorEntry = 80;

/// value, empirical, reference.
Table fig_prior(const FigureOptions& opts);
/// lambda, mse, mse_db, std_error (classic LASSO, Monte Carlo).
Table fig_mse(const FigureOptions& opts);
/// lambda, {box,classic}_{replica,mc}_{mse_db,error}.
Table fig_error_sweep(const FigureOptions& opts);
/// snr_db, box_lambda, box_error, classic_lambda, classic_error, map_error,
/// box_mc_error, classic_mc_error.
Table fig_tuned_error(const FigureOptions& opts);
/// snr_db, box_lambda, classic_lambda, box_mse_lambda, classic_mse_lambda.
Table fig_lambda_dict(const FigureOptions& opts);
/// snr_db, ssk, bpsk, qam4 (replica only).
Table fig_map_bound(const FigureOptions& opts);

/// Figure name without the "fig-" prefix to its generator.
const std::map<std::string, std::function<Table(const FigureOptions&)>>& figures();

struct RunManifest {
  RunConfig config;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> trial_seeds;
  std::string tool_version;
  std::vector<std::string> outputs;
};

std::string tool_version();

/// JSON summary with the manifest embedded under "manifest".
std::string summary_json(const RunManifest& manifest,
                         const std::map<std::string, double>& numbers,
                         const std::map<std::string, std::string>& labels = {});

}  // namespace masm
