#include "masm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "masm/error.hpp"

#ifndef MASM_VERSION
#define MASM_VERSION "0.0.0"
#endif

namespace masm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double to_db(double v) { return 10.0 * std::log10(v); }

double resolved_epsilon(double epsilon, double power) {
  return epsilon < 0.0 ? std::sqrt(power) / 2.0 : epsilon;
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (is.fail() || !(is >> std::ws).eof())
    throw InvalidArgument("cannot parse value '" + text + "' for key " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidArgument("cannot parse boolean '" + text + "' for key " + key);
}

int worker_count(int requested, int jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(1, jobs));
}

// Runs body(i) for i in [0, jobs) on a small pool. The first exception is
// rethrown after all workers have joined.
template <class F>
void parallel_for(int jobs, int threads, F&& body) {
  const int workers = worker_count(threads, jobs);
  if (workers == 1) {
    for (int i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> default_snr_grid() {
  std::vector<double> g;
  for (int db = 5; db <= 13; ++db) g.push_back(db);
  return g;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto dot = key.find('.');
  const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
  auto& e = cfg.experiment;
  auto& d = cfg.detector;
  if (name == "users") e.users = parse_value<int>(key, value);
  else if (name == "antennas") e.antennas = parse_value<int>(key, value);
  else if (name == "active") e.active = parse_value<int>(key, value);
  else if (name == "receive") e.receive = parse_value<int>(key, value);
  else if (name == "constellation") e.constellation = value;
  else if (name == "power") e.power = parse_value<double>(key, value);
  else if (name == "random_codebook") e.random_codebook = parse_bool(key, value);
  else if (name == "codebook_seed") e.codebook_seed = parse_value<std::uint64_t>(key, value);
  else if (name == "sigma2") e.sigma2 = parse_value<double>(key, value);
  else if (name == "snr_db") e.set_snr_db(parse_value<double>(key, value));
  else if (name == "trials") e.trials = parse_value<int>(key, value);
  else if (name == "seed") e.seed = parse_value<std::uint64_t>(key, value);
  else if (name == "threads") cfg.threads = parse_value<int>(key, value);
  else if (name == "kind") d.kind = value;
  else if (name == "lambda") d.lambda = parse_value<double>(key, value);
  else if (name == "lower") d.lower = parse_value<double>(key, value);
  else if (name == "upper") d.upper = parse_value<double>(key, value);
  else if (name == "epsilon") d.epsilon = parse_value<double>(key, value);
  else if (name == "metric") d.metric = parse_metric(value);
  else throw InvalidArgument("unknown configuration key: " + key);
}

RunConfig parse_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  RunConfig cfg;
  // snr_db depends on power, so it is applied last.
  std::string snr;
  for (const auto& [section, body] : tree) {
    if (section != "system" && section != "channel" && section != "detector" &&
        section != "experiment")
      throw InvalidArgument("unknown config section: " + section);
    for (const auto& [key, node] : body) {
      if (key == "snr_db")
        snr = node.data();
      else
        apply_override(cfg, section + "." + key, node.data());
    }
  }
  if (!snr.empty()) apply_override(cfg, "channel.snr_db", snr);
  cfg.experiment.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  return parse_config(in);
}

SmCodebook make_codebook(const ExperimentConfig& cfg) {
  if (cfg.random_codebook)
    return build_codebook(cfg.antennas, cfg.active, SeededRandom{cfg.codebook_seed});
  return build_codebook(cfg.antennas, cfg.active);
}

RlsSpec make_detector(const DetectorSettings& d, const ExperimentConfig& cfg) {
  const Constellation c = Constellation::preset(cfg.constellation, cfg.power);
  const double eps = resolved_epsilon(d.epsilon, cfg.power);
  // SSK decides on/off per entry; signed alphabets keep the L largest entries.
  const Decision soft_decision =
      c.size() == 1 ? Decision{HardThreshold{eps}} : Decision{SignWithSparsity{cfg.total_active()}};
  RlsSpec spec;
  if (d.kind == "box") {
    spec = {Box{d.lower, d.upper}, L1{d.lambda}, soft_decision};
  } else if (d.kind == "classic") {
    spec = {FullReal{}, L1{d.lambda}, soft_decision};
  } else if (d.kind == "map") {
    spec = {Discrete{c}, L0{l0_weight(cfg.sigma2, cfg.eta(), c.bits_per_symbol),
                            l0_offset(cfg.sigma2, cfg.eta())},
            IdentityDecision{}};
  } else if (d.kind == "exact") {
    spec = {CodebookSet{make_codebook(cfg), c, cfg.users}, NoRegularizer{}, IdentityDecision{}};
  } else {
    throw InvalidArgument("unknown detector kind: " + d.kind);
  }
  spec.validate();
  return spec;
}

double AggregateResult::mean_db() const { return to_db(mean); }

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(trial));
}

TrialOutcome run_trial(const ExperimentConfig& cfg, const SmCodebook& codebook,
                       const RlsSpec& detector, Metric metric, std::uint64_t seed,
                       const ProxGradOptions& prox) {
  const Constellation c = Constellation::preset(cfg.constellation, cfg.power);
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  Bits payload(static_cast<std::size_t>(cfg.users * codebook.payload_bits(c)));
  for (auto& b : payload) b = coin(rng) ? 1 : 0;
  const Eigen::VectorXcd x = encode_users(codebook, c, payload, cfg.users);
  const ChannelRealization ch = sample_rayleigh(cfg.receive, cfg.total_antennas(), rng);
  const Eigen::VectorXcd y = add_awgn(ch.h * x, cfg.sigma2, rng);

  TrialOutcome out;
  Eigen::VectorXcd soft;
  if (const auto* l1 = std::get_if<L1>(&detector.regularizer)) {
    const SoftEstimate est = solve_box_lasso(ch.h, y, l1->lambda, detector.feasible, prox);
    out.converged = est.converged;
    soft = est.values.cast<cplx>();
  } else if (const auto* l0 = std::get_if<L0>(&detector.regularizer)) {
    const auto* d = std::get_if<Discrete>(&detector.feasible);
    if (!d) throw InvalidArgument("l0 detection requires a discrete feasible set");
    soft = solve_l0_exhaustive(ch.h, y, l0->a, d->constellation, IidMismatched{});
  } else {
    const auto* set = std::get_if<CodebookSet>(&detector.feasible);
    if (!set) throw InvalidArgument("unregularized detection requires the codebook set");
    soft = solve_l0_exhaustive(ch.h, y, 0.0, set->constellation,
                               CodebookExact{set->codebook, set->users});
  }
  const Eigen::VectorXcd est =
      metric == Metric::kMse ? soft : apply_decision(soft, detector.decision, cfg.power);
  out.value = distortion(est, x, metric);
  return out;
}

AggregateResult run_monte_carlo(const ExperimentConfig& cfg, const RlsSpec& detector,
                                Metric metric, int trials, const McOptions& opts) {
  cfg.validate();
  detector.validate();
  if (trials < 1) throw InvalidArgument("trial count must be positive");
  const SmCodebook codebook = make_codebook(cfg);

  enum class Status { kOk, kNotConverged, kFailed };
  std::vector<double> values(static_cast<std::size_t>(trials), 0.0);
  std::vector<Status> status(static_cast<std::size_t>(trials), Status::kOk);
  parallel_for(trials, opts.threads, [&](int t) {
    const auto k = static_cast<std::size_t>(t);
    try {
      const TrialOutcome o =
          run_trial(cfg, codebook, detector, metric, trial_seed(cfg.seed, t), opts.prox);
      values[k] = o.value;
      status[k] = o.converged ? Status::kOk : Status::kNotConverged;
    } catch (const ConvergenceError&) {
      status[k] = Status::kFailed;
    }
  });

  AggregateResult agg;
  agg.metric = to_string(metric);
  std::vector<double> kept;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (status[k] == Status::kFailed) {
      ++agg.failed;
      continue;
    }
    if (status[k] == Status::kNotConverged) ++agg.not_converged;
    kept.push_back(values[k]);
  }
  agg.trials = static_cast<int>(kept.size());
  if (kept.empty()) throw ConvergenceError("every Monte Carlo trial failed");
  double sum = 0.0;
  for (double v : kept) sum += v;
  agg.mean = sum / static_cast<double>(kept.size());
  double ss = 0.0;
  for (double v : kept) ss += (v - agg.mean) * (v - agg.mean);
  const double n = static_cast<double>(kept.size());
  agg.std_error = kept.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  if (opts.keep_values) agg.values = std::move(kept);
  return agg;
}

DecoupledInput decoupled_input(const ExperimentConfig& cfg) {
  return {cfg.eta(), Constellation::preset(cfg.constellation, cfg.power)};
}

ScalarDecision replica_decision(const ExperimentConfig& cfg, double epsilon) {
  const Constellation c = Constellation::preset(cfg.constellation, cfg.power);
  const double eps = resolved_epsilon(epsilon, cfg.power);
  if (c.size() == 1) return HardThreshold{eps};
  return SignThreshold{eps};
}

DetectorFamily box_lasso_detector(const ExperimentConfig& cfg, double lower, double upper,
                                  double epsilon) {
  DetectorFamily f;
  f.name = "box";
  f.replica = box_lasso_family(lower, upper);
  f.detector = [cfg, lower, upper, epsilon](double lambda) {
    return make_detector({"box", lambda, lower, upper, epsilon, Metric::kErrorRate}, cfg);
  };
  return f;
}

DetectorFamily classic_lasso_detector(const ExperimentConfig& cfg, double epsilon) {
  DetectorFamily f;
  f.name = "classic";
  f.replica = classic_lasso_family();
  f.detector = [cfg, epsilon](double lambda) {
    return make_detector({"classic", lambda, 0.0, 0.0, epsilon, Metric::kErrorRate}, cfg);
  };
  return f;
}

Comparison compare_replica_mc(const ExperimentConfig& cfg, const DetectorFamily& family,
                              const std::vector<double>& lambdas, Metric metric,
                              const McOptions& opts) {
  if (lambdas.empty()) throw InvalidArgument("lambda grid must not be empty");
  cfg.validate();
  const SpectralModel spectral = rayleigh_r_transform(cfg.xi());
  const DecoupledInput input = decoupled_input(cfg);
  const ScalarDecision decision = replica_decision(cfg);
  Comparison out;
  out.metric = metric;
  out.max_abs_dev_db = metric == Metric::kMse ? 0.0 : kNaN;
  for (double lambda : lambdas) {
    CompareRow row;
    row.lambda = lambda;
    const FixedPointResult fp =
        solve_fixed_point(family.replica(lambda), spectral, cfg.sigma2, input, decision);
    row.replica = metric_value(fp, metric);
    row.replica_converged = fp.converged;
    const AggregateResult mc =
        run_monte_carlo(cfg, family.detector(lambda), metric, cfg.trials, opts);
    row.mc_mean = mc.mean;
    row.mc_std_error = mc.std_error;
    row.mc_trials = mc.trials;
    if (metric == Metric::kMse)
      out.max_abs_dev_db = std::max(out.max_abs_dev_db, std::abs(to_db(row.replica) - to_db(mc.mean)));
    out.rows.push_back(row);
  }
  return out;
}

void write_csv(std::ostream& os, const Table& table) {
  for (std::size_t k = 0; k < table.columns.size(); ++k) os << (k ? "," : "") << table.columns[k];
  os << '\n';
  std::ostringstream cell;
  cell.imbue(std::locale::classic());
  cell << std::setprecision(17);
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      cell.str("");
      cell << row[k];
      os << (k ? "," : "") << cell.str();
    }
    os << '\n';
  }
}

ExperimentConfig prior_config() {
  ExperimentConfig c;
  c.users = 10;
  c.antennas = 16;
  c.active = 2;
  c.receive = 160;
  c.constellation = "bpsk";
  c.random_codebook = true;
  c.codebook_seed = kPriorCodebookSeed;
  return c;
}

ExperimentConfig lasso_config() {
  ExperimentConfig c;
  c.users = 10;
  c.antennas = 8;
  c.active = 1;
  c.receive = 160;
  c.constellation = "ssk";
  c.power = 1.0;
  c.set_snr_db(11.0);
  return c;
}

ExperimentConfig map_bound_config() {
  ExperimentConfig c;
  c.users = 10;
  c.antennas = 8;
  c.active = 1;
  c.receive = 40;
  c.constellation = "ssk";
  return c;
}

Table fig_prior(const FigureOptions& opts) {
  const ExperimentConfig cfg = prior_config();
  const SmCodebook cb = make_codebook(cfg);
  const Constellation c = Constellation::preset(cfg.constellation, cfg.power);
  const EmpiricalStats st =
      empirical_stats(cb, c, cfg.users, kPriorEntry - 1, opts.draws, opts.seed);
  Table t{{"value", "empirical", "reference"}, {}};
  for (std::size_t k = 0; k < st.marginal.size(); ++k)
    t.rows.push_back({st.marginal[k].value.real(), st.marginal[k].probability,
                      st.reference[k].probability});
  std::sort(t.rows.begin(), t.rows.end());
  return t;
}

Table fig_mse(const FigureOptions& opts) {
  ExperimentConfig cfg = lasso_config();
  cfg.seed = opts.seed;
  std::vector<double> grid = opts.lambdas;
  if (grid.empty())
    for (int i = 1; i <= 15; ++i) grid.push_back(0.04 * i + 0.02);
  Table t{{"lambda", "mse", "mse_db", "std_error"}, {}};
  for (double lambda : grid) {
    const RlsSpec det =
        make_detector({"classic", lambda, 0.0, 0.0, -1.0, Metric::kMse}, cfg);
    const AggregateResult r =
        run_monte_carlo(cfg, det, Metric::kMse, opts.trials, {opts.threads, false, {}});
    t.rows.push_back({lambda, r.mean, r.mean_db(), r.std_error});
  }
  return t;
}

Table fig_error_sweep(const FigureOptions& opts) {
  ExperimentConfig cfg = lasso_config();
  cfg.seed = opts.seed;
  cfg.trials = opts.trials;
  std::vector<double> grid = opts.lambdas;
  if (grid.empty())
    for (int i = 1; i <= 12; ++i) grid.push_back(0.05 * i);
  const SpectralModel spectral = rayleigh_r_transform(cfg.xi());
  const DecoupledInput input = decoupled_input(cfg);
  const ScalarDecision decision = replica_decision(cfg);
  const DetectorFamily families[] = {box_lasso_detector(cfg, 0.0, 1.0),
                                     classic_lasso_detector(cfg)};
  Table t{{"lambda", "box_replica_mse_db", "box_replica_error", "classic_replica_mse_db",
           "classic_replica_error", "box_mc_mse_db", "box_mc_error", "classic_mc_mse_db",
           "classic_mc_error"},
          {}};
  for (double lambda : grid) {
    std::vector<double> row{lambda};
    std::vector<double> mc;
    for (const auto& f : families) {
      const FixedPointResult fp =
          solve_fixed_point(f.replica(lambda), spectral, cfg.sigma2, input, decision);
      row.push_back(to_db(fp.mse()));
      row.push_back(fp.error_rate());
      if (opts.with_mc) {
        const McOptions mo{opts.threads, false, {}};
        mc.push_back(
            run_monte_carlo(cfg, f.detector(lambda), Metric::kMse, opts.trials, mo).mean_db());
        mc.push_back(
            run_monte_carlo(cfg, f.detector(lambda), Metric::kErrorRate, opts.trials, mo).mean);
      } else {
        mc.insert(mc.end(), {kNaN, kNaN});
      }
    }
    row.insert(row.end(), mc.begin(), mc.end());
    t.rows.push_back(row);
  }
  return t;
}

Table fig_tuned_error(const FigureOptions& opts) {
  ExperimentConfig cfg = lasso_config();
  cfg.seed = opts.seed;
  const std::vector<double> snrs = opts.snr_db.empty() ? default_snr_grid() : opts.snr_db;
  const SpectralModel spectral = rayleigh_r_transform(cfg.xi());
  const DecoupledInput input = decoupled_input(cfg);
  const Constellation c = input.constellation;
  Table t{{"snr_db", "box_lambda", "box_error", "classic_lambda", "classic_error", "map_error",
           "box_mc_error", "classic_mc_error"},
          {}};
  for (double snr : snrs) {
    cfg.set_snr_db(snr);
    const ScalarDecision decision = replica_decision(cfg);
    const TuneResult box = tune(box_lasso_family(0.0, 1.0), spectral, cfg.sigma2, input,
                                Metric::kErrorRate, decision);
    const TuneResult classic = tune(classic_lasso_family(), spectral, cfg.sigma2, input,
                                    Metric::kErrorRate, decision);
    const FixedPointResult map = solve_fixed_point(
        L0Estimator{l0_weight(cfg.sigma2, cfg.eta(), c.bits_per_symbol), c}, spectral,
        cfg.sigma2, input, IdentityDecision{});
    double box_mc = kNaN;
    double classic_mc = kNaN;
    if (opts.with_mc) {
      const McOptions mo{opts.threads, false, {}};
      box_mc = run_monte_carlo(cfg, box_lasso_detector(cfg, 0.0, 1.0).detector(box.lambda_star),
                               Metric::kErrorRate, opts.trials, mo)
                   .mean;
      classic_mc = run_monte_carlo(cfg, classic_lasso_detector(cfg).detector(classic.lambda_star),
                                   Metric::kErrorRate, opts.trials, mo)
                       .mean;
    }
    t.rows.push_back({snr, box.lambda_star, box.metric_star, classic.lambda_star,
                      classic.metric_star, map.converged ? map.error_rate() : kNaN, box_mc,
                      classic_mc});
  }
  return t;
}

Table fig_lambda_dict(const FigureOptions& opts) {
  const ExperimentConfig cfg = lasso_config();
  const std::vector<double> snrs = opts.snr_db.empty() ? default_snr_grid() : opts.snr_db;
  const SpectralModel spectral = rayleigh_r_transform(cfg.xi());
  const DecoupledInput input = decoupled_input(cfg);
  const ScalarDecision decision = replica_decision(cfg);
  const auto box_err = tuning_dictionary(box_lasso_family(0.0, 1.0), spectral, input, snrs,
                                         Metric::kErrorRate, decision);
  const auto classic_err = tuning_dictionary(classic_lasso_family(), spectral, input, snrs,
                                             Metric::kErrorRate, decision);
  const auto box_mse = tuning_dictionary(box_lasso_family(0.0, 1.0), spectral, input, snrs,
                                         Metric::kMse, decision);
  const auto classic_mse = tuning_dictionary(classic_lasso_family(), spectral, input, snrs,
                                             Metric::kMse, decision);
  Table t{{"snr_db", "box_lambda", "classic_lambda", "box_mse_lambda", "classic_mse_lambda"}, {}};
  for (std::size_t k = 0; k < snrs.size(); ++k)
    t.rows.push_back({snrs[k], box_err[k].lambda, classic_err[k].lambda, box_mse[k].lambda,
                      classic_mse[k].lambda});
  return t;
}

Table fig_map_bound(const FigureOptions& opts) {
  const ExperimentConfig base = map_bound_config();
  const std::vector<double> snrs = opts.snr_db.empty() ? default_snr_grid() : opts.snr_db;
  const SpectralModel spectral = rayleigh_r_transform(base.xi());
  const std::vector<std::string> names{"ssk", "bpsk", "qam4"};
  Table t{{"snr_db", "ssk", "bpsk", "qam4"}, {}};
  for (double snr : snrs) t.rows.push_back({snr});
  for (const auto& name : names) {
    const Constellation c = Constellation::preset(name, base.power);
    const DecoupledInput input{base.eta(), c};
    for (std::size_t k = 0; k < snrs.size(); ++k) {
      const double sigma2 = base.power * std::pow(10.0, -snrs[k] / 10.0);
      const FixedPointResult r =
          solve_fixed_point(L0Estimator{l0_weight(sigma2, base.eta(), c.bits_per_symbol), c},
                            spectral, sigma2, input, IdentityDecision{});
      t.rows[k].push_back(r.converged ? r.error_rate() : kNaN);
    }
  }
  return t;
}

const std::map<std::string, std::function<Table(const FigureOptions&)>>& figures() {
  static const std::map<std::string, std::function<Table(const FigureOptions&)>> table{
      {"prior", fig_prior},
      {"mse", fig_mse},
      {"error-sweep", fig_error_sweep},
      {"tuned-error", fig_tuned_error},
      {"lambda-dict", fig_lambda_dict},
      {"map-bound", fig_map_bound},
  };
  return table;
}

std::string tool_version() { return MASM_VERSION; }

std::string summary_json(const RunManifest& manifest,
                         const std::map<std::string, double>& numbers,
                         const std::map<std::string, std::string>& labels) {
  using nlohmann::json;
  const auto& e = manifest.config.experiment;
  const auto& d = manifest.config.detector;
  json cfg = {
      {"system",
       {{"users", e.users},
        {"antennas", e.antennas},
        {"active", e.active},
        {"receive", e.receive},
        {"constellation", e.constellation},
        {"power", e.power},
        {"random_codebook", e.random_codebook},
        {"codebook_seed", e.codebook_seed}}},
      {"channel", {{"sigma2", e.sigma2}, {"snr_db", e.snr_db()}}},
      {"detector",
       {{"kind", d.kind},
        {"lambda", d.lambda},
        {"lower", d.lower},
        {"upper", d.upper},
        {"epsilon", resolved_epsilon(d.epsilon, e.power)},
        {"metric", to_string(d.metric)}}},
      {"experiment", {{"trials", e.trials}, {"seed", e.seed}, {"threads", manifest.config.threads}}},
  };
  json out;
  out["manifest"] = {{"config", cfg},
                     {"master_seed", manifest.master_seed},
                     {"trial_seeds", manifest.trial_seeds},
                     {"tool_version", manifest.tool_version},
                     {"outputs", manifest.outputs}};
  json results = json::object();
  for (const auto& [k, v] : numbers) {
    if (std::isfinite(v))
      results[k] = v;
    else
      results[k] = nullptr;
  }
  for (const auto& [k, v] : labels) results[k] = v;
  out["results"] = results;
  return out.dump(2);
}

}  // namespace masm
