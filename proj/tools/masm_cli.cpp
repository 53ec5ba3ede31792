// Command-line front end: rate, encode, stats, simulate, replica, tune, dict,
// compare and the fig-* reproduction commands.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masm/error.hpp"
#include "masm/harness.hpp"

namespace {

using namespace masm;

constexpr int kExitInvalid = 1;
constexpr int kExitConvergence = 2;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string summary;
};

// Options shared by every experiment-style subcommand. Flags are recorded as
// overrides so they win over the config file regardless of order.
struct Shortcuts {
  std::vector<std::pair<std::string, std::string>> pairs;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { pairs.emplace_back(key, v); }, help);
  }
};

void add_common(CLI::App* app, Common& c, Shortcuts& s) {
  app->add_option("--config", c.config, "INI config with [system]/[channel]/[detector]/[experiment]");
  app->add_option("--set", c.sets, "Override, e.g. --set detector.lambda=0.2")->take_all();
  app->add_option("--out", c.out, "CSV output path (default: stdout)");
  app->add_option("--summary", c.summary, "JSON summary path");
  s.add(app, "--users", "users", "K");
  s.add(app, "--antennas", "antennas", "M_u");
  s.add(app, "--active", "active", "L_u");
  s.add(app, "--receive", "receive", "N");
  s.add(app, "--constellation", "constellation", "ssk | bpsk | qam4");
  s.add(app, "--power", "power", "symbol power P");
  s.add(app, "--snr-db", "snr_db", "10 log10(P / sigma^2)");
  s.add(app, "--sigma2", "sigma2", "noise variance");
  s.add(app, "--detector", "kind", "box | classic | map | exact");
  s.add(app, "--lambda", "lambda", "regularization parameter");
  s.add(app, "--lower", "lower", "box lower bound (feasible set is [-lower, upper])");
  s.add(app, "--upper", "upper", "box upper bound");
  s.add(app, "--epsilon", "epsilon", "decision threshold (default sqrt(P)/2)");
  s.add(app, "--metric", "metric", "error-rate | mse");
  s.add(app, "--trials", "trials", "Monte Carlo trials");
  s.add(app, "--seed", "seed", "master seed");
  s.add(app, "--threads", "threads", "worker threads (0: all cores)");
}

RunConfig resolve(const Common& c, const Shortcuts& s) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("override must be key=value: " + kv);
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  // snr_db is relative to the power, so apply it after everything else.
  for (const auto& [k, v] : s.pairs)
    if (k != "snr_db") apply_override(cfg, k, v);
  for (const auto& [k, v] : s.pairs)
    if (k == "snr_db") apply_override(cfg, k, v);
  cfg.experiment.validate();
  return cfg;
}

void emit_table(const Table& t, const std::string& path) {
  if (path.empty()) {
    write_csv(std::cout, t);
    return;
  }
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path);
  write_csv(os, t);
}

void emit_summary(const RunConfig& cfg, const Common& c, const std::map<std::string, double>& nums,
                  const std::map<std::string, std::string>& labels = {},
                  std::vector<std::uint64_t> seeds = {}) {
  RunManifest m{cfg, cfg.experiment.seed, std::move(seeds), tool_version(), {}};
  if (!c.out.empty()) m.outputs.push_back(c.out);
  if (!c.summary.empty()) m.outputs.push_back(c.summary);
  const std::string text = summary_json(m, nums, labels);
  if (c.summary.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream os(c.summary);
  if (!os) throw InvalidArgument("cannot write " + c.summary);
  os << text << '\n';
}

std::vector<double> parse_list(const std::string& text) {
  // "a,b,c" or "start:step:stop".
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, h = 0, b = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> a >> c1 >> h >> c2 >> b) || c1 != ':' || c2 != ':' || !(h > 0.0))
      throw InvalidArgument("range must be start:step:stop with step > 0");
    for (int i = 0; a + i * h <= b + 1e-9 * h; ++i) out.push_back(a + i * h);
  } else {
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ','))
      if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw InvalidArgument("empty list: " + text);
  return out;
}

ScalarEstimatorSpec replica_spec(const RunConfig& cfg) {
  const auto& d = cfg.detector;
  const auto& e = cfg.experiment;
  if (d.kind == "box") return BoxLassoEstimator{d.lambda, d.lower, d.upper};
  if (d.kind == "classic") return BoxLassoEstimator::classic(d.lambda);
  if (d.kind == "map") {
    const Constellation c = Constellation::preset(e.constellation, e.power);
    return L0Estimator{l0_weight(e.sigma2, e.eta(), c.bits_per_symbol), c};
  }
  throw InvalidArgument("no replica analysis for detector kind " + d.kind);
}

DetectorFamily family_for(const RunConfig& cfg) {
  const auto& d = cfg.detector;
  if (d.kind == "box") return box_lasso_detector(cfg.experiment, d.lower, d.upper, d.epsilon);
  if (d.kind == "classic") return classic_lasso_detector(cfg.experiment, d.epsilon);
  throw InvalidArgument("tuning needs a LASSO-type detector, got " + d.kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-active spatial modulation: codec, detectors, replica analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  // rate
  int mu = 8, lu = 1, bps = 0;
  auto* rate = app.add_subcommand("rate", "Per-antenna rate and its large-array bounds");
  rate->add_option("--mu", mu, "antennas per user")->required();
  rate->add_option("--lu", lu, "active antennas per user")->required();
  rate->add_option("--bits", bps, "bits per symbol S");

  // encode
  std::string bits, constellation = "ssk", codebook_file;
  auto* enc = app.add_subcommand("encode", "Map one user's payload to a transmit vector");
  enc->add_option("--mu", mu)->required();
  enc->add_option("--lu", lu)->required();
  enc->add_option("--constellation", constellation);
  enc->add_option("--payload", bits, "bit string, e.g. 0110")->required();
  enc->add_option("--codebook", codebook_file, "codebook file (default: lexicographic)");

  // experiment-style subcommands
  Common c_stats, c_sim, c_rep, c_tune, c_dict, c_cmp;
  Shortcuts s_stats, s_sim, s_rep, s_tune, s_dict, s_cmp;
  int entry = 1, draws = 100000;
  auto* stats = app.add_subcommand("stats", "Empirical marginal of one transmit entry");
  add_common(stats, c_stats, s_stats);
  stats->add_option("--entry", entry, "1-based entry of the concatenated vector");
  stats->add_option("--draws", draws, "number of random payloads");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo distortion of a detector");
  add_common(sim, c_sim, s_sim);

  auto* rep = app.add_subcommand("replica", "Replica fixed point for one detector");
  add_common(rep, c_rep, s_rep);

  std::string grid_text;
  auto* tun = app.add_subcommand("tune", "Asymptotically optimal lambda");
  add_common(tun, c_tune, s_tune);
  tun->add_option("--grid", grid_text, "lambda grid, list or start:step:stop");

  std::string snr_text = "5:1:13";
  auto* dict = app.add_subcommand("dict", "Tuning dictionary SNR -> lambda*");
  add_common(dict, c_dict, s_dict);
  dict->add_option("--snr-grid", snr_text, "SNR grid in dB");

  std::string cmp_grid = "0.05:0.05:0.6";
  auto* cmp = app.add_subcommand("compare", "Replica prediction against Monte Carlo");
  add_common(cmp, c_cmp, s_cmp);
  cmp->add_option("--grid", cmp_grid, "lambda grid");

  // fig-*
  FigureOptions fig_opts;
  std::string fig_out, fig_snr, fig_lambdas;
  bool no_mc = false;
  std::vector<std::pair<std::string, CLI::App*>> figs;
  for (const auto& [name, fn] : figures()) {
    auto* f = app.add_subcommand("fig-" + name, "Write the " + name + " figure data as CSV");
    f->add_option("--out", fig_out, "CSV path (default: stdout)");
    f->add_option("--trials", fig_opts.trials);
    f->add_option("--draws", fig_opts.draws);
    f->add_option("--seed", fig_opts.seed);
    f->add_option("--threads", fig_opts.threads);
    f->add_option("--snr-grid", fig_snr);
    f->add_option("--lambdas", fig_lambdas);
    f->add_flag("--no-mc", no_mc, "skip the Monte Carlo markers");
    figs.emplace_back(name, f);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*rate) {
      const RateBounds r = per_antenna_rate(mu, lu, bps);
      std::cout << std::setprecision(10) << "r_bar," << r.r_bar << "\nindex_bits," << r.index_bits
                << '\n';
      if (r.has_bounds)
        std::cout << "c," << r.c_const << "\nc_lower," << r.c_lower << "\nc_upper," << r.c_upper
                  << "\nstirling_lo," << r.stirling_lo << "\nstirling_hi," << r.stirling_hi
                  << '\n';
      return 0;
    }
    if (*enc) {
      SmCodebook cb;
      if (codebook_file.empty()) {
        cb = build_codebook(mu, lu);
      } else {
        std::ifstream in(codebook_file);
        if (!in) throw InvalidArgument("cannot open " + codebook_file);
        cb = read_codebook(in);
      }
      Bits payload;
      for (char ch : bits) {
        if (ch != '0' && ch != '1') throw InvalidArgument("payload must be a 0/1 string");
        payload.push_back(ch == '1');
      }
      const Eigen::VectorXcd x = encode(cb, Constellation::preset(constellation), payload);
      std::cout << "antenna,re,im\n";
      for (Eigen::Index i = 0; i < x.size(); ++i)
        std::cout << i + 1 << ',' << x[i].real() << ',' << x[i].imag() << '\n';
      return 0;
    }
    if (*stats) {
      const RunConfig cfg = resolve(c_stats, s_stats);
      const auto& e = cfg.experiment;
      const EmpiricalStats st =
          empirical_stats(make_codebook(e), Constellation::preset(e.constellation, e.power),
                          e.users, entry - 1, draws, e.seed);
      Table t{{"re", "im", "empirical", "reference"}, {}};
      for (std::size_t k = 0; k < st.marginal.size(); ++k)
        t.rows.push_back({st.marginal[k].value.real(), st.marginal[k].value.imag(),
                          st.marginal[k].probability, st.reference[k].probability});
      emit_table(t, c_stats.out);
      return 0;
    }
    if (*sim) {
      const RunConfig cfg = resolve(c_sim, s_sim);
      const auto& e = cfg.experiment;
      const RlsSpec det = make_detector(cfg.detector, e);
      const AggregateResult r =
          run_monte_carlo(e, det, cfg.detector.metric, e.trials, {cfg.threads, true, {}});
      if (!c_sim.out.empty()) {
        Table t{{"trial", "value"}, {}};
        for (std::size_t k = 0; k < r.values.size(); ++k)
          t.rows.push_back({static_cast<double>(k), r.values[k]});
        emit_table(t, c_sim.out);
      }
      std::vector<std::uint64_t> seeds;
      for (int t = 0; t < e.trials; ++t) seeds.push_back(trial_seed(e.seed, t));
      emit_summary(cfg, c_sim,
                   {{"mean", r.mean},
                    {"mean_db", r.mean_db()},
                    {"std_error", r.std_error},
                    {"trials", r.trials},
                    {"failed", r.failed},
                    {"not_converged", r.not_converged}},
                   {{"metric", r.metric}}, std::move(seeds));
      return 0;
    }
    if (*rep) {
      const RunConfig cfg = resolve(c_rep, s_rep);
      const auto& e = cfg.experiment;
      const ScalarEstimatorSpec spec = replica_spec(cfg);
      const ScalarDecision dec = cfg.detector.kind == "map"
                                     ? ScalarDecision{IdentityDecision{}}
                                     : replica_decision(e, cfg.detector.epsilon);
      const FixedPointResult r = solve_fixed_point(spec, rayleigh_r_transform(e.xi()), e.sigma2,
                                                   decoupled_input(e), dec);
      emit_summary(cfg, c_rep,
                   {{"c_star", r.c_star},
                    {"q_star", r.q_star},
                    {"tau", r.state.tau},
                    {"theta", r.state.theta},
                    {"residual_c", r.residual_c},
                    {"residual_q", r.residual_q},
                    {"iterations", r.iterations},
                    {"mse", r.mse()},
                    {"mse_db", 10.0 * std::log10(r.mse())},
                    {"error_rate", r.error_rate()},
                    {"converged", r.converged ? 1.0 : 0.0}});
      return r.converged ? 0 : kExitConvergence;
    }
    if (*tun) {
      const RunConfig cfg = resolve(c_tune, s_tune);
      const auto& e = cfg.experiment;
      TuneOptions opts;
      if (!grid_text.empty()) opts.grid = parse_list(grid_text);
      const DetectorFamily fam = family_for(cfg);
      const TuneResult r =
          tune(fam.replica, rayleigh_r_transform(e.xi()), e.sigma2, decoupled_input(e),
               cfg.detector.metric, replica_decision(e, cfg.detector.epsilon), opts);
      if (!c_tune.out.empty()) {
        Table t{{"lambda", "value", "converged"}, {}};
        for (const auto& p : r.evaluated)
          t.rows.push_back({p.lambda, p.value, p.converged ? 1.0 : 0.0});
        emit_table(t, c_tune.out);
      }
      emit_summary(cfg, c_tune,
                   {{"lambda_star", r.lambda_star},
                    {"metric_star", r.metric_star},
                    {"residual", r.at_optimum.residual()}},
                   {{"metric", to_string(cfg.detector.metric)}, {"family", fam.name}});
      return 0;
    }
    if (*dict) {
      const RunConfig cfg = resolve(c_dict, s_dict);
      const auto& e = cfg.experiment;
      const DetectorFamily fam = family_for(cfg);
      const auto rows =
          tuning_dictionary(fam.replica, rayleigh_r_transform(e.xi()), decoupled_input(e),
                            parse_list(snr_text), cfg.detector.metric,
                            replica_decision(e, cfg.detector.epsilon));
      if (c_dict.out.empty()) {
        write_dictionary_csv(std::cout, rows);
      } else {
        std::ofstream os(c_dict.out);
        if (!os) throw InvalidArgument("cannot write " + c_dict.out);
        write_dictionary_csv(os, rows);
      }
      bool all = true;
      for (const auto& r : rows) all = all && r.converged;
      return all ? 0 : kExitConvergence;
    }
    if (*cmp) {
      const RunConfig cfg = resolve(c_cmp, s_cmp);
      const Comparison r = compare_replica_mc(cfg.experiment, family_for(cfg),
                                              parse_list(cmp_grid), cfg.detector.metric,
                                              {cfg.threads, false, {}});
      Table t{{"lambda", "replica", "mc_mean", "mc_std_error", "mc_trials"}, {}};
      for (const auto& row : r.rows)
        t.rows.push_back({row.lambda, row.replica, row.mc_mean, row.mc_std_error,
                          static_cast<double>(row.mc_trials)});
      emit_table(t, c_cmp.out);
      if (!c_cmp.summary.empty())
        emit_summary(cfg, c_cmp, {{"max_abs_dev_db", r.max_abs_dev_db}},
                     {{"metric", to_string(r.metric)}});
      return 0;
    }
    for (const auto& [name, sub] : figs) {
      if (!*sub) continue;
      fig_opts.with_mc = !no_mc;
      if (!fig_snr.empty()) fig_opts.snr_db = parse_list(fig_snr);
      if (!fig_lambdas.empty()) fig_opts.lambdas = parse_list(fig_lambdas);
      emit_table(figures().at(name)(fig_opts), fig_out);
      return 0;
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  }
  return 0;
}
