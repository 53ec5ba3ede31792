#include <limits>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "masm/codec.hpp"
#include "masm/error.hpp"
#include "masm/harness.hpp"
#include "masm/replica.hpp"

namespace py = pybind11;
using namespace masm;

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

Bits to_bits(const std::vector<int>& v) {
  Bits b;
  b.reserve(v.size());
  for (int x : v) {
    if (x != 0 && x != 1) throw InvalidArgument("payload entries must be 0 or 1");
    b.push_back(static_cast<std::uint8_t>(x));
  }
  return b;
}

std::vector<int> from_bits(const Bits& b) { return {b.begin(), b.end()}; }

ExperimentConfig make_config(int users, int antennas, int active, int receive,
                             const std::string& constellation, double power, double snr_db,
                             std::uint64_t seed, int trials) {
  ExperimentConfig c;
  c.users = users;
  c.antennas = antennas;
  c.active = active;
  c.receive = receive;
  c.constellation = constellation;
  c.power = power;
  c.seed = seed;
  c.trials = trials;
  c.set_snr_db(snr_db);
  c.validate();
  return c;
}

py::dict table_to_dict(const Table& t) {
  py::dict d;
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    std::vector<double> col;
    for (const auto& row : t.rows) col.push_back(row[j]);
    d[py::str(t.columns[j])] = col;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiple-active spatial modulation: codec, detectors and replica analysis";
  m.attr("__version__") = tool_version();

  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<Constellation>(m, "Constellation")
      .def_static("ssk", &Constellation::ssk, py::arg("power") = 1.0)
      .def_static("bpsk", &Constellation::bpsk, py::arg("power") = 1.0)
      .def_static("qam4", &Constellation::qam4, py::arg("power") = 1.0)
      .def_static("preset", &Constellation::preset, py::arg("name"), py::arg("power") = 1.0)
      .def_readonly("points", &Constellation::points)
      .def_readonly("bits_per_symbol", &Constellation::bits_per_symbol)
      .def_readonly("power", &Constellation::power);

  py::class_<SmCodebook>(m, "Codebook")
      .def_readonly("m_u", &SmCodebook::m_u)
      .def_readonly("l_u", &SmCodebook::l_u)
      .def_readonly("index_bits", &SmCodebook::index_bits)
      .def_readonly("supports", &SmCodebook::supports)
      .def("payload_bits", &SmCodebook::payload_bits)
      .def("__len__", &SmCodebook::size);

  m.def("index_bits", &index_bits, py::arg("m_u"), py::arg("l_u"));
  m.def(
      "build_codebook",
      [](int m_u, int l_u, std::optional<std::uint64_t> seed,
         std::optional<std::vector<std::vector<int>>> supports) {
        if (seed && supports) throw InvalidArgument("give either seed or supports, not both");
        if (seed) return build_codebook(m_u, l_u, SeededRandom{*seed});
        if (supports) return build_codebook(m_u, l_u, ExplicitSupports{*supports});
        return build_codebook(m_u, l_u);
      },
      py::arg("m_u"), py::arg("l_u"), py::kw_only(), py::arg("seed") = py::none(),
      py::arg("supports") = py::none());
  m.def(
      "encode",
      [](const SmCodebook& cb, const Constellation& c, const std::vector<int>& payload) {
        const Bits b = to_bits(payload);
        return encode(cb, c, b);
      },
      py::arg("codebook"), py::arg("constellation"), py::arg("payload"));
  m.def(
      "decode",
      [](const SmCodebook& cb, const Constellation& c, const Eigen::VectorXcd& x) {
        return from_bits(decode_hard(cb, c, x));
      },
      py::arg("codebook"), py::arg("constellation"), py::arg("x"));

  py::class_<RateBounds>(m, "RateBounds")
      .def_readonly("r_bar", &RateBounds::r_bar)
      .def_readonly("index_bits", &RateBounds::index_bits)
      .def_readonly("c_const", &RateBounds::c_const)
      .def_readonly("c_lower", &RateBounds::c_lower)
      .def_readonly("c_upper", &RateBounds::c_upper)
      .def_readonly("stirling_lo", &RateBounds::stirling_lo)
      .def_readonly("stirling_hi", &RateBounds::stirling_hi)
      .def_readonly("has_bounds", &RateBounds::has_bounds);
  m.def("per_antenna_rate", &per_antenna_rate, py::arg("m_u"), py::arg("l_u"),
        py::arg("bits_per_symbol"));

  m.def(
      "sample_rayleigh",
      [](int n, int m_tx, std::uint64_t seed) { return sample_rayleigh(n, m_tx, seed).h; },
      py::arg("n"), py::arg("m"), py::arg("seed"));

  m.def("prox_box_soft_threshold", &prox_box_soft_threshold, py::arg("w"), py::arg("kappa"),
        py::arg("lower"), py::arg("upper"));
  m.def(
      "solve_box_lasso",
      [](const Eigen::MatrixXcd& h, const Eigen::VectorXcd& y, double lambda,
         std::optional<double> lower, std::optional<double> upper, double tol, int max_iter) {
        FeasibleSet fs = FullReal{};
        if (lower || upper) fs = Box{lower.value_or(kInfinity), upper.value_or(kInfinity)};
        const SoftEstimate est = solve_box_lasso(h, y, lambda, fs, {tol, max_iter});
        py::dict d;
        d["values"] = est.values;
        d["iterations"] = est.iterations;
        d["objective"] = est.objective;
        d["kkt_residual"] = est.kkt_residual;
        d["converged"] = est.converged;
        return d;
      },
      py::arg("h"), py::arg("y"), py::arg("lam"), py::arg("lower") = py::none(),
      py::arg("upper") = py::none(), py::arg("tol") = 1e-8, py::arg("max_iter") = 50000,
      "Box-constrained LASSO; leave both bounds unset for the classic LASSO.");

  py::class_<FixedPointResult>(m, "FixedPointResult")
      .def_readonly("c", &FixedPointResult::c_star)
      .def_readonly("q", &FixedPointResult::q_star)
      .def_readonly("residual_c", &FixedPointResult::residual_c)
      .def_readonly("residual_q", &FixedPointResult::residual_q)
      .def_readonly("iterations", &FixedPointResult::iterations)
      .def_readonly("converged", &FixedPointResult::converged)
      .def_property_readonly("tau", [](const FixedPointResult& r) { return r.state.tau; })
      .def_property_readonly("theta", [](const FixedPointResult& r) { return r.state.theta; })
      .def_property_readonly("mse", &FixedPointResult::mse)
      .def_property_readonly("error_rate", &FixedPointResult::error_rate);

  m.def(
      "replica_box_lasso",
      [](double lambda, double xi, double sigma2, double eta, double lower, double upper,
         double epsilon) {
        const DecoupledInput in{eta, Constellation::ssk()};
        return solve_fixed_point(BoxLassoEstimator{lambda, lower, upper}, rayleigh_r_transform(xi),
                                 sigma2, in, HardThreshold{epsilon});
      },
      py::arg("lam"), py::arg("xi"), py::arg("sigma2"), py::arg("eta"), py::arg("lower") = 0.0,
      py::arg("upper") = 1.0, py::arg("epsilon") = 0.5,
      "Replica fixed point of the box-LASSO for SSK input; infinite bounds give the classic LASSO.");
  m.def(
      "replica_map_bound",
      [](const std::string& constellation, double xi, double sigma2, double eta) {
        const Constellation c = Constellation::preset(constellation);
        const DecoupledInput in{eta, c};
        return solve_fixed_point(L0Estimator{l0_weight(sigma2, eta, c.bits_per_symbol), c},
                                 rayleigh_r_transform(xi), sigma2, in, IdentityDecision{});
      },
      py::arg("constellation"), py::arg("xi"), py::arg("sigma2"), py::arg("eta"));
  m.def(
      "tune_lambda",
      [](const std::string& family, double xi, double sigma2, double eta,
         const std::string& metric) {
        const EstimatorFamily fam =
            family == "classic" ? classic_lasso_family()
            : family == "box"   ? box_lasso_family(0.0, 1.0)
                                : throw InvalidArgument("family must be 'box' or 'classic'");
        const TuneResult r = tune(fam, rayleigh_r_transform(xi), sigma2,
                                  DecoupledInput{eta, Constellation::ssk()}, parse_metric(metric));
        return py::make_tuple(r.lambda_star, r.metric_star);
      },
      py::arg("family"), py::arg("xi"), py::arg("sigma2"), py::arg("eta"),
      py::arg("metric") = "error-rate", "Returns (lambda_star, metric_star).");

  m.def(
      "monte_carlo",
      [](const std::string& detector, double lambda, int users, int antennas, int active,
         int receive, const std::string& constellation, double snr_db, int trials,
         std::uint64_t seed, const std::string& metric, int threads) {
        const ExperimentConfig cfg = make_config(users, antennas, active, receive, constellation,
                                                 1.0, snr_db, seed, trials);
        DetectorSettings d;
        d.kind = detector;
        d.lambda = lambda;
        d.metric = parse_metric(metric);
        const RlsSpec spec = make_detector(d, cfg);
        AggregateResult r;
        {
          py::gil_scoped_release release;
          r = run_monte_carlo(cfg, spec, d.metric, trials, {threads, false, {}});
        }
        py::dict out;
        out["mean"] = r.mean;
        out["mean_db"] = r.mean_db();
        out["std_error"] = r.std_error;
        out["trials"] = r.trials;
        out["failed"] = r.failed;
        out["not_converged"] = r.not_converged;
        return out;
      },
      py::arg("detector"), py::arg("lam") = 0.1, py::kw_only(), py::arg("users") = 10,
      py::arg("antennas") = 8, py::arg("active") = 1, py::arg("receive") = 160,
      py::arg("constellation") = "ssk", py::arg("snr_db") = 11.0, py::arg("trials") = 1000,
      py::arg("seed") = 1, py::arg("metric") = "mse", py::arg("threads") = 0);

  m.def(
      "figure",
      [](const std::string& name, int trials, int draws, bool with_mc, std::uint64_t seed) {
        const auto& f = figures();
        const auto it = f.find(name);
        if (it == f.end()) throw InvalidArgument("unknown figure: " + name);
        FigureOptions o;
        o.trials = trials;
        o.draws = draws;
        o.with_mc = with_mc;
        o.seed = seed;
        return table_to_dict(it->second(o));
      },
      py::arg("name"), py::kw_only(), py::arg("trials") = 1000, py::arg("draws") = 100000,
      py::arg("with_mc") = true, py::arg("seed") = 1,
      "Figure table as a dict of column name to list of values.");
  m.def("figure_names", [] {
    std::vector<std::string> names;
    for (const auto& [k, v] : figures()) names.push_back(k);
    return names;
  });
}
