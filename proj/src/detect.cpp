#include "masm/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "masm/error.hpp"

namespace masm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bounds {
  double lower;  // v >= -lower
  double upper;  // v <= upper
};

Bounds real_bounds(const FeasibleSet& feasible) {
  if (const auto* b = std::get_if<Box>(&feasible)) {
    if (!(b->lower >= 0.0) || !(b->upper >= 0.0))
      throw InvalidArgument("box must contain zero: lower >= 0 and upper >= 0");
    return {b->lower, b->upper};
  }
  if (std::holds_alternative<FullReal>(feasible)) return {kInf, kInf};
  throw InvalidArgument("LASSO solver supports Box and FullReal feasible sets only");
}

// Largest eigenvalue of H^H H, i.e. ||H||_2^2, by power iteration.
double spectral_norm_sq(const Eigen::Ref<const Eigen::MatrixXcd>& h) {
  const Eigen::Index m = h.cols();
  Eigen::VectorXcd v = Eigen::VectorXcd::Constant(m, std::complex<double>(1.0, 0.0));
  // A fixed, non-symmetric start avoids orthogonality to the top eigenvector
  // for structured matrices.
  for (Eigen::Index j = 0; j < m; ++j) v[j] += 0.01 * static_cast<double>(j % 7);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Eigen::VectorXcd w = h.adjoint() * (h * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - est) <= 1e-12 * next) return next;
    est = next;
  }
  return est;
}

// Distance from -g to the subdifferential of lambda|v| + indicator of the box.
double kkt_component(double v, double g, double lambda, const Bounds& b) {
  double lo = 0.0;
  double hi = 0.0;
  const bool at_upper = std::isfinite(b.upper) && v >= b.upper;
  const bool at_lower = std::isfinite(b.lower) && v <= -b.lower;
  if (v > 0.0) {
    lo = lambda;
    hi = at_upper ? kInf : lambda;
  } else if (v < 0.0) {
    hi = -lambda;
    lo = at_lower ? -kInf : -lambda;
  } else {
    lo = at_lower ? -kInf : -lambda;
    hi = at_upper ? kInf : lambda;
  }
  const double target = -g;
  if (target < lo) return lo - target;
  if (target > hi) return target - hi;
  return 0.0;
}

}  // namespace

void RlsSpec::validate() const {
  if (const auto* l1 = std::get_if<L1>(&regularizer); l1 && !(l1->lambda >= 0.0))
    throw InvalidArgument("regularization parameter must be non-negative");
  if (std::holds_alternative<Box>(feasible)) real_bounds(feasible);
  if (const auto* d = std::get_if<Discrete>(&feasible)) d->constellation.validate();
  if (const auto* c = std::get_if<CodebookSet>(&feasible)) {
    c->codebook.validate();
    c->constellation.validate();
  }
}

double l0_weight(double sigma2, double eta, int bits_per_symbol) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("l0 weight requires 0 < eta < 1");
  return sigma2 * (bits_per_symbol * std::log(2.0) + std::log(1.0 - eta) - std::log(eta));
}

double l0_offset(double sigma2, double eta) { return -sigma2 * std::log(1.0 - eta); }

double prox_box_soft_threshold(double w, double kappa, double lower, double upper) {
  double v = 0.0;
  if (w > kappa)
    v = w - kappa;
  else if (w < -kappa)
    v = w + kappa;
  return std::clamp(v, -lower, upper);
}

double lasso_objective(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                       const Eigen::Ref<const Eigen::VectorXcd>& y,
                       const Eigen::Ref<const Eigen::VectorXd>& v, double lambda) {
  const Eigen::VectorXcd r = y - h * v.cast<std::complex<double>>();
  return r.squaredNorm() + lambda * v.lpNorm<1>();
}

SoftEstimate solve_box_lasso(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                             const Eigen::Ref<const Eigen::VectorXcd>& y, double lambda,
                             const FeasibleSet& feasible, const ProxGradOptions& opts) {
  if (h.rows() != y.size()) throw InvalidArgument("channel rows must match observation length");
  if (!(lambda >= 0.0)) throw InvalidArgument("regularization parameter must be non-negative");
  const Bounds bounds = real_bounds(feasible);
  const Eigen::Index m = h.cols();

  // Real-valued reformulation: ||y - Hv||^2 = v'Gv - 2b'v + ||y||^2.
  const Eigen::MatrixXd gram = (h.adjoint() * h).real();
  const Eigen::VectorXd b = (h.adjoint() * y).real();
  const double yy = y.squaredNorm();

  SoftEstimate est;
  est.values = Eigen::VectorXd::Zero(m);
  const double lip = 2.0 * spectral_norm_sq(h);
  if (lip == 0.0) {
    est.objective = yy;
    est.converged = true;
    return est;
  }
  const double step = 1.0 / lip;
  const double kkt_tol = 10.0 * opts.tol * (1.0 + yy);

  Eigen::VectorXd& v = est.values;
  Eigen::VectorXd gv = Eigen::VectorXd::Zero(m);
  auto objective = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
    return x.dot(gx) - 2.0 * b.dot(x) + yy + lambda * x.lpNorm<1>();
  };
  auto kkt = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double r = kkt_component(x[j], 2.0 * (gx[j] - b[j]), lambda, bounds);
      acc += r * r;
    }
    return std::sqrt(acc);
  };

  double f = objective(v, gv);
  Eigen::VectorXd next(m);
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (Eigen::Index j = 0; j < m; ++j)
      next[j] = prox_box_soft_threshold(v[j] - step * 2.0 * (gv[j] - b[j]), step * lambda,
                                        bounds.lower, bounds.upper);
    const Eigen::VectorXd gnext = gram * next;
    const double fnext = objective(next, gnext);
    v.swap(next);
    gv = gnext;
    est.iterations = it;
    const double change = std::abs(f - fnext) / std::max(std::abs(fnext), 1e-300);
    f = fnext;
    if (change < opts.tol) {
      est.kkt_residual = kkt(v, gv);
      if (est.kkt_residual <= kkt_tol) {
        est.converged = true;
        break;
      }
    }
  }
  est.objective = f;
  est.kkt_residual = kkt(v, gv);
  return est;
}

namespace {

double search_space(double alphabet, Eigen::Index positions) {
  return std::pow(alphabet, static_cast<double>(positions));
}

bool improves(double candidate, double best) {
  return candidate < best - 1e-12 * (1.0 + std::abs(best));
}

}  // namespace

Eigen::VectorXcd solve_l0_exhaustive(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                                     const Eigen::Ref<const Eigen::VectorXcd>& y, double a,
                                     const Constellation& constellation, const L0Mode& mode) {
  if (h.rows() != y.size()) throw InvalidArgument("channel rows must match observation length");

  // Each position takes one of `options[pos]`; digits advance like an odometer
  // with the last position fastest, which visits candidates lexicographically.
  std::vector<std::vector<Eigen::VectorXcd>> options;
  std::vector<Eigen::Index> offsets;
  std::vector<std::vector<int>> weights;  // ||.||_0 of each option
  if (std::holds_alternative<IidMismatched>(mode)) {
    const double space = search_space(constellation.size() + 1.0, h.cols());
    if (space > kMaxSearchSpace) throw SearchSpaceTooLarge("exhaustive search space exceeds 2^24");
    std::vector<Eigen::VectorXcd> alphabet;
    std::vector<int> w;
    alphabet.push_back(Eigen::VectorXcd::Zero(1));
    w.push_back(0);
    for (auto p : constellation.points) {
      alphabet.push_back(Eigen::VectorXcd::Constant(1, p));
      w.push_back(1);
    }
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      options.push_back(alphabet);
      offsets.push_back(j);
      weights.push_back(w);
    }
  } else {
    const auto& cm = std::get<CodebookExact>(mode);
    cm.codebook.validate();
    if (h.cols() != static_cast<Eigen::Index>(cm.users) * cm.codebook.m_u)
      throw InvalidArgument("channel columns must equal K * M_u");
    const int bits = cm.codebook.payload_bits(constellation);
    if (search_space(std::pow(2.0, bits), cm.users) > kMaxSearchSpace)
      throw SearchSpaceTooLarge("exhaustive search space exceeds 2^24");
    std::vector<Eigen::VectorXcd> words;
    std::vector<int> w;
    for (std::uint64_t p = 0; p < (std::uint64_t{1} << bits); ++p) {
      Bits payload;
      for (int i = bits - 1; i >= 0; --i) payload.push_back(static_cast<std::uint8_t>((p >> i) & 1));
      words.push_back(encode(cm.codebook, constellation, payload));
      w.push_back(cm.codebook.l_u);
    }
    for (int k = 0; k < cm.users; ++k) {
      options.push_back(words);
      offsets.push_back(static_cast<Eigen::Index>(k) * cm.codebook.m_u);
      weights.push_back(w);
    }
  }

  const std::size_t positions = options.size();
  std::vector<std::size_t> digit(positions, 0);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(h.cols());
  for (std::size_t p = 0; p < positions; ++p)
    v.segment(offsets[p], options[p][0].size()) = options[p][0];
  auto full_residual = [&] { return Eigen::VectorXcd(y - h * v); };
  Eigen::VectorXcd r = full_residual();
  int nnz = 0;
  for (std::size_t p = 0; p < positions; ++p) nnz += weights[p][0];

  Eigen::VectorXcd best = v;
  double best_obj = r.squaredNorm() + a * nnz;
  while (true) {
    // Increment the odometer.
    std::size_t p = positions;
    while (p > 0) {
      --p;
      const std::size_t old = digit[p];
      const std::size_t nxt = (old + 1) % options[p].size();
      digit[p] = nxt;
      const auto len = options[p][nxt].size();
      const Eigen::VectorXcd delta = options[p][nxt] - options[p][old];
      r.noalias() -= h.middleCols(offsets[p], len) * delta;
      v.segment(offsets[p], len) = options[p][nxt];
      nnz += weights[p][nxt] - weights[p][old];
      if (nxt != 0) break;
      if (p == 0) return best;  // wrapped around: enumeration complete
    }
    // Re-sync the running residual whenever a carry reached far positions.
    if (p + 3 < positions) r = full_residual();
    const double obj = r.squaredNorm() + a * nnz;
    if (improves(obj, best_obj)) {
      best_obj = obj;
      best = v;
    }
  }
}

Eigen::VectorXcd apply_decision(const Eigen::Ref<const Eigen::VectorXcd>& soft,
                                const Decision& decision, double power) {
  const double amp = std::sqrt(power);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(soft.size());
  if (const auto* t = std::get_if<HardThreshold>(&decision)) {
    for (Eigen::Index i = 0; i < soft.size(); ++i)
      if (soft[i].real() >= t->epsilon) out[i] = amp;
  } else if (const auto* s = std::get_if<SignWithSparsity>(&decision)) {
    if (s->keep < 0) throw InvalidArgument("number of kept entries must be non-negative");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(soft.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(soft[a]) < std::abs(soft[b]);
    });
    const auto drop = std::max<Eigen::Index>(0, soft.size() - s->keep);
    for (auto k = static_cast<std::size_t>(drop); k < order.size(); ++k) {
      const double re = soft[order[k]].real();
      out[order[k]] = re > 0.0 ? amp : (re < 0.0 ? -amp : 0.0);
    }
  } else {
    out = soft;
  }
  return out;
}

Eigen::VectorXcd apply_decision(const SoftEstimate& soft, const RlsSpec& spec, double power) {
  return apply_decision(soft.values.cast<std::complex<double>>(), spec.decision, power);
}

Metric parse_metric(const std::string& name) {
  if (name == "mse") return Metric::kMse;
  if (name == "error-rate" || name == "error_rate" || name == "ser") return Metric::kErrorRate;
  throw InvalidArgument("unknown metric '" + name + "'");
}

const char* to_string(Metric m) { return m == Metric::kMse ? "mse" : "error-rate"; }

double distortion(const Eigen::Ref<const Eigen::VectorXcd>& estimate,
                  const Eigen::Ref<const Eigen::VectorXcd>& truth, Metric metric) {
  if (estimate.size() != truth.size()) throw InvalidArgument("length mismatch in distortion");
  if (truth.size() == 0) throw InvalidArgument("distortion of empty vectors");
  const double m = static_cast<double>(truth.size());
  if (metric == Metric::kMse) return (estimate - truth).squaredNorm() / m;
  std::size_t errors = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (std::abs(estimate[i] - truth[i]) > 1e-9 * (1.0 + std::abs(truth[i]))) ++errors;
  return static_cast<double>(errors) / m;
}

}  // namespace masm
