#include "masm/replica.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "masm/error.hpp"
#include "masm/gaussian.hpp"

namespace masm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrtHalf = 0.70710678118654752440;

bool same_value(cplx a, cplx b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(b)); }

// Support of the scalar input law: zero first, then the constellation points.
std::vector<cplx> input_alphabet(const DecoupledInput& input) {
  std::vector<cplx> xs{cplx(0.0)};
  xs.insert(xs.end(), input.constellation.points.begin(), input.constellation.points.end());
  return xs;
}

std::vector<double> input_weights(const DecoupledInput& input) {
  std::vector<double> w{1.0 - input.eta};
  const double each = input.eta / static_cast<double>(input.constellation.size());
  w.insert(w.end(), input.constellation.size(), each);
  return w;
}

void accumulate(Functionals& f, const std::vector<double>& w, const std::vector<double>& c,
                const std::vector<double>& e, const std::vector<double>& g) {
  f.weights = w;
  f.correct_given = g;
  f.c_corr = f.e_mse = f.p_correct = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    f.c_corr += w[k] * c[k];
    f.e_mse += w[k] * e[k];
    f.p_correct += w[k] * g[k];
  }
  f.error_rate = std::clamp(1.0 - f.p_correct, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Box-constrained LASSO: every quantity is a Gaussian tail integral over the
// five branches of the clipped soft threshold applied to Re(y).

struct BoxBranches {
  double a1, a2, b1, b2;  // standardized boundaries, b1 <= b2 <= a1 <= a2
};

Functionals box_lasso_functionals(const BoxLassoEstimator& est, const DecoupledState& st,
                                  const DecoupledInput& input, const ScalarDecision& decision) {
  if (!input.constellation.is_real())
    throw InvalidArgument("box-LASSO analysis requires a real constellation");
  const double kappa = st.tau * est.lambda / 2.0;
  const double u = est.upper;
  const double l = est.lower;
  const double sd = st.theta * kSqrtHalf;  // std of Re(theta z)
  const double amp = std::sqrt(input.constellation.power);
  const auto xs = input_alphabet(input);
  const auto ws = input_weights(input);

  // Observation thresholds for x* >= level and x* > level.
  auto thr_ge = [&](double level) {
    if (level > u) return kInf;
    if (level > 0.0) return kappa + level;
    if (level <= -l) return -kInf;
    return level - kappa;
  };
  auto thr_gt = [&](double level) {
    if (level >= u) return kInf;
    if (level >= 0.0) return kappa + level;
    if (level < -l) return -kInf;
    return level - kappa;
  };

  std::vector<double> cs, es, gs;
  for (auto xc : xs) {
    const double x = xc.real();
    if (sd == 0.0) {
      const double xstar = prox_box_soft_threshold(x, kappa, l, u);
      cs.push_back(0.0);
      es.push_back((xstar - x) * (xstar - x));
      gs.push_back(same_value(apply_scalar_decision(decision, xstar, input.constellation.power),
                              xc)
                       ? 1.0
                       : 0.0);
      continue;
    }
    const BoxBranches br{(kappa - x) / sd, (kappa + u - x) / sd, (-kappa - l - x) / sd,
                         (-kappa - x) / sd};
    const double m_up = gauss::mass(br.a2, kInf);
    const double m_pos = gauss::mass(br.a1, br.a2);
    const double m_zero = gauss::mass(br.b2, br.a1);
    const double m_neg = gauss::mass(br.b1, br.b2);
    const double m_low = gauss::mass(-kInf, br.b1);

    double e = x * x * m_zero;
    e += sd * sd * gauss::second_moment(br.a1, br.a2) -
         2.0 * sd * kappa * gauss::first_moment(br.a1, br.a2) + kappa * kappa * m_pos;
    e += sd * sd * gauss::second_moment(br.b1, br.b2) +
         2.0 * sd * kappa * gauss::first_moment(br.b1, br.b2) + kappa * kappa * m_neg;
    if (std::isfinite(u)) e += (u - x) * (u - x) * m_up;
    if (std::isfinite(l)) e += (l + x) * (l + x) * m_low;
    es.push_back(e);

    // Stein's lemma: E[(x* - x) Re z] = (theta / 2) P(linear branches).
    cs.push_back(0.5 * st.theta * (m_pos + m_neg));

    auto p_ge = [&](double level) { return gauss::sf((thr_ge(level) - x) / sd); };
    auto p_gt = [&](double level) { return gauss::sf((thr_gt(level) - x) / sd); };
    double g = 0.0;
    if (const auto* h = std::get_if<HardThreshold>(&decision)) {
      if (x == 0.0)
        g = 1.0 - p_ge(h->epsilon);
      else if (same_value(xc, amp))
        g = p_ge(h->epsilon);
    } else if (const auto* sgn = std::get_if<SignThreshold>(&decision)) {
      const double up = p_gt(sgn->epsilon);
      const double down = 1.0 - p_ge(-sgn->epsilon);
      if (x == 0.0)
        g = std::max(0.0, 1.0 - up - down);
      else if (same_value(xc, amp))
        g = up;
      else if (same_value(xc, -amp))
        g = down;
    } else {
      // Identity: only the flat branches put mass on a single value.
      if (x == 0.0) g += m_zero + (l == 0.0 ? m_low : 0.0) + (u == 0.0 ? m_up : 0.0);
      if (x != 0.0 && x == u) g += m_up;
      if (x != 0.0 && x == -l) g += m_low;
    }
    gs.push_back(g);
  }
  Functionals f;
  accumulate(f, ws, cs, es, gs);
  return f;
}

// ---------------------------------------------------------------------------
// l0 estimator over a finite alphabet. The region where a candidate wins is
// a polygon cut out by linear constraints  ar*y_r + ai*y_i + b > 0.

struct Constraint {
  double ar, ai, b;
};

struct Region {
  cplx value;
  std::vector<Constraint> cons;
};

std::vector<Region> l0_regions(const L0Estimator& est, double tau) {
  const auto& pts = est.constellation.points;
  const double ta = tau * est.a;
  std::vector<Region> regions;
  Region zero{cplx(0.0), {}};
  for (auto s : pts) zero.cons.push_back({-2.0 * s.real(), -2.0 * s.imag(), std::norm(s) + ta});
  regions.push_back(zero);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const cplx s = pts[k];
    Region r{s, {{2.0 * s.real(), 2.0 * s.imag(), -std::norm(s) - ta}}};
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == k) continue;
      const cplx o = pts[j];
      r.cons.push_back({2.0 * (s.real() - o.real()), 2.0 * (s.imag() - o.imag()),
                        -(std::norm(s) - std::norm(o))});
    }
    regions.push_back(std::move(r));
  }
  return regions;
}

// Interval of the free coordinate where all constraints hold, given the
// coefficient of the free coordinate and the remaining affine part.
std::pair<double, double> feasible_interval(const std::vector<Constraint>& cons, double fixed,
                                            bool free_is_imag) {
  double lo = -kInf;
  double hi = kInf;
  for (const auto& c : cons) {
    const double a = free_is_imag ? c.ai : c.ar;
    const double rest = (free_is_imag ? c.ar : c.ai) * fixed + c.b;
    if (a > 0.0)
      lo = std::max(lo, -rest / a);
    else if (a < 0.0)
      hi = std::min(hi, -rest / a);
    else if (rest < 0.0)
      return {0.0, 0.0};
  }
  if (hi <= lo) return {0.0, 0.0};
  return {lo, hi};
}

struct RegionMoments {
  double p = 0.0;   // P(region)
  double zr = 0.0;  // E[Re z ; region]
  double zi = 0.0;  // E[Im z ; region]
};

// Exact moments when every constraint ignores Im(y).
RegionMoments real_region_moments(const Region& r, cplx x, double sd) {
  const auto [lo, hi] = feasible_interval(r.cons, 0.0, false);
  if (!(hi > lo)) return {};
  const double a = (lo - x.real()) / sd;
  const double b = (hi - x.real()) / sd;
  return {gauss::mass(a, b), kSqrtHalf * gauss::first_moment(a, b), 0.0};
}

// Outer adaptive quadrature over Re(y), inner interval in Im(y) in closed form.
RegionMoments complex_region_moments(const Region& r, cplx x, double sd) {
  constexpr double kSpan = 10.0;
  // Points where the inner interval changes shape, in standardized units.
  std::vector<double> breaks{-kSpan, kSpan};
  auto add = [&](double yr) {
    const double g = (yr - x.real()) / sd;
    if (std::isfinite(g) && g > -kSpan && g < kSpan) breaks.push_back(g);
  };
  for (std::size_t i = 0; i < r.cons.size(); ++i) {
    const auto& ci = r.cons[i];
    if (ci.ai == 0.0) {
      if (ci.ar != 0.0) add(-ci.b / ci.ar);
      continue;
    }
    for (std::size_t j = i + 1; j < r.cons.size(); ++j) {
      const auto& cj = r.cons[j];
      if (cj.ai == 0.0) continue;
      const double slope = cj.ar / cj.ai - ci.ar / ci.ai;
      if (slope != 0.0) add((ci.b / ci.ai - cj.b / cj.ai) / slope);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  auto inner = [&](double g) {
    const double yr = x.real() + sd * g;
    const auto [lo, hi] = feasible_interval(r.cons, yr, true);
    if (!(hi > lo)) return std::pair<double, double>{0.0, 0.0};
    const double a = (lo - x.imag()) / sd;
    const double b = (hi - x.imag()) / sd;
    return std::pair<double, double>{gauss::mass(a, b), gauss::first_moment(a, b)};
  };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  RegionMoments out;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    out.p += Rule::integrate([&](double g) { return gauss::pdf(g) * inner(g).first; }, a, b, 12,
                             1e-13);
    out.zr += Rule::integrate(
        [&](double g) { return gauss::pdf(g) * g * kSqrtHalf * inner(g).first; }, a, b, 12,
        1e-13);
    out.zi += Rule::integrate(
        [&](double g) { return gauss::pdf(g) * kSqrtHalf * inner(g).second; }, a, b, 12, 1e-13);
  }
  return out;
}

Functionals l0_functionals(const L0Estimator& est, const DecoupledState& st,
                           const DecoupledInput& input, const ScalarDecision& decision) {
  const auto regions = l0_regions(est, st.tau);
  const bool real = est.constellation.is_real();
  const double sd = st.theta * kSqrtHalf;
  const double power = input.constellation.power;
  const auto xs = input_alphabet(input);
  const auto ws = input_weights(input);
  std::vector<double> cs, es, gs;
  for (auto x : xs) {
    double c = 0.0, e = 0.0, g = 0.0;
    for (const auto& r : regions) {
      RegionMoments m;
      if (sd == 0.0) {
        // Noiseless observation: region membership of x itself.
        bool inside = true;
        for (const auto& con : r.cons)
          inside = inside && (con.ar * x.real() + con.ai * x.imag() + con.b > 0.0 ||
                              (r.value == cplx(0.0) && con.ar * x.real() + con.ai * x.imag() +
                                                               con.b >= 0.0));
        m.p = inside ? 1.0 : 0.0;
      } else {
        m = real ? real_region_moments(r, x, sd) : complex_region_moments(r, x, sd);
      }
      const cplx d = r.value - x;
      c += d.real() * m.zr + d.imag() * m.zi;
      e += std::norm(d) * m.p;
      if (same_value(apply_scalar_decision(decision, r.value, power), x)) g += m.p;
    }
    cs.push_back(c);
    es.push_back(e);
    gs.push_back(std::min(g, 1.0));
  }
  Functionals f;
  accumulate(f, ws, cs, es, gs);
  return f;
}

// ---------------------------------------------------------------------------
// Generic estimators: Gauss-Hermite quadrature over the noise.

struct GhEval {
  double c, e, err;
  Functionals f;
};

Functionals numeric_functionals_at(const NumericEstimator& est, const DecoupledState& st,
                                   const DecoupledInput& input, const ScalarDecision& decision,
                                   int n) {
  const auto& gh = gauss_hermite(n);
  const bool interval = std::holds_alternative<Interval>(est.domain);
  if (interval && !input.constellation.is_real())
    throw InvalidArgument("real feasible interval requires a real constellation");
  const double power = input.constellation.power;
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  const ScalarEstimatorSpec spec = est;
  const auto xs = input_alphabet(input);
  const auto ws = input_weights(input);
  std::vector<double> cs, es, gs;
  for (auto x : xs) {
    double c = 0.0, e = 0.0, g = 0.0;
    // With weight exp(-t^2) the nodes are draws of Re z ~ N(0, 1/2) directly.
    auto visit = [&](cplx z, double w) {
      const cplx xstar = scalar_rls(spec, x + st.theta * z, st.tau);
      const cplx d = xstar - x;
      c += w * (d.real() * z.real() + d.imag() * z.imag());
      e += w * std::norm(d);
      if (same_value(apply_scalar_decision(decision, xstar, power), x)) g += w;
    };
    for (int i = 0; i < n; ++i) {
      const double wi = gh.weights[i] * inv_sqrt_pi;
      if (interval) {
        visit(cplx(gh.nodes[i], 0.0), wi);
      } else {
        for (int j = 0; j < n; ++j)
          visit(cplx(gh.nodes[i], gh.nodes[j]), wi * gh.weights[j] * inv_sqrt_pi);
      }
    }
    cs.push_back(c);
    es.push_back(e);
    gs.push_back(std::min(g, 1.0));
  }
  Functionals f;
  accumulate(f, ws, cs, es, gs);
  f.quadrature_nodes = n;
  return f;
}

Functionals numeric_functionals(const NumericEstimator& est, const DecoupledState& st,
                                const DecoupledInput& input, const ScalarDecision& decision,
                                const QuadratureOptions& quad) {
  if (!est.regularizer) throw InvalidArgument("numeric estimator requires a regularizer");
  Functionals prev = numeric_functionals_at(est, st, input, decision, quad.nodes);
  if (!quad.adaptive) return prev;
  for (int n = 2 * quad.nodes; n <= quad.max_nodes; n *= 2) {
    Functionals next = numeric_functionals_at(est, st, input, decision, n);
    const double dc = std::abs(next.c_corr - prev.c_corr);
    const double de = std::abs(next.e_mse - prev.e_mse);
    if (dc <= quad.tol * (1.0 + std::abs(next.c_corr)) &&
        de <= quad.tol * (1.0 + std::abs(next.e_mse)))
      return next;
    prev = std::move(next);
  }
  throw ConvergenceError("Gauss-Hermite quadrature did not converge within the node limit");
}

// Minimizer of a unimodal-near-the-bracket function by golden-section search.
template <class F>
double golden_section(F&& f, double a, double b, double tol, int max_iter = 200) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

void DecoupledInput::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("activity ratio must lie in (0, 1]");
  constellation.validate();
}

ScalarDecision default_decision(const ScalarEstimatorSpec& spec, const DecoupledInput& input) {
  const double half = std::sqrt(input.constellation.power) / 2.0;
  if (std::holds_alternative<L0Estimator>(spec)) return IdentityDecision{};
  if (const auto* n = std::get_if<NumericEstimator>(&spec);
      n && std::holds_alternative<PointSet>(n->domain))
    return IdentityDecision{};
  if (input.constellation.size() == 1) return HardThreshold{half};
  return SignThreshold{half};
}

cplx apply_scalar_decision(const ScalarDecision& decision, cplx soft, double power) {
  const double amp = std::sqrt(power);
  if (const auto* h = std::get_if<HardThreshold>(&decision))
    return soft.real() >= h->epsilon ? cplx(amp) : cplx(0.0);
  if (const auto* s = std::get_if<SignThreshold>(&decision)) {
    if (soft.real() > s->epsilon) return amp;
    if (soft.real() < -s->epsilon) return -amp;
    return 0.0;
  }
  return soft;
}

DecoupledState tau_theta(const SpectralModel& spectral, double c, double q, double sigma2) {
  const double r = spectral.r(-c);
  if (!(r > 0.0)) throw InvalidArgument("R-transform must be positive at -c");
  // d/dc [(sigma2 c - q) R(-c)] = sigma2 R(-c) - (sigma2 c - q) R'(-c)
  const double radicand = sigma2 * r - (sigma2 * c - q) * spectral.dr(-c);
  if (radicand < 0.0)
    throw NegativeRadicand("negative radicand in theta(c, q)", c, q);
  DecoupledState st;
  st.c = c;
  st.q = q;
  st.tau = 1.0 / r;
  st.theta = st.tau * std::sqrt(radicand);
  return st;
}

cplx scalar_rls(const ScalarEstimatorSpec& spec, cplx y, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (const auto* b = std::get_if<BoxLassoEstimator>(&spec))
    return prox_box_soft_threshold(y.real(), tau * b->lambda / 2.0, b->lower, b->upper);

  if (const auto* l0 = std::get_if<L0Estimator>(&spec)) {
    const auto& pts = l0->constellation.points;
    double u_max = -kInf;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double u = 2.0 * (std::conj(y) * pts[k]).real() - std::norm(pts[k]);
      if (u > u_max) {
        u_max = u;
        arg = k;
      }
    }
    return u_max <= tau * l0->a ? cplx(0.0) : pts[arg];
  }

  const auto& num = std::get<NumericEstimator>(spec);
  auto cost = [&](cplx v) { return std::norm(y - v) / tau + num.regularizer(v); };
  if (const auto* ps = std::get_if<PointSet>(&num.domain)) {
    if (ps->points.empty()) throw InvalidArgument("empty point set");
    cplx best = ps->points.front();
    double best_cost = cost(best);
    for (std::size_t k = 1; k < ps->points.size(); ++k) {
      const double cst = cost(ps->points[k]);
      if (cst < best_cost) {
        best_cost = cst;
        best = ps->points[k];
      }
    }
    return best;
  }

  const auto& iv = std::get<Interval>(num.domain);
  auto rcost = [&](double v) { return cost(cplx(v, 0.0)); };
  const double window = 8.0 + 4.0 * std::abs(y);
  const double lo = std::max(iv.lo, y.real() - window);
  const double hi = std::min(iv.hi, y.real() + window);
  constexpr int kGrid = 4000;
  const double h = (hi - lo) / kGrid;
  double best = lo;
  double best_cost = rcost(lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double v = lo + h * i;
    const double cst = rcost(v);
    if (cst < best_cost) {
      best_cost = cst;
      best = v;
    }
  }
  double refined = golden_section(rcost, std::max(lo, best - h), std::min(hi, best + h), 1e-12);
  if (rcost(refined) < best_cost) {
    best = refined;
    best_cost = rcost(refined);
  }
  // Kinks and bounds are common minimizers that a grid only brackets.
  for (double v : {0.0, iv.lo, iv.hi, std::clamp(y.real(), iv.lo, iv.hi)}) {
    if (!std::isfinite(v) || v < iv.lo || v > iv.hi) continue;
    const double cst = rcost(v);
    if (cst <= best_cost) {
      best_cost = cst;
      best = v;
    }
  }
  return best;
}

Functionals functionals(const ScalarEstimatorSpec& spec, const DecoupledState& state,
                        const DecoupledInput& input, const ScalarDecision& decision,
                        const QuadratureOptions& quad) {
  input.validate();
  if (!(state.tau > 0.0) || !(state.theta >= 0.0))
    throw InvalidArgument("decoupled state requires tau > 0 and theta >= 0");
  if (const auto* b = std::get_if<BoxLassoEstimator>(&spec))
    return box_lasso_functionals(*b, state, input, decision);
  if (const auto* l0 = std::get_if<L0Estimator>(&spec))
    return l0_functionals(*l0, state, input, decision);
  return numeric_functionals(std::get<NumericEstimator>(spec), state, input, decision, quad);
}

FixedPointResult solve_fixed_point(const ScalarEstimatorSpec& spec, const SpectralModel& spectral,
                                   double sigma2, const DecoupledInput& input,
                                   const ScalarDecision& decision,
                                   const FixedPointOptions& opts) {
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw InvalidArgument("damping must lie in (0, 1]");
  if (!(sigma2 >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  input.validate();

  double c = opts.c0.value_or(sigma2);
  double q = opts.q0.value_or(input.second_moment());
  QuadratureOptions quad = opts.quad;

  FixedPointResult best;
  bool have_best = false;
  for (int it = 0; it <= opts.max_iter; ++it) {
    const DecoupledState st = tau_theta(spectral, c, q, sigma2);
    if (!(st.theta > 0.0)) throw ConvergenceError("decoupled noise level vanished");
    const Functionals f = functionals(spec, st, input, decision, quad);
    if (f.quadrature_nodes > 0) {
      // Freeze the rule so the map stays smooth across iterations.
      quad.nodes = f.quadrature_nodes;
      quad.adaptive = false;
    }
    FixedPointResult cur;
    cur.c_star = c;
    cur.q_star = q;
    cur.residual_c = std::abs(c * st.theta - st.tau * f.c_corr);
    cur.residual_q = std::abs(q - f.e_mse);
    cur.iterations = it;
    cur.state = st;
    cur.at_solution = f;
    if (!have_best || cur.residual() < best.residual()) {
      best = cur;
      have_best = true;
    }
    if (cur.residual() <= opts.tol) {
      cur.converged = true;
      return cur;
    }
    const double c_next = st.tau * f.c_corr / st.theta;
    c = (1.0 - opts.damping) * c + opts.damping * c_next;
    q = (1.0 - opts.damping) * q + opts.damping * f.e_mse;
  }
  best.iterations = opts.max_iter;
  best.converged = false;
  return best;
}

double metric_value(const FixedPointResult& r, Metric metric) {
  return metric == Metric::kMse ? r.mse() : r.error_rate();
}

EstimatorFamily box_lasso_family(double lower, double upper) {
  return [lower, upper](double lambda) -> ScalarEstimatorSpec {
    return BoxLassoEstimator{lambda, lower, upper};
  };
}

EstimatorFamily classic_lasso_family() {
  return [](double lambda) -> ScalarEstimatorSpec { return BoxLassoEstimator::classic(lambda); };
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 300; ++i) g.push_back(0.005 * i);
  return g;
}

TuneResult tune(const EstimatorFamily& family, const SpectralModel& spectral, double sigma2,
                const DecoupledInput& input, Metric metric,
                const std::optional<ScalarDecision>& decision, const TuneOptions& opts) {
  const std::vector<double> grid = opts.grid.empty() ? default_lambda_grid() : opts.grid;
  TuneResult out;
  bool found = false;
  auto evaluate = [&](double lambda) {
    const ScalarEstimatorSpec spec = family(lambda);
    const ScalarDecision dec = decision.value_or(default_decision(spec, input));
    TunePoint p{lambda, std::numeric_limits<double>::quiet_NaN(), false};
    try {
      const FixedPointResult r = solve_fixed_point(spec, spectral, sigma2, input, dec,
                                                   opts.fixed_point);
      p.converged = r.converged;
      p.value = metric_value(r, metric);
      if (r.converged && (!found || p.value < out.metric_star)) {
        found = true;
        out.lambda_star = lambda;
        out.metric_star = p.value;
        out.at_optimum = r;
      }
    } catch (const ConvergenceError&) {
    }
    out.evaluated.push_back(p);
    return p.converged ? p.value : std::numeric_limits<double>::infinity();
  };

  std::vector<double> values;
  for (double l : grid) values.push_back(evaluate(l));
  if (!found) throw ConvergenceError("no grid point reached a converged fixed point");

  if (opts.refine && grid.size() > 1) {
    const auto i = static_cast<std::size_t>(
        std::distance(grid.begin(), std::find(grid.begin(), grid.end(), out.lambda_star)));
    if (i < grid.size()) {
      const double a = grid[i == 0 ? 0 : i - 1];
      const double b = grid[std::min(i + 1, grid.size() - 1)];
      if (b > a) golden_section(evaluate, a, b, opts.refine_tol);
    }
  }
  return out;
}

std::vector<DictionaryRow> tuning_dictionary(const EstimatorFamily& family,
                                             const SpectralModel& spectral,
                                             const DecoupledInput& input,
                                             const std::vector<double>& snr_db, Metric metric,
                                             const std::optional<ScalarDecision>& decision,
                                             const TuneOptions& opts) {
  if (snr_db.empty()) throw InvalidArgument("SNR grid must not be empty");
  std::vector<DictionaryRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double snr : snr_db) {
    const double sigma2 = input.constellation.power * std::pow(10.0, -snr / 10.0);
    DictionaryRow row{snr, nan, nan, nan, nan, nan, nan, false};
    try {
      const TuneResult t = tune(family, spectral, sigma2, input, metric, decision, opts);
      row.lambda = t.lambda_star;
      row.c_star = t.at_optimum.c_star;
      row.q_star = t.at_optimum.q_star;
      row.residual = t.at_optimum.residual();
      row.mse = t.at_optimum.mse();
      row.error_rate = t.at_optimum.error_rate();
      row.converged = t.at_optimum.converged;
    } catch (const ConvergenceError&) {
    }
    rows.push_back(row);
  }
  return rows;
}

void write_dictionary_csv(std::ostream& os, const std::vector<DictionaryRow>& rows) {
  os << "snr_db,lambda,c_star,q_star,residual,mse,error_rate,converged\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  for (const auto& r : rows) {
    os << std::fixed << std::setprecision(4) << r.snr_db << std::scientific
       << std::setprecision(10) << ',' << r.lambda << ',' << r.c_star << ',' << r.q_star << ','
       << r.residual << ',' << r.mse << ',' << r.error_rate << ',' << (r.converged ? 1 : 0)
       << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

const GaussHermite& gauss_hermite(int n) {
  if (n < 1 || n > 2048) throw InvalidArgument("Gauss-Hermite order out of range");
  static std::mutex mu;
  static std::map<int, GaussHermite> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  // Golub-Welsch: eigen-decomposition of the Jacobi matrix of the Hermite
  // recurrence.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussHermite rule;
  for (int k = 0; k < n; ++k) {
    rule.nodes.push_back(es.eigenvalues()[k]);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights.push_back(std::sqrt(std::numbers::pi) * v0 * v0);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace masm
