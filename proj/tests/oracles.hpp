#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// tests. None of them call into the library's solvers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace oracle {

using cplx = std::complex<double>;

// Pascal's triangle; exact for n <= 66.
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::vector<std::uint64_t> row(static_cast<std::size_t>(n) + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i)
    for (int j = i; j >= 1; --j) row[j] += row[j - 1];
  return row[k];
}

inline double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// Minimizer of a scalar function on [lo, hi]: dense grid, then repeated
// zooming around the best grid point.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi,
                          int points = 2001, int rounds = 6) {
  double best = lo;
  double best_val = f(lo);
  for (int r = 0; r < rounds; ++r) {
    const double h = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) {
      const double v = lo + h * i;
      const double fv = f(v);
      if (fv < best_val) {
        best_val = fv;
        best = v;
      }
    }
    const double a = std::max(lo, best - 2.0 * h);
    const double b = std::min(hi, best + 2.0 * h);
    lo = a;
    hi = b;
  }
  return best;
}

// argmin_v (w - v)^2 / 2 + kappa |v| over [-lower, upper] by grid search.
inline double prox_by_grid(double w, double kappa, double lower, double upper) {
  const double lo = std::isfinite(lower) ? -lower : std::min(0.0, w) - std::abs(w) - 1.0;
  const double hi = std::isfinite(upper) ? upper : std::max(0.0, w) + std::abs(w) + 1.0;
  auto f = [&](double v) { return 0.5 * (w - v) * (w - v) + kappa * std::abs(v); };
  return grid_argmin(f, lo, hi);
}

// Cyclic coordinate descent for ||y - Hv||^2 + lambda ||v||_1, v real in
// [-lower, upper]^M.
inline Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXcd& h,
                                                const Eigen::VectorXcd& y, double lambda,
                                                double lower, double upper, int sweeps = 20000) {
  const Eigen::MatrixXd g = (h.adjoint() * h).real();
  const Eigen::VectorXd b = (h.adjoint() * y).real();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(h.cols());
  for (int s = 0; s < sweeps; ++s) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (g(j, j) == 0.0) continue;
      // 1-D problem: g_jj v^2 - 2 (b_j - sum_{k != j} g_jk v_k) v + lambda |v|.
      const double r = b[j] - g.row(j).dot(v) + g(j, j) * v[j];
      const double kappa = lambda / 2.0;
      double nv = 0.0;
      if (r > kappa) nv = (r - kappa) / g(j, j);
      if (r < -kappa) nv = (r + kappa) / g(j, j);
      nv = std::clamp(nv, -lower, upper);
      change = std::max(change, std::abs(nv - v[j]));
      v[j] = nv;
    }
    if (change < 1e-14) break;
  }
  return v;
}

// Recursive enumeration of ||y - Hv||^2 + a ||v||_0 over alphabet^M,
// lexicographic with the first minimum kept.
inline Eigen::VectorXcd l0_by_recursion(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& y,
                                        double a, const std::vector<cplx>& alphabet) {
  const Eigen::Index m = h.cols();
  Eigen::VectorXcd cur = Eigen::VectorXcd::Zero(m);
  Eigen::VectorXcd best = cur;
  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index)> rec = [&](Eigen::Index pos) {
    if (pos == m) {
      int nnz = 0;
      for (Eigen::Index j = 0; j < m; ++j) nnz += cur[j] != cplx(0.0);
      const double cost = (y - h * cur).squaredNorm() + a * nnz;
      if (cost < best_cost) {
        best_cost = cost;
        best = cur;
      }
      return;
    }
    for (const auto& s : alphabet) {
      cur[pos] = s;
      rec(pos + 1);
    }
  };
  rec(0);
  return best;
}

// Minimum-distance search over concatenations of per-user codewords.
// `words` lists every codeword of one user.
inline Eigen::VectorXcd codeword_by_recursion(const Eigen::MatrixXcd& h,
                                              const Eigen::VectorXcd& y,
                                              const std::vector<Eigen::VectorXcd>& words,
                                              int users) {
  const Eigen::Index mu = words.front().size();
  Eigen::VectorXcd cur = Eigen::VectorXcd::Zero(mu * users);
  Eigen::VectorXcd best = cur;
  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(int)> rec = [&](int k) {
    if (k == users) {
      const double cost = (y - h * cur).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = cur;
      }
      return;
    }
    for (const auto& w : words) {
      cur.segment(k * mu, mu) = w;
      rec(k + 1);
    }
  };
  rec(0);
  return best;
}

struct McMoments {
  double c = 0.0, c_se = 0.0;
  double e = 0.0, e_se = 0.0;
  double err = 0.0, err_se = 0.0;
};

// Sample-mean estimates of E[Re((x* - x) conj z)], E|x* - x|^2 and the
// error probability of the decoupled scalar channel y = x + theta z,
// z ~ CN(0, 1). `estimate` maps y to x*, `decide` maps x* to a decision.
inline McMoments scalar_monte_carlo(const std::vector<cplx>& support,
                                    const std::vector<double>& weights, double theta,
                                    const std::function<cplx(cplx)>& estimate,
                                    const std::function<cplx(cplx)>& decide, long samples,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  double sc = 0, sc2 = 0, se = 0, se2 = 0, sr = 0;
  for (long i = 0; i < samples; ++i) {
    const cplx x = support[static_cast<std::size_t>(pick(rng))];
    const double zr = n(rng);
    const double zi = n(rng);
    const cplx z(zr, zi);
    const cplx xs = estimate(x + theta * z);
    const cplx d = xs - x;
    const double c = d.real() * zr + d.imag() * zi;
    const double e = std::norm(d);
    sc += c;
    sc2 += c * c;
    se += e;
    se2 += e * e;
    sr += std::abs(decide(xs) - x) > 1e-9 ? 1.0 : 0.0;
  }
  const double ns = static_cast<double>(samples);
  McMoments m;
  m.c = sc / ns;
  m.c_se = std::sqrt(std::max(0.0, sc2 / ns - m.c * m.c) / ns);
  m.e = se / ns;
  m.e_se = std::sqrt(std::max(0.0, se2 / ns - m.e * m.e) / ns);
  m.err = sr / ns;
  m.err_se = std::sqrt(std::max(m.err * (1.0 - m.err), 1.0 / ns) / ns);
  return m;
}

}  // namespace oracle
