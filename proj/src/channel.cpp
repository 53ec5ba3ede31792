#include "masm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "masm/error.hpp"

namespace masm {

ChannelRealization sample_rayleigh(int n, int m, Rng& rng) {
  if (n < 1 || m < 1) throw InvalidArgument("channel dimensions must be positive");
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 / m));
  ChannelRealization ch{Eigen::MatrixXcd(n, m)};
  for (Eigen::Index j = 0; j < ch.h.cols(); ++j)
    for (Eigen::Index i = 0; i < ch.h.rows(); ++i) {
      const double re = g(rng);
      const double im = g(rng);
      ch.h(i, j) = {re, im};
    }
  return ch;
}

ChannelRealization sample_rayleigh(int n, int m, std::uint64_t seed) {
  Rng rng(seed);
  return sample_rayleigh(n, m, rng);
}

Eigen::VectorXcd add_awgn(const Eigen::Ref<const Eigen::VectorXcd>& signal, double sigma2,
                          Rng& rng) {
  if (!(sigma2 >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  Eigen::VectorXcd out = signal;
  if (sigma2 == 0.0) return out;
  std::normal_distribution<double> g(0.0, std::sqrt(sigma2 / 2.0));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double re = g(rng);
    const double im = g(rng);
    out[i] += std::complex<double>(re, im);
  }
  return out;
}

Eigen::VectorXcd add_awgn(const Eigen::Ref<const Eigen::VectorXcd>& signal, double sigma2,
                          std::uint64_t seed) {
  Rng rng(seed);
  return add_awgn(signal, sigma2, rng);
}

double mean_squared_singular_value(const Eigen::Ref<const Eigen::MatrixXcd>& h) {
  return h.squaredNorm() / static_cast<double>(h.cols());
}

void write_channel_csv(std::ostream& os, const ChannelRealization& ch) {
  const auto old = os.precision(17);
  for (Eigen::Index i = 0; i < ch.h.rows(); ++i) {
    for (Eigen::Index j = 0; j < ch.h.cols(); ++j)
      os << (j ? "," : "") << '"' << ch.h(i, j).real() << ',' << ch.h(i, j).imag() << '"';
    os << '\n';
  }
  os.precision(old);
}

SpectralModel::SpectralModel(std::string tag, Fn r, std::optional<Fn> dr, double omega_max)
    : tag_(std::move(tag)), r_(std::move(r)), dr_(std::move(dr)), omega_max_(omega_max) {
  if (!r_) throw InvalidArgument("spectral model requires an R-transform");
}

double SpectralModel::r(double omega) const {
  if (!(omega < omega_max_)) throw InvalidArgument("R-transform evaluated at or beyond its pole");
  return r_(omega);
}

double SpectralModel::dr(double omega) const {
  if (!(omega < omega_max_)) throw InvalidArgument("R-transform evaluated at or beyond its pole");
  if (dr_) return (*dr_)(omega);
  double h = 1e-6 * std::max(1.0, std::abs(omega));
  // Keep the stencil on the analytic side of the pole.
  h = std::min(h, 0.5 * (omega_max_ - omega));
  return (r_(omega + h) - r_(omega - h)) / (2.0 * h);
}

SpectralModel SpectralModel::without_derivative() const {
  return SpectralModel(tag_ + "/fd", r_, std::nullopt, omega_max_);
}

SpectralModel rayleigh_r_transform(double xi) {
  if (!(xi > 0.0)) throw InvalidArgument("effective load must be positive");
  return SpectralModel(
      "rayleigh", [xi](double w) { return 1.0 / (xi * (1.0 - w)); },
      [xi](double w) { return 1.0 / (xi * (1.0 - w) * (1.0 - w)); }, 1.0);
}

SpectralModel custom_spectrum(std::string tag, SpectralModel::Fn r,
                              std::optional<SpectralModel::Fn> dr, double omega_max) {
  return SpectralModel(std::move(tag), std::move(r), std::move(dr), omega_max);
}

double ExperimentConfig::snr_db() const { return 10.0 * std::log10(power / sigma2); }

void ExperimentConfig::set_snr_db(double db) { sigma2 = power * std::pow(10.0, -db / 10.0); }

void ExperimentConfig::validate() const {
  if (users < 1 || antennas < 1 || active < 1 || receive < 1)
    throw InvalidArgument("system dimensions must be positive");
  if (active > antennas) throw InvalidArgument("L_u must not exceed M_u");
  if (!(sigma2 > 0.0)) throw InvalidArgument("noise variance must be positive");
  if (!(power > 0.0)) throw InvalidArgument("symbol power must be positive");
  if (trials < 1) throw InvalidArgument("trial count must be positive");
}

}  // namespace masm
