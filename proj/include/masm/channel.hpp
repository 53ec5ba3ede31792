#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "masm/random.hpp"

namespace masm {

struct ChannelRealization {
  Eigen::MatrixXcd h;  // N x M

  Eigen::Index rows() const { return h.rows(); }
  Eigen::Index cols() const { return h.cols(); }
  /// Effective load M / N.
  double load() const { return static_cast<double>(h.cols()) / static_cast<double>(h.rows()); }
};

/// i.i.d. CN(0, 1/M) entries: each real component has variance 1/(2M).
ChannelRealization sample_rayleigh(int n, int m, std::uint64_t seed);
ChannelRealization sample_rayleigh(int n, int m, Rng& rng);

/// Adds circular complex Gaussian noise of per-entry variance sigma2.
Eigen::VectorXcd add_awgn(const Eigen::Ref<const Eigen::VectorXcd>& signal, double sigma2,
                          std::uint64_t seed);
Eigen::VectorXcd add_awgn(const Eigen::Ref<const Eigen::VectorXcd>& signal, double sigma2,
                          Rng& rng);

/// tr(H^H H) / M, the empirical mean of the squared singular values.
double mean_squared_singular_value(const Eigen::Ref<const Eigen::MatrixXcd>& h);

/// Row-major CSV dump for debugging; each cell is a quoted "re,im" pair.
void write_channel_csv(std::ostream& os, const ChannelRealization& ch);

/// R-transform of the asymptotic squared singular value law of the channel.
///
/// Only the Rayleigh preset ships in closed form. Other right unitarily
/// invariant ensembles plug in through `custom_spectrum`.
class SpectralModel {
 public:
  using Fn = std::function<double(double)>;

  SpectralModel(std::string tag, Fn r, std::optional<Fn> dr, double omega_max);

  /// R(omega); throws InvalidArgument at or beyond the pole omega_max.
  double r(double omega) const;
  /// dR/domega, analytic when available, otherwise central differences with
  /// step 1e-6 max(1, |omega|).
  double dr(double omega) const;
  bool has_analytic_derivative() const { return dr_.has_value(); }
  const std::string& tag() const { return tag_; }
  double omega_max() const { return omega_max_; }
  /// Same model with the analytic derivative dropped.
  SpectralModel without_derivative() const;

 private:
  std::string tag_;
  Fn r_;
  std::optional<Fn> dr_;
  double omega_max_;
};

/// R(omega) = xi^-1 / (1 - omega) for i.i.d. entries of variance 1/M, xi = M/N.
SpectralModel rayleigh_r_transform(double xi);

/// User-supplied ensemble. `omega_max` is the first singularity (exclusive).
SpectralModel custom_spectrum(std::string tag, SpectralModel::Fn r,
                              std::optional<SpectralModel::Fn> dr = std::nullopt,
                              double omega_max = 1.0);

struct ExperimentConfig {
  int users = 10;          // K
  int antennas = 8;        // M_u
  int active = 1;          // L_u
  int receive = 160;       // N
  double sigma2 = 0.1;
  double power = 1.0;      // P
  std::string constellation = "ssk";
  std::uint64_t seed = 1;
  std::uint64_t codebook_seed = 0;
  bool random_codebook = false;
  int trials = 1000;

  double eta() const { return static_cast<double>(active) / antennas; }
  int total_antennas() const { return users * antennas; }  // M
  int total_active() const { return users * active; }      // L
  double xi() const { return static_cast<double>(total_antennas()) / receive; }
  double alpha() const { return static_cast<double>(users) / receive; }
  double xi_user() const { return static_cast<double>(antennas) / receive; }
  double snr_db() const;
  void set_snr_db(double db);
  void validate() const;
};

}  // namespace masm
