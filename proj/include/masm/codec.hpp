#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace masm {

using cplx = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

/// Symbol alphabet used on the active antennas.
///
/// Point k carries the bit pattern given by the big-endian binary form of k.
struct Constellation {
  std::vector<cplx> points;
  int bits_per_symbol = 0;
  double power = 1.0;

  /// Space shift keying: a single point sqrt(P), no symbol bits.
  static Constellation ssk(double power = 1.0);
  /// Bit 0 maps to -sqrt(P), bit 1 to +sqrt(P).
  static Constellation bpsk(double power = 1.0);
  /// Gray-mapped 4-QAM, first bit on the real axis, second on the imaginary
  /// axis, 0 meaning the negative half-axis.
  static Constellation qam4(double power = 1.0);
  /// Preset by name: "ssk", "bpsk" or "qam4".
  static Constellation preset(const std::string& name, double power = 1.0);

  std::size_t size() const { return points.size(); }
  bool is_real() const;
  /// Index of the closest point, ties broken by lowest index.
  int nearest(cplx v) const;
  void validate() const;
};

/// Indexed set of active-antenna supports for one user.
struct SmCodebook {
  int m_u = 0;
  int l_u = 0;
  int index_bits = 0;
  /// 0-based antenna indices, ascending within each support; position in
  /// this vector is the modulation index.
  std::vector<std::vector<int>> supports;

  std::size_t size() const { return supports.size(); }
  /// Bits carried per channel use: I + L_u S.
  int payload_bits(const Constellation& c) const {
    return index_bits + l_u * c.bits_per_symbol;
  }
  void validate() const;
};

struct Lexicographic {};
struct SeededRandom {
  std::uint64_t seed = 0;
};
struct ExplicitSupports {
  std::vector<std::vector<int>> supports;  // 0-based
};
using CodebookPolicy = std::variant<Lexicographic, SeededRandom, ExplicitSupports>;

/// floor(log2 binom(m_u, l_u)), evaluated on the exact integer binomial.
int index_bits(int m_u, int l_u);

SmCodebook build_codebook(int m_u, int l_u, const CodebookPolicy& policy = Lexicographic{});

/// Maps one user's payload onto a length-M_u transmit vector.
Eigen::VectorXcd encode(const SmCodebook& codebook, const Constellation& constellation,
                        std::span<const std::uint8_t> payload);

/// Inverse of encode. Inputs whose support is not a codeword are projected onto
/// the support with the largest total magnitude (lowest index on ties), then each
/// active entry is demapped to its nearest constellation point.
Bits decode_hard(const SmCodebook& codebook, const Constellation& constellation,
                 const Eigen::Ref<const Eigen::VectorXcd>& detected);

/// Encodes K users back to back; payload holds K * payload_bits bits.
Eigen::VectorXcd encode_users(const SmCodebook& codebook, const Constellation& constellation,
                              std::span<const std::uint8_t> payload, int users);

struct RateBounds {
  double r_bar = 0.0;
  int index_bits = 0;
  double c_const = 0.0;
  double c_lower = 0.0;
  double c_upper = 0.0;
  double stirling_lo = 0.0;
  double stirling_hi = 0.0;
  bool has_bounds = false;  // false when l_u == m_u
};

/// Exact per-antenna rate and its large-array expansion constants.
RateBounds per_antenna_rate(int m_u, int l_u, int bits_per_symbol);

double binary_entropy(double p);

struct ProbabilityMass {
  cplx value;
  double probability;
};

struct MomentRequest {
  int l = 1;
  int t = 1;
  int delta = 0;
};

struct MomentEstimate {
  MomentRequest request;
  cplx empirical;
  cplx reference;
};

struct EmpiricalStats {
  std::vector<ProbabilityMass> marginal;   // over S_0, zero first
  std::vector<ProbabilityMass> reference;  // i.i.d. sparse reference law
  std::vector<MomentEstimate> moments;
};

/// Monte Carlo statistics of entry `entry` (0-based, over all K users) of the
/// concatenated transmit vector, from J uniformly random payloads.
EmpiricalStats empirical_stats(const SmCodebook& codebook, const Constellation& constellation,
                               int users, int entry, int draws, std::uint64_t seed,
                               std::span<const MomentRequest> moments = {});

/// Exact marginal of antenna `antenna` (0-based) of a single user, from codebook
/// membership counts.
std::vector<ProbabilityMass> exact_marginal(const SmCodebook& codebook,
                                            const Constellation& constellation, int antenna);

/// i.i.d. reference law (1 - eta) at zero, 2^-S eta at each point.
std::vector<ProbabilityMass> reference_marginal(const Constellation& constellation, double eta);

/// Text format: header "M_u L_u I", then one support per line as 1-based
/// antenna indices in modulation-index order.
void write_codebook(std::ostream& os, const SmCodebook& codebook);
SmCodebook read_codebook(std::istream& is);

}  // namespace masm
