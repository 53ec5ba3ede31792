#include "masm/codec.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "masm/error.hpp"
#include "masm/random.hpp"

namespace masm {

namespace {

using boost::multiprecision::cpp_int;

constexpr int kMaxIndexBits = 24;

cpp_int binomial(int n, int k) {
  k = std::min(k, n - k);
  cpp_int r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

void check_dims(int m_u, int l_u) {
  if (m_u < 1 || l_u < 1 || l_u > m_u) {
    std::ostringstream os;
    os << "invalid dimensions: M_u=" << m_u << ", L_u=" << l_u;
    throw InvalidArgument(os.str());
  }
}

// Advances a combination to its lexicographic successor; false after the last.
bool next_combination(std::vector<int>& comb, int n) {
  const int k = static_cast<int>(comb.size());
  int i = k - 1;
  while (i >= 0 && comb[i] == n - k + i) --i;
  if (i < 0) return false;
  ++comb[i];
  for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
  return true;
}

std::uint64_t bits_to_uint(std::span<const std::uint8_t> bits) {
  std::uint64_t v = 0;
  for (auto b : bits) v = (v << 1) | (b & 1u);
  return v;
}

void append_uint(Bits& out, std::uint64_t v, int width) {
  for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> i) & 1u));
}

}  // namespace

Constellation Constellation::ssk(double power) {
  return {{cplx(std::sqrt(power), 0.0)}, 0, power};
}

Constellation Constellation::bpsk(double power) {
  const double r = std::sqrt(power);
  return {{cplx(-r, 0.0), cplx(r, 0.0)}, 1, power};
}

Constellation Constellation::qam4(double power) {
  const double h = std::sqrt(power / 2.0);
  return {{cplx(-h, -h), cplx(-h, h), cplx(h, -h), cplx(h, h)}, 2, power};
}

Constellation Constellation::preset(const std::string& name, double power) {
  if (name == "ssk") return ssk(power);
  if (name == "bpsk") return bpsk(power);
  if (name == "qam4" || name == "4qam" || name == "qam") return qam4(power);
  throw InvalidArgument("unknown constellation '" + name + "'");
}

bool Constellation::is_real() const {
  return std::all_of(points.begin(), points.end(), [](cplx p) { return p.imag() == 0.0; });
}

int Constellation::nearest(cplx v) const {
  int best = 0;
  double best_d = std::norm(v - points[0]);
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double d = std::norm(v - points[k]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

void Constellation::validate() const {
  if (bits_per_symbol < 0 || bits_per_symbol > 16)
    throw InvalidArgument("constellation bit width out of range");
  if (points.size() != (std::size_t{1} << bits_per_symbol))
    throw InvalidArgument("constellation must hold exactly 2^S points");
  if (!(power > 0.0)) throw InvalidArgument("constellation power must be positive");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] == cplx(0.0))
      throw InvalidArgument("constellation points must be nonzero");
    for (std::size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) throw InvalidArgument("constellation points must be distinct");
  }
}

void SmCodebook::validate() const {
  check_dims(m_u, l_u);
  if (index_bits != masm::index_bits(m_u, l_u))
    throw InvalidArgument("codebook index bit count inconsistent with dimensions");
  if (supports.size() != (std::size_t{1} << index_bits))
    throw InvalidArgument("codebook must hold exactly 2^I supports");
  std::set<std::vector<int>> seen;
  for (const auto& s : supports) {
    if (static_cast<int>(s.size()) != l_u)
      throw InvalidArgument("codebook support has wrong size");
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] < 0 || s[j] >= m_u) throw InvalidArgument("antenna index out of range");
      if (j > 0 && s[j] <= s[j - 1])
        throw InvalidArgument("support indices must be strictly ascending");
    }
    if (!seen.insert(s).second) throw InvalidArgument("duplicate support in codebook");
  }
}

int index_bits(int m_u, int l_u) {
  check_dims(m_u, l_u);
  const cpp_int b = binomial(m_u, l_u);
  return static_cast<int>(boost::multiprecision::msb(b));
}

SmCodebook build_codebook(int m_u, int l_u, const CodebookPolicy& policy) {
  SmCodebook cb;
  cb.m_u = m_u;
  cb.l_u = l_u;
  cb.index_bits = index_bits(m_u, l_u);
  if (cb.index_bits > kMaxIndexBits)
    throw InvalidArgument("codebook with more than 2^24 supports is not supported");
  const std::size_t count = std::size_t{1} << cb.index_bits;

  if (std::holds_alternative<Lexicographic>(policy)) {
    std::vector<int> comb(l_u);
    std::iota(comb.begin(), comb.end(), 0);
    cb.supports.reserve(count);
    do {
      cb.supports.push_back(comb);
    } while (cb.supports.size() < count && next_combination(comb, m_u));
  } else if (const auto* r = std::get_if<SeededRandom>(&policy)) {
    Rng rng(r->seed);
    const cpp_int total = binomial(m_u, l_u);
    if (total <= (1u << 20)) {
      std::vector<std::vector<int>> all;
      std::vector<int> comb(l_u);
      std::iota(comb.begin(), comb.end(), 0);
      do {
        all.push_back(comb);
      } while (next_combination(comb, m_u));
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(count);
      cb.supports = std::move(all);
    } else {
      // Rejection sampling; 2^I > binom/2 keeps the acceptance rate above 1/2.
      std::set<std::vector<int>> seen;
      std::vector<int> antennas(m_u);
      while (cb.supports.size() < count) {
        std::iota(antennas.begin(), antennas.end(), 0);
        for (int j = 0; j < l_u; ++j) {
          std::uniform_int_distribution<int> pick(j, m_u - 1);
          std::swap(antennas[j], antennas[pick(rng)]);
        }
        std::vector<int> s(antennas.begin(), antennas.begin() + l_u);
        std::sort(s.begin(), s.end());
        if (seen.insert(s).second) cb.supports.push_back(std::move(s));
      }
    }
  } else {
    cb.supports = std::get<ExplicitSupports>(policy).supports;
    for (auto& s : cb.supports) std::sort(s.begin(), s.end());
  }
  cb.validate();
  return cb;
}

Eigen::VectorXcd encode(const SmCodebook& codebook, const Constellation& constellation,
                        std::span<const std::uint8_t> payload) {
  const int s_bits = constellation.bits_per_symbol;
  if (static_cast<int>(payload.size()) != codebook.payload_bits(constellation))
    throw InvalidArgument("payload length must equal I + L_u * S");
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(codebook.m_u);
  const auto index = bits_to_uint(payload.first(codebook.index_bits));
  const auto& support = codebook.supports[index];
  for (int j = 0; j < codebook.l_u; ++j) {
    const auto sym = bits_to_uint(payload.subspan(codebook.index_bits + j * s_bits, s_bits));
    x[support[j]] = constellation.points[sym];
  }
  return x;
}

Eigen::VectorXcd encode_users(const SmCodebook& codebook, const Constellation& constellation,
                              std::span<const std::uint8_t> payload, int users) {
  const int per_user = codebook.payload_bits(constellation);
  if (users < 1 || static_cast<int>(payload.size()) != per_user * users)
    throw InvalidArgument("payload length must equal K * (I + L_u * S)");
  Eigen::VectorXcd x(static_cast<Eigen::Index>(users) * codebook.m_u);
  for (int k = 0; k < users; ++k)
    x.segment(static_cast<Eigen::Index>(k) * codebook.m_u, codebook.m_u) =
        encode(codebook, constellation, payload.subspan(k * per_user, per_user));
  return x;
}

Bits decode_hard(const SmCodebook& codebook, const Constellation& constellation,
                 const Eigen::Ref<const Eigen::VectorXcd>& detected) {
  if (detected.size() != codebook.m_u)
    throw InvalidArgument("detected vector length must equal M_u");

  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    double score = 0.0;
    for (int a : codebook.supports[i]) score += std::abs(detected[a]);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }

  Bits out;
  out.reserve(codebook.payload_bits(constellation));
  append_uint(out, best, codebook.index_bits);
  for (int a : codebook.supports[best])
    append_uint(out, static_cast<std::uint64_t>(constellation.nearest(detected[a])),
                constellation.bits_per_symbol);
  return out;
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

RateBounds per_antenna_rate(int m_u, int l_u, int bits_per_symbol) {
  check_dims(m_u, l_u);
  if (bits_per_symbol < 0) throw InvalidArgument("bits per symbol must be non-negative");
  RateBounds rb;
  rb.index_bits = index_bits(m_u, l_u);
  const double m = m_u;
  const double eta = static_cast<double>(l_u) / m_u;
  const double s = bits_per_symbol;
  rb.r_bar = (rb.index_bits + l_u * s) / m;
  if (l_u == m_u) return rb;

  using std::numbers::e;
  using std::numbers::pi;
  const double h2 = binary_entropy(eta);
  const double log_var = std::log2(eta - eta * eta);
  rb.has_bounds = true;
  rb.c_const = 2.0 * m * (rb.r_bar - eta * s - h2) + std::log2(m);
  rb.c_lower = std::log2(pi / (2.0 * std::pow(e, 4))) - log_var;
  rb.c_upper = std::log2(e * e / (4.0 * pi * pi)) - log_var;

  // Stirling sandwich on the binomial: log Theta_0 + log Theta_1 + L_u S.
  const double log_theta0 = -0.5 * std::log2(m) - 0.5 * log_var;
  const double log_theta1 = m * h2;
  const double xi = log_theta0 + log_theta1 + l_u * s;
  rb.stirling_lo = (std::log2(std::sqrt(2.0 * pi) / (e * e)) - 1.0 + xi) / m;
  rb.stirling_hi = (std::log2(e / (2.0 * pi)) + xi) / m;
  return rb;
}

std::vector<ProbabilityMass> reference_marginal(const Constellation& constellation, double eta) {
  std::vector<ProbabilityMass> out;
  out.push_back({cplx(0.0), 1.0 - eta});
  const double w = eta / static_cast<double>(constellation.size());
  for (auto p : constellation.points) out.push_back({p, w});
  return out;
}

std::vector<ProbabilityMass> exact_marginal(const SmCodebook& codebook,
                                            const Constellation& constellation, int antenna) {
  if (antenna < 0 || antenna >= codebook.m_u) throw InvalidArgument("antenna index out of range");
  std::size_t hits = 0;
  for (const auto& s : codebook.supports)
    hits += static_cast<std::size_t>(std::count(s.begin(), s.end(), antenna));
  const double active = static_cast<double>(hits) / static_cast<double>(codebook.size());
  return reference_marginal(constellation, active);
}

namespace {

cplx ipow(cplx v, int k) {
  cplx r = 1.0;
  for (int i = 0; i < k; ++i) r *= v;
  return r;
}

cplx reference_raw_moment(const Constellation& c, double eta, int k) {
  if (k == 0) return 1.0;
  cplx acc = 0.0;
  for (auto p : c.points) acc += ipow(p, k);
  return eta * acc / static_cast<double>(c.size());
}

}  // namespace

EmpiricalStats empirical_stats(const SmCodebook& codebook, const Constellation& constellation,
                               int users, int entry, int draws, std::uint64_t seed,
                               std::span<const MomentRequest> moments) {
  if (draws < 1) throw InvalidArgument("number of draws must be positive");
  if (users < 1) throw InvalidArgument("number of users must be positive");
  const int m_total = users * codebook.m_u;
  if (entry < 0 || entry >= m_total) throw InvalidArgument("entry index out of range");
  for (const auto& r : moments) {
    const int other = entry + r.delta;
    if (other < 0 || other >= m_total) throw InvalidArgument("moment offset out of range");
    if (r.l < 0 || r.t < 0) throw InvalidArgument("moment exponents must be non-negative");
  }

  const int per_user = codebook.payload_bits(constellation);
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  Bits payload(static_cast<std::size_t>(per_user) * users);

  std::map<int, std::size_t> counts;  // -1 for zero, otherwise point index
  std::vector<cplx> sums(moments.size(), cplx(0.0));
  for (int j = 0; j < draws; ++j) {
    for (auto& b : payload) b = coin(rng) ? 1 : 0;
    const Eigen::VectorXcd x = encode_users(codebook, constellation, payload, users);
    const cplx v = x[entry];
    counts[v == cplx(0.0) ? -1 : constellation.nearest(v)] += 1;
    for (std::size_t r = 0; r < moments.size(); ++r)
      sums[r] += ipow(v, moments[r].l) * ipow(x[entry + moments[r].delta], moments[r].t);
  }

  const double eta = static_cast<double>(codebook.l_u) / codebook.m_u;
  EmpiricalStats st;
  st.reference = reference_marginal(constellation, eta);
  st.marginal.push_back({cplx(0.0), static_cast<double>(counts[-1]) / draws});
  for (std::size_t k = 0; k < constellation.size(); ++k)
    st.marginal.push_back(
        {constellation.points[k], static_cast<double>(counts[static_cast<int>(k)]) / draws});
  for (std::size_t r = 0; r < moments.size(); ++r) {
    const auto& req = moments[r];
    const cplx ref = req.delta == 0
                         ? reference_raw_moment(constellation, eta, req.l + req.t)
                         : reference_raw_moment(constellation, eta, req.l) *
                               reference_raw_moment(constellation, eta, req.t);
    st.moments.push_back({req, sums[r] / static_cast<double>(draws), ref});
  }
  return st;
}

void write_codebook(std::ostream& os, const SmCodebook& codebook) {
  os << codebook.m_u << ' ' << codebook.l_u << ' ' << codebook.index_bits << '\n';
  for (const auto& s : codebook.supports) {
    for (std::size_t j = 0; j < s.size(); ++j) os << (j ? " " : "") << s[j] + 1;
    os << '\n';
  }
}

SmCodebook read_codebook(std::istream& is) {
  SmCodebook cb;
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("codebook: missing header");
  {
    std::istringstream hs(line);
    if (!(hs >> cb.m_u >> cb.l_u >> cb.index_bits))
      throw InvalidArgument("codebook: malformed header");
  }
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<int> s;
    int a = 0;
    while (ls >> a) s.push_back(a - 1);
    if (!ls.eof()) throw InvalidArgument("codebook: malformed support line");
    cb.supports.push_back(std::move(s));
  }
  cb.validate();
  return cb;
}

}  // namespace masm
