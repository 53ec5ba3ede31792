#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "masm/codec.hpp"
#include "masm/error.hpp"
#include "masm/random.hpp"

namespace masm {
namespace {

Bits uint_bits(std::uint64_t v, int width) {
  Bits b;
  for (int i = width - 1; i >= 0; --i) b.push_back((v >> i) & 1u);
  return b;
}

SmCodebook five_two_codebook() {
  // Pairs (j, l) with j in {1, 2}, j < l <= 5, plus (3, 4); 0-based here.
  return build_codebook(
      5, 2, ExplicitSupports{{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}}});
}

TEST(IndexBits, KnownValues) {
  EXPECT_EQ(index_bits(8, 1), 3);
  EXPECT_EQ(index_bits(5, 2), 3);
  EXPECT_EQ(index_bits(16, 2), 6);
  EXPECT_EQ(index_bits(4, 4), 0);
  EXPECT_THROW(index_bits(3, 4), InvalidArgument);
  EXPECT_THROW(index_bits(0, 0), InvalidArgument);
}

TEST(IndexBits, BracketsExactBinomial) {
  for (int m = 1; m <= 64; ++m)
    for (int l = 1; l <= m; ++l) {
      const std::uint64_t b = oracle::binomial(m, l);
      const int i = index_bits(m, l);
      ASSERT_LE(std::uint64_t{1} << i, b) << m << "," << l;
      ASSERT_LT(b, std::uint64_t{1} << (i + 1)) << m << "," << l;
    }
}

TEST(Codebook, LexicographicPrefix) {
  const SmCodebook cb = build_codebook(5, 2);
  ASSERT_EQ(cb.size(), 8u);
  EXPECT_EQ(cb.supports.front(), (std::vector<int>{0, 1}));
  EXPECT_EQ(cb.supports[4], (std::vector<int>{1, 2}));
  EXPECT_EQ(cb.supports.back(), (std::vector<int>{2, 3}));
}

TEST(Codebook, SeededRandomIsDistinctAndReproducible) {
  const SmCodebook a = build_codebook(16, 2, SeededRandom{7});
  const SmCodebook b = build_codebook(16, 2, SeededRandom{7});
  const SmCodebook c = build_codebook(16, 2, SeededRandom{8});
  ASSERT_EQ(a.size(), 64u);
  EXPECT_EQ(a.supports, b.supports);
  EXPECT_NE(a.supports, c.supports);
  std::set<std::vector<int>> unique(a.supports.begin(), a.supports.end());
  EXPECT_EQ(unique.size(), 64u);
}

TEST(Codebook, SeededRandomLargeSpaceUsesRejection) {
  const SmCodebook cb = build_codebook(40, 4, SeededRandom{1});
  EXPECT_EQ(cb.size(), std::size_t{1} << index_bits(40, 4));
}

TEST(Codebook, RejectsBadExplicitSets) {
  EXPECT_THROW(build_codebook(5, 2, ExplicitSupports{{{0, 1}}}), InvalidArgument);
  auto dup = ExplicitSupports{{{0, 1}, {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {1, 4}, {2, 3}}};
  EXPECT_THROW(build_codebook(5, 2, dup), InvalidArgument);
  auto range = ExplicitSupports{{{0, 9}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}}};
  EXPECT_THROW(build_codebook(5, 2, range), InvalidArgument);
}

TEST(Codebook, FileRoundTrip) {
  const SmCodebook cb = build_codebook(16, 2, SeededRandom{3});
  std::stringstream ss;
  write_codebook(ss, cb);
  const SmCodebook back = read_codebook(ss);
  EXPECT_EQ(back.supports, cb.supports);
  EXPECT_EQ(back.index_bits, 6);

  std::stringstream bad("5 2 3\n1 2\n");
  EXPECT_THROW(read_codebook(bad), InvalidArgument);
}

TEST(Encode, SskAllZeroPayloadUsesFirstAntenna) {
  const SmCodebook cb = build_codebook(8, 1);
  const Bits p{0, 0, 0};
  const Eigen::VectorXcd x = encode(cb, Constellation::ssk(), p);
  EXPECT_EQ(x[0], cplx(1.0));
  EXPECT_DOUBLE_EQ(x.squaredNorm(), 1.0);
}

TEST(Encode, BpskExampleCodebook) {
  const SmCodebook cb = five_two_codebook();
  // Index 101 -> support {2, 4} (1-based); symbols 1 then 0.
  const Bits p{1, 0, 1, 1, 0};
  const Eigen::VectorXcd x = encode(cb, Constellation::bpsk(), p);
  Eigen::VectorXcd want = Eigen::VectorXcd::Zero(5);
  want[1] = 1.0;
  want[3] = -1.0;
  EXPECT_TRUE(x.isApprox(want));
}

TEST(Encode, WrongLengthThrows) {
  const SmCodebook cb = build_codebook(8, 1);
  const Bits p{0, 1};
  EXPECT_THROW(encode(cb, Constellation::ssk(), p), InvalidArgument);
}

TEST(Encode, QamGrayMap) {
  const Constellation q = Constellation::qam4(2.0);
  EXPECT_EQ(q.points[0], cplx(-1.0, -1.0));
  EXPECT_EQ(q.points[1], cplx(-1.0, 1.0));
  EXPECT_EQ(q.points[2], cplx(1.0, -1.0));
  EXPECT_EQ(q.points[3], cplx(1.0, 1.0));
  // Neighbours differ in one bit.
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (std::abs(std::abs(q.points[a] - q.points[b]) - 2.0) < 1e-12)
        EXPECT_EQ(__builtin_popcount(a ^ b), 1);
}

TEST(Decode, RoundTripExhaustiveAndRandom) {
  Rng rng(11);
  for (int mu = 1; mu <= 16; ++mu)
    for (int lu = 1; lu <= std::min(3, mu); ++lu)
      for (const char* name : {"ssk", "bpsk", "qam4"}) {
        const Constellation c = Constellation::preset(name);
        const SmCodebook cb = build_codebook(mu, lu);
        const int bits = cb.payload_bits(c);
        const bool exhaustive = bits <= 12;
        const std::uint64_t n = exhaustive ? (std::uint64_t{1} << bits) : 2000;
        for (std::uint64_t k = 0; k < n; ++k) {
          const std::uint64_t v =
              exhaustive ? k : (rng() & ((std::uint64_t{1} << bits) - 1));
          const Bits p = uint_bits(v, bits);
          ASSERT_EQ(decode_hard(cb, c, encode(cb, c, p)), p) << mu << " " << lu << " " << name;
        }
      }
}

TEST(Decode, ProjectsOffCodebookSupport) {
  const SmCodebook cb = five_two_codebook();
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(5);
  v[3] = 0.9;  // {4, 5} is not a codeword
  v[4] = 0.8;
  v[0] = 0.1;
  const Bits b = decode_hard(cb, Constellation::bpsk(), v);
  // Best overlap is {1, 4} (score 1.0) ahead of {2, 4} or {3, 4} (0.9).
  EXPECT_EQ(b, (Bits{0, 1, 0, 1, 1}));
}

TEST(Rate, DerivedExample) {
  const RateBounds r = per_antenna_rate(8, 1, 0);
  EXPECT_DOUBLE_EQ(r.r_bar, 0.375);
  // binom(8,1) = 8 gives I = 3; eta = 1/8 so eta - eta^2 = 7/64.
  const double h = -(std::log2(0.125) / 8.0 + 0.875 * std::log2(0.875));
  const double lv = std::log2(7.0 / 64.0);
  EXPECT_NEAR(r.c_const, 16.0 * (0.375 - h) + 3.0, 1e-12);
  EXPECT_NEAR(r.c_const, 0.303, 5e-4);
  EXPECT_NEAR(r.c_lower, std::log2(std::numbers::pi / (2.0 * std::exp(4.0))) - lv, 1e-12);
  EXPECT_NEAR(r.c_upper, std::log2(std::exp(2.0) / (4.0 * std::numbers::pi * std::numbers::pi)) - lv,
              1e-12);
  EXPECT_NEAR(r.c_lower, -1.9266, 1e-4);
  EXPECT_NEAR(r.c_upper, 0.7750, 1e-4);
  EXPECT_TRUE(r.has_bounds);
  EXPECT_DOUBLE_EQ(per_antenna_rate(5, 2, 1).r_bar, 1.0);
  EXPECT_DOUBLE_EQ(per_antenna_rate(16, 2, 1).r_bar, 0.5);
  EXPECT_FALSE(per_antenna_rate(4, 4, 1).has_bounds);
}

TEST(Rate, ConstantMatchesIndependentEvaluation) {
  for (int m = 2; m <= 64; ++m)
    for (int l = 1; l < m; ++l)
      for (int s = 0; s <= 2; ++s) {
        const RateBounds r = per_antenna_rate(m, l, s);
        const double eta = static_cast<double>(l) / m;
        const int i = 63 - __builtin_clzll(oracle::binomial(m, l));
        ASSERT_DOUBLE_EQ(r.r_bar, static_cast<double>(i + l * s) / m);
        const double c = 2.0 * m * (r.r_bar - eta * s - oracle::h2(eta)) + std::log2(double(m));
        ASSERT_NEAR(r.c_const, c, 1e-9);
        ASSERT_GT(r.c_const, r.c_lower);
        ASSERT_LE(r.c_const, r.c_upper + 1e-12);
        ASSERT_LT(r.stirling_lo, r.r_bar);
        ASSERT_LE(r.r_bar, r.stirling_hi + 1e-12);
      }
}

TEST(Marginal, ExampleCodebookClosedForm) {
  const SmCodebook cb = five_two_codebook();
  const auto first = exact_marginal(cb, Constellation::bpsk(), 0);
  EXPECT_DOUBLE_EQ(first[0].probability, 0.5);
  EXPECT_DOUBLE_EQ(first[1].probability, 0.25);
  EXPECT_DOUBLE_EQ(first[2].probability, 0.25);
  const auto last = exact_marginal(cb, Constellation::bpsk(), 4);
  EXPECT_DOUBLE_EQ(last[0].probability, 0.75);
  EXPECT_DOUBLE_EQ(last[1].probability, 0.125);
  EXPECT_DOUBLE_EQ(last[2].probability, 0.125);
}

TEST(EmpiricalStats, MassSumsToOneAndMomentsMatch) {
  const SmCodebook cb = build_codebook(16, 2, SeededRandom{0});
  const Constellation c = Constellation::bpsk();
  const MomentRequest req[] = {{1, 1, 0}, {2, 1, 1}};
  const EmpiricalStats st = empirical_stats(cb, c, 10, 79, 20000, 5, req);
  double total = 0.0;
  for (const auto& pm : st.marginal) total += pm.probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(st.reference[0].probability, 0.875, 1e-15);
  ASSERT_EQ(st.moments.size(), 2u);
  // rho^{11}(0) is the second moment of the entry; eta P for a balanced codebook.
  EXPECT_NEAR(st.moments[0].empirical.real(), 0.125, 0.01);
  EXPECT_THROW(empirical_stats(cb, c, 10, 160, 10, 1), InvalidArgument);
  EXPECT_THROW(empirical_stats(cb, c, 10, 0, 0, 1), InvalidArgument);
}

TEST(EmpiricalStats, TransmitEnergyIsExact) {
  const SmCodebook cb = build_codebook(8, 2);
  Rng rng(3);
  for (const char* name : {"ssk", "bpsk", "qam4"}) {
    const Constellation c = Constellation::preset(name, 2.5);
    Bits p(static_cast<std::size_t>(4 * cb.payload_bits(c)));
    for (int t = 0; t < 50; ++t) {
      for (auto& b : p) b = rng() & 1u;
      EXPECT_NEAR(encode_users(cb, c, p, 4).squaredNorm(), 4 * 2 * 2.5, 1e-12);
    }
  }
}

TEST(Random, DeriveSeedIsPureAndSpreads) {
  static_assert(derive_seed(1, 2) == derive_seed(1, 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
}

}  // namespace
}  // namespace masm
