#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "chorus/rng.hpp"

using namespace chorus;

TEST_SUITE("rng") {

TEST_CASE("philox block function matches reference vectors") {
  // Published Random123 vectors for philox4x32-10.
  auto zero = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(zero == std::array<uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu,
                                        0x9b00dbd8u});
  auto ones = philox4x32_10(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
      {0xffffffffu, 0xffffffffu});
  CHECK(ones == std::array<uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u,
                                        0x6d5451fdu});
  auto pi = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          {0xa4093822u, 0x299f31d0u});
  CHECK(pi == std::array<uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u,
                                      0x24126ea1u});
}

TEST_CASE("streams are deterministic and distinct") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  RngStream d(43, 7);
  RngStream base(42, 7);
  CHECK(base.next_u64() != c.next_u64());
  RngStream base2(42, 7);
  CHECK(base2.next_u64() != d.next_u64());
}

TEST_CASE("split children are independent of parent draw position") {
  RngStream parent(11, 3);
  RngStream child_before = parent.split(5);
  for (int i = 0; i < 17; ++i) parent.next_u32();
  RngStream child_after = parent.split(5);
  for (int i = 0; i < 20; ++i)
    CHECK(child_before.next_u64() == child_after.next_u64());

  RngStream other = parent.split(6);
  RngStream five = parent.split(5);
  CHECK(five.next_u64() != other.next_u64());
  CHECK(RngStream::derive_stream(3, 5) != RngStream::derive_stream(3, 6));
  CHECK(RngStream::derive_stream(3, 5) != RngStream::derive_stream(4, 5));
}

TEST_CASE("unit draws live in [0,1) with the right mean") {
  RngStream rng(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = rng.unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("uniform_int covers the range uniformly, endpoints included") {
  RngStream rng(2, 0);
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    int64_t v = rng.uniform_int(-2, 3);
    REQUIRE(v >= -2);
    REQUIRE(v <= 3);
    ++counts[static_cast<std::size_t>(v + 2)];
  }
  for (int c : counts) CHECK(std::abs(c - n / 6) < 500);
  // Degenerate single-point range.
  CHECK(rng.uniform_int(9, 9) == 9);
}

TEST_CASE("normal moments") {
  RngStream rng(3, 0);
  const int n = 100000;
  double sum = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    ss += z * z;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(ss / n - 1.0) < 0.03);
}

TEST_CASE("poisson moments and edge cases") {
  RngStream rng(4, 0);
  CHECK(rng.poisson(0.0) == 0);
  const int n = 100000;
  double sum = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    int64_t x = rng.poisson(3.0);
    REQUIRE(x >= 0);
    sum += static_cast<double>(x);
    ss += static_cast<double>(x) * static_cast<double>(x);
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 3.0) < 0.05);
  CHECK(std::abs(ss / n - mean * mean - 3.0) < 0.15);
  // Large means still behave (chunked exponential-wait scheme).
  double big = 0.0;
  for (int i = 0; i < 2000; ++i) big += static_cast<double>(rng.poisson(80.0));
  CHECK(std::abs(big / 2000 - 80.0) < 1.5);
}

TEST_CASE("binomial moments and edge cases") {
  RngStream rng(5, 0);
  CHECK(rng.binomial(0, 0.3) == 0);
  CHECK(rng.binomial(10, 0.0) == 0);
  CHECK(rng.binomial(10, 1.0) == 10);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    int64_t x = rng.binomial(10, 0.3);
    REQUIRE(x >= 0);
    REQUIRE(x <= 10);
    sum += static_cast<double>(x);
  }
  CHECK(std::abs(sum / n - 3.0) < 0.05);
}

TEST_CASE("hypergeometric matches exact cell probabilities") {
  // Pool of 2 true and 5 false, draw 3: P(X=0) = C(5,3)/C(7,3) = 2/7,
  // P(X=1) = 4/7, P(X=2) = 1/7.
  RngStream rng(6, 0);
  std::array<int, 3> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    int64_t x = rng.hypergeometric(2, 5, 3);
    REQUIRE(x >= 0);
    REQUIRE(x <= 2);
    ++counts[static_cast<std::size_t>(x)];
  }
  CHECK(std::abs(counts[0] / double(n) - 2.0 / 7.0) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 4.0 / 7.0) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 1.0 / 7.0) < 0.01);
  // Degenerate pools.
  CHECK(rng.hypergeometric(4, 0, 3) == 3);
  CHECK(rng.hypergeometric(0, 4, 3) == 0);
  CHECK(rng.hypergeometric(2, 2, 4) == 2);
}

TEST_CASE("categorical_from_log matches the weights") {
  RngStream rng(7, 0);
  const std::vector<double> lw = {std::log(1.0), std::log(2.0), std::log(3.0)};
  std::array<int, 3> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical_from_log(lw)];
  CHECK(std::abs(counts[0] / double(n) - 1.0 / 6.0) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 2.0 / 6.0) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 3.0 / 6.0) < 0.01);

  // -inf entries never get picked; a lone finite entry always does.
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> spiked = {ninf, 4.2, ninf};
  for (int i = 0; i < 50; ++i) CHECK(rng.categorical_from_log(spiked) == 1);
}

TEST_CASE("urbg interface drives std::shuffle deterministically") {
  std::vector<int> a(20), b(20);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  RngStream r1(9, 1), r2(9, 1);
  std::shuffle(a.begin(), a.end(), r1);
  std::shuffle(b.begin(), b.end(), r2);
  CHECK(a == b);
  CHECK(std::is_permutation(a.begin(), a.end(), b.begin()));
}

}  // TEST_SUITE("rng")
