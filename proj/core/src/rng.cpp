#include "chorus/rng.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace chorus {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t prod = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(prod >> 32);
  lo = static_cast<uint32_t>(prod);
}

inline std::array<uint32_t, 4> philox_round(std::array<uint32_t, 4> c,
                                            std::array<uint32_t, 2> k) {
  uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline uint64_t splitmix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> counter,
                                      std::array<uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    counter = philox_round(counter, key);
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return counter;
}

uint64_t RngStream::derive_stream(uint64_t parent, uint64_t tag) {
  // Not cryptographic; collisions are a non-issue at the stream counts used.
  return splitmix64(splitmix64(parent) ^ splitmix64(tag ^ 0xA5A5A5A5A5A5A5A5ull));
}

void RngStream::refill() {
  std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(counter_), static_cast<uint32_t>(counter_ >> 32),
      static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
  block_ = philox4x32_10(ctr, key_);
  ++counter_;
  block_pos_ = 0;
}

uint32_t RngStream::next_u32() {
  if (block_pos_ >= 4) refill();
  return block_[block_pos_++];
}

uint64_t RngStream::next_u64() {
  uint64_t lo = next_u32();
  uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double RngStream::unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * unit();
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  assert(lo <= hi);
  uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  if (range == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return lo + static_cast<int64_t>(draw % range);
}

double RngStream::normal() {
  // Box-Muller; the sine companion is discarded to keep the stream layout
  // independent of call history.
  double u1 = 1.0 - unit();  // (0, 1]
  double u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int64_t RngStream::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  // Knuth product-of-uniforms on chunks; Poisson(a+b) = Poisson(a)+Poisson(b).
  constexpr double kChunk = 30.0;
  int64_t total = 0;
  double remaining = mean;
  while (remaining > 0.0) {
    double mu = remaining > kChunk ? kChunk : remaining;
    remaining -= mu;
    const double limit = std::exp(-mu);
    int64_t k = 0;
    double prod = 1.0;
    for (;;) {
      prod *= unit();
      if (prod <= limit) break;
      ++k;
    }
    total += k;
  }
  return total;
}

int64_t RngStream::binomial(int64_t trials, double prob) {
  assert(trials >= 0);
  if (prob <= 0.0) return 0;
  if (prob >= 1.0) return trials;
  int64_t successes = 0;
  for (int64_t t = 0; t < trials; ++t) {
    if (unit() < prob) ++successes;
  }
  return successes;
}

int64_t RngStream::hypergeometric(int64_t true_pool, int64_t false_pool,
                                  int64_t draws) {
  assert(draws >= 0 && draws <= true_pool + false_pool);
  int64_t remaining_true = true_pool;
  int64_t remaining_total = true_pool + false_pool;
  int64_t hits = 0;
  for (int64_t d = 0; d < draws; ++d) {
    double p = static_cast<double>(remaining_true) /
               static_cast<double>(remaining_total);
    if (unit() < p) {
      ++hits;
      --remaining_true;
    }
    --remaining_total;
  }
  return hits;
}

std::size_t RngStream::categorical_from_log(
    std::span<const double> log_weights) {
  assert(!log_weights.empty());
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights)
    if (lw > max_lw) max_lw = lw;
  assert(std::isfinite(max_lw));
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    w[i] = std::exp(log_weights[i] - max_lw);
    total += w[i];
  }
  double target = unit() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (target < cum) return i;
  }
  // Rounding spill: return the last index with positive weight.
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return i;
  return w.size() - 1;
}

}  // namespace chorus
