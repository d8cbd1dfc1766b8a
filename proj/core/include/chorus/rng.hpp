#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace chorus {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by (key, stream id); draws within a stream consume a
// 64-bit block counter. Child streams derived with split() are independent of
// the order in which sibling streams are consumed, so datasets and chains can
// be generated in parallel with reproducible output. Every sampler below is
// implemented here (no std:: distributions) so that the byte output of the
// tools is identical across platforms and standard libraries.
class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t key, uint64_t stream) : stream_(stream) {
    key_[0] = static_cast<uint32_t>(key);
    key_[1] = static_cast<uint32_t>(key >> 32);
  }

  uint32_t next_u32();
  uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double unit();
  double uniform(double lo, double hi);
  // Uniform integer on [lo, hi], inclusive, via rejection (unbiased).
  int64_t uniform_int(int64_t lo, int64_t hi);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Exact samplers; cost O(parameter), which is fine at survey scale.
  int64_t poisson(double mean);
  int64_t binomial(int64_t trials, double prob);
  // Number of "true" items in a uniform sample of `draws` from a pool of
  // `true_pool` true and `false_pool` false items.
  int64_t hypergeometric(int64_t true_pool, int64_t false_pool, int64_t draws);

  // Draw an index proportional to exp(log_weights[i]); tolerates -inf entries.
  std::size_t categorical_from_log(std::span<const double> log_weights);

  // Child stream at a deterministic tag; independent of draws made so far.
  RngStream split(uint64_t tag) const {
    uint64_t key = static_cast<uint64_t>(key_[0]) |
                   (static_cast<uint64_t>(key_[1]) << 32);
    return RngStream(key, derive_stream(stream_, tag));
  }

  uint64_t stream_id() const { return stream_; }
  static uint64_t derive_stream(uint64_t parent, uint64_t tag);

  // UniformRandomBitGenerator interface.
  using result_type = uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }
  result_type operator()() { return next_u32(); }

 private:
  std::array<uint32_t, 2> key_{0, 0};
  uint64_t stream_ = 0;
  uint64_t counter_ = 0;
  std::array<uint32_t, 4> block_{};
  int block_pos_ = 4;  // empty

  void refill();
};

// Raw Philox4x32-10 block function, exposed for test vectors.
std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> counter,
                                      std::array<uint32_t, 2> key);

}  // namespace chorus
