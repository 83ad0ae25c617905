#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace csbp {

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

struct StreamId {
  std::uint64_t seed = 0;
  std::uint32_t experiment = 0;  // < 2^12
  std::uint32_t rung = 0;        // < 2^20
  std::uint32_t replica = 0;
};

// Counter-based stream: block i of stream (seed, experiment, rung, replica) is
// philox(counter = (i, experiment<<20 | rung, replica), key = seed).  Distinct ids
// never share a counter, so streams cannot overlap.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() = default;
  explicit RandomStream(StreamId id)
      : id_(id),
        key_{std::uint32_t(id.seed), std::uint32_t(id.seed >> 32)},
        lane_((id.experiment & 0xFFFu) << 20 | (id.rung & 0xFFFFFu)),
        replica_(id.replica) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (have_ == 0) refill();
    --have_;
    return buf_[have_];
  }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() { return (double((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential() { return -std::log(uniform()); }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return cached_normal_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    cached_normal_ = r * std::sin(theta);
    have_normal_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t blocks_used() const { return block_; }
  const StreamId& id() const { return id_; }

 private:
  void refill() {
    const auto out = philox4x32(
        {std::uint32_t(block_), std::uint32_t(block_ >> 32), lane_, replica_}, key_);
    ++block_;
    buf_[1] = (std::uint64_t(out[0]) << 32) | out[1];
    buf_[0] = (std::uint64_t(out[2]) << 32) | out[3];
    have_ = 2;
  }

  StreamId id_{};
  std::array<std::uint32_t, 2> key_{};
  std::uint32_t lane_ = 0;
  std::uint32_t replica_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int have_ = 0;
  bool have_normal_ = false;
  double cached_normal_ = 0.0;
};

inline RandomStream make_stream(std::uint64_t seed, std::uint32_t experiment, std::uint32_t rung,
                                std::uint32_t replica) {
  return RandomStream(StreamId{seed, experiment, rung, replica});
}

}  // namespace csbp
