#pragma once

// Counter-based random number generation (Philox-4x64-10) and Gaussian
// streams addressed by (seed, stream index). A draw is a pure function of
// (seed, stream, position), so any slice of any stream can be regenerated
// independently of everything else.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace cmv::rng {

using u64 = std::uint64_t;

namespace detail {

inline u64 mulhilo(u64 a, u64 b, u64& hi) {
  const auto p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<u64>(p >> 64);
  return static_cast<u64>(p);
}

}  // namespace detail

/// One Philox-4x64 block, 10 rounds, standard multipliers and key schedule.
inline std::array<u64, 4> philox4x64(std::array<u64, 4> ctr, std::array<u64, 2> key) {
  constexpr u64 kM0 = 0xD2E7470EE14C6C93ULL;
  constexpr u64 kM1 = 0xCA5A826395121157ULL;
  constexpr u64 kW0 = 0x9E3779B97F4A7C15ULL;
  constexpr u64 kW1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0;; ++round) {
    u64 hi0 = 0, hi1 = 0;
    const u64 lo0 = detail::mulhilo(kM0, ctr[0], hi0);
    const u64 lo1 = detail::mulhilo(kM1, ctr[2], hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    if (round == 9) break;
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Uniform in (0,1] from the top 53 bits; never 0, so log() stays finite.
inline double to_unit_open(u64 x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

/// Uniform in [0,1).
inline double to_unit_half_open(u64 x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Stream of standard normal deviates keyed by (seed, stream). Counter block
/// b yields draws 4b..4b+3 via Box-Muller, two deviates per pair of words.
class NormalStream {
 public:
  NormalStream(u64 seed, u64 stream) : key_{seed, stream} {}

  double next() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  void fill(std::span<double> out) {
    for (double& v : out) v = next();
  }

 private:
  static void box_muller(u64 a, u64 b, double& n0, double& n1) {
    const double r = std::sqrt(-2.0 * std::log(to_unit_open(a)));
    const double theta = 2.0 * std::numbers::pi * to_unit_half_open(b);
    n0 = r * std::cos(theta);
    n1 = r * std::sin(theta);
  }

  void refill() {
    const auto w = philox4x64({block_, 0, 0, 0}, key_);
    ++block_;
    box_muller(w[0], w[1], buf_[0], buf_[1]);
    box_muller(w[2], w[3], buf_[2], buf_[3]);
    pos_ = 0;
  }

  std::array<u64, 2> key_;
  u64 block_ = 0;
  std::array<double, 4> buf_{};
  int pos_ = 4;
};

/// Seed for one (N, trial) cell of a sweep. Distinct cells land in distinct
/// Philox blocks, so derived seeds never collide by construction.
inline u64 trial_seed(u64 master_seed, u64 n_particles, u64 trial_index) {
  constexpr u64 kTrialTag = 0x747269616cULL;  // "trial"
  return philox4x64({n_particles, trial_index, 0, 0}, {master_seed, kTrialTag})[0];
}

}  // namespace cmv::rng
