#pragma once

#include <cstdint>

namespace hamavg {

// Counter-based stream: draw k of stream s under master seed is a pure function
// of (seed, s, k), so results do not depend on scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();      // open interval (0, 1)
  double normal();       // inverse-CDF standard normal
  double exponential();  // rate 1
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hamavg
