#pragma once

#include <cstdint>
#include <limits>

namespace abpower {

// Counter-based generator: output k of stream (seed, stream) is a pure
// function of (seed, stream, k), so replications can be generated in any
// order or on any thread without their streams overlapping.
//
// The mixing function is SplitMix64's finalizer applied to a per-stream key
// plus a Weyl sequence counter.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Uniform in the open interval (0, 1).
  double uniform();

  // Independent child stream, e.g. one per unit within a replication.
  CounterRng split(std::uint64_t child) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace abpower
