#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "dpp/mdp.hpp"

namespace dpp {

/// SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Counter-mode SplitMix64: word `counter` of the stream keyed by `key`,
///   mix64(mix64(key) + (counter + 1) * 0x9E3779B97F4A7C15).
/// Random access by counter is what lets sample tensors be regenerated
/// draw-by-draw instead of stored.
std::uint64_t counter_draw(std::uint64_t key, std::uint64_t counter) noexcept;

/// Top 53 bits mapped to [0, 1).
double unit_from_bits(std::uint64_t bits) noexcept;

/// Sequential stream on std::mt19937_64 (its output is fixed by the standard).
/// Conversions to doubles are done here rather than with <random>
/// distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return unit_from_bits(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Exp(rate) by inversion.
  double exponential(double rate);
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Table with i.i.d. uniform entries in [lo, hi].
StateActionTable uniform_table(std::size_t n_states, std::size_t n_actions, double lo, double hi,
                               Rng& rng);

}  // namespace dpp
