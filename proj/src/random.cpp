#include "dpp/random.hpp"

#include <cmath>

#include "dpp/errors.hpp"

namespace dpp {

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t counter_draw(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(mix64(key) + (counter + 1) * 0x9E3779B97F4A7C15ULL);
}

double unit_from_bits(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw InvalidInput("exponential rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidInput("Rng::index of an empty range");
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

StateActionTable uniform_table(std::size_t n_states, std::size_t n_actions, double lo, double hi,
                               Rng& rng) {
  StateActionTable t(n_states, n_actions);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace dpp
