#include "psamp/rng.hpp"

namespace psamp {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t state = seed ^ fnv1a(label);
  // One extra mix so nearby seeds with related labels do not collide.
  std::uint64_t mixed = splitmix64(state);
  return splitmix64(state) ^ mixed;
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform_open() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  constexpr double kLo = 1.0 / 9007199254740992.0;
  constexpr double kHi = 1.0 - 1.0 / 9007199254740992.0;
  double u = static_cast<double>(next_u64() >> 11) * kScale;
  if (u < kLo) return kLo;
  if (u > kHi) return kHi;
  return u;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection-free modulo is fine here: n is tiny relative to 2^64 in all
  // uses (indices, category counts), so the bias is negligible.
  return n == 0 ? 0 : next_u64() % n;
}

}  // namespace psamp
