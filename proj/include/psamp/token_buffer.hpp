#pragma once

#include "psamp/numeric.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace psamp {

/// Length-d discrete sequence with a validity frontier. Entries below the
/// frontier are settled samples; entries at or above it are forecasts or
/// placeholders. The frontier only moves forward during a sampling run.
struct TokenBuffer {
  Index d = 0;
  Index K = 0;
  std::vector<std::int32_t> tokens;
  Index frontier = 0;

  TokenBuffer() = default;
  TokenBuffer(Index d_, Index K_) : d(d_), K(K_), tokens(static_cast<size_t>(d_), 0) {
    if (d_ < 1 || K_ < 1) throw std::invalid_argument("TokenBuffer: d and K must be >= 1");
  }

  static TokenBuffer zeros(Index d, Index K) { return TokenBuffer(d, K); }

  static TokenBuffer from_tokens(std::vector<std::int32_t> toks, Index K) {
    TokenBuffer b(static_cast<Index>(toks.size()), K);
    for (std::int32_t t : toks)
      if (t < 0 || t >= K) throw std::invalid_argument("TokenBuffer: token out of range");
    b.tokens = std::move(toks);
    b.frontier = b.d;
    return b;
  }

  bool fully_valid() const { return frontier == d; }

  std::int32_t operator[](Index i) const { return tokens[static_cast<size_t>(i)]; }

  void set(Index i, std::int32_t tok) {
    if (i < 0 || i >= d) throw std::out_of_range("TokenBuffer: index out of range");
    if (tok < 0 || tok >= K) throw std::invalid_argument("TokenBuffer: token out of range");
    tokens[static_cast<size_t>(i)] = tok;
  }

  void advance_frontier(Index to) {
    if (to < frontier || to > d)
      throw std::invalid_argument("TokenBuffer: frontier must be non-decreasing and <= d");
    frontier = to;
  }
};

inline bool same_tokens(const TokenBuffer& a, const TokenBuffer& b) {
  return a.d == b.d && a.K == b.K && a.tokens == b.tokens;
}

}  // namespace psamp
