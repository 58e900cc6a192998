#pragma once

#include "psamp/numeric.hpp"
#include "psamp/rng.hpp"
#include "psamp/token_buffer.hpp"

#include <stdexcept>

namespace psamp {

/// (d x K) grid of reparametrization noise, standard Gumbel under the prior.
using NoiseGrid = Matrix;

inline double standard_gumbel(Rng& rng) { return -std::log(-std::log(rng.uniform_open())); }

NoiseGrid sample_gumbel_grid(Rng& rng, Index d, Index K);

/// argmax_c(mu_c + eps_c); ties broken by lowest index.
template <typename D1, typename D2>
Index gumbel_argmax(const Eigen::MatrixBase<D1>& mu, const Eigen::MatrixBase<D2>& eps) {
  if (mu.size() != eps.size()) throw std::invalid_argument("gumbel_argmax: length mismatch");
  if (!mu.allFinite() || !eps.allFinite())
    throw std::invalid_argument("gumbel_argmax: non-finite inputs");
  Index best = 0;
  double best_v = mu(0) + eps(0);
  for (Index c = 1; c < mu.size(); ++c) {
    const double v = mu(c) + eps(c);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

/// Draw from Gumbel(location) conditioned on the value being <= truncation.
/// Uses the max-stable form min(g,T) - log1p(exp(-|g-T|)), which never
/// exceeds the truncation point.
double sample_truncated_gumbel(double location, double truncation, Rng& rng);

/// Noise grid distributed as p(eps | x) under the Gumbel-Max coupling: the
/// argmax cell gets a fresh standard Gumbel, every other cell a truncated
/// Gumbel below the realized maximum. Reconstruction
/// gumbel_argmax(mu_i, eps_i) == x_i holds at every position. Traversal is
/// position-major, category-minor, argmax cell first.
NoiseGrid sample_posterior_noise(const TokenBuffer& x, const Matrix& mu, Rng& rng);

}  // namespace psamp
