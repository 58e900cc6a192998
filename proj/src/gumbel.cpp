#include "psamp/gumbel.hpp"

namespace psamp {

NoiseGrid sample_gumbel_grid(Rng& rng, Index d, Index K) {
  if (d < 1 || K < 1) throw std::invalid_argument("sample_gumbel_grid: d and K must be >= 1");
  NoiseGrid eps(d, K);
  for (Index i = 0; i < d; ++i)
    for (Index c = 0; c < K; ++c) eps(i, c) = standard_gumbel(rng);
  return eps;
}

double sample_truncated_gumbel(double location, double truncation, Rng& rng) {
  const double g = location + standard_gumbel(rng);
  if (std::isinf(truncation) && truncation > 0.0) return g;
  return std::min(g, truncation) - std::log1p(std::exp(-std::abs(g - truncation)));
}

NoiseGrid sample_posterior_noise(const TokenBuffer& x, const Matrix& mu, Rng& rng) {
  const Index d = mu.rows();
  const Index K = mu.cols();
  if (x.d != d || x.K != K) throw std::invalid_argument("sample_posterior_noise: shape mismatch");
  NoiseGrid eps(d, K);
  for (Index i = 0; i < d; ++i) {
    const Index xi = x[i];
    if (xi < 0 || xi >= K) throw std::invalid_argument("sample_posterior_noise: token out of range");
    eps(i, xi) = standard_gumbel(rng);
    const double top = mu(i, xi) + eps(i, xi);
    for (Index c = 0; c < K; ++c) {
      if (c == xi) continue;
      eps(i, c) = sample_truncated_gumbel(mu(i, c), top, rng) - mu(i, c);
    }
  }
  return eps;
}

}  // namespace psamp
