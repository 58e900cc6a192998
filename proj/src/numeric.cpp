#include "psamp/numeric.hpp"

#include <algorithm>
#include <vector>

namespace psamp {

void log_softmax_rows_inplace(Matrix& grid) {
  if (!grid.allFinite()) throw std::invalid_argument("non-finite logits");
  for (Index i = 0; i < grid.rows(); ++i) {
    const double m = grid.row(i).maxCoeff();
    const double lse = m + std::log((grid.row(i).array() - m).exp().sum());
    grid.row(i).array() -= lse;
  }
}

bool rows_normalized(const Matrix& log_probs, double tol) {
  for (Index i = 0; i < log_probs.rows(); ++i) {
    if (std::abs(log_probs.row(i).array().exp().sum() - 1.0) > tol) return false;
  }
  return true;
}

double finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                         const Matrix& params, const Matrix& analytic_grads,
                         double h, Index max_coords) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be > 0");
  if (params.rows() != analytic_grads.rows() || params.cols() != analytic_grads.cols())
    throw std::invalid_argument("finite_diff_check: shape mismatch");

  const Index n = params.size();
  const Index stride = std::max<Index>(1, n / std::max<Index>(1, max_coords));

  Matrix probe = params;
  double worst = 0.0;
  for (Index k = 0; k < n; k += stride) {
    const Index r = k / params.cols();
    const Index c = k % params.cols();
    const double orig = probe(r, c);
    probe(r, c) = orig + h;
    const double up = loss_fn(probe);
    probe(r, c) = orig - h;
    const double down = loss_fn(probe);
    probe(r, c) = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("finite_diff_check: non-finite loss");
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = analytic_grads(r, c);
    const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty set");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double bessel_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace psamp
