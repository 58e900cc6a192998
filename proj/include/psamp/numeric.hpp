#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace psamp {

// All real-valued state is 64-bit and row-major: grids are (position x
// category) with contiguous rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// log(sum(exp(v))) with max-subtraction.
template <typename Derived>
double logsumexp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

/// Normalized log-probabilities from unnormalized logits. Shift-invariant
/// and overflow-free; throws on non-finite input.
template <typename Derived>
RowVector log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  if (!logits.allFinite()) throw std::invalid_argument("non-finite logits");
  RowVector v = logits.reshaped().transpose();
  const double m = v.maxCoeff();
  const double lse = m + std::log((v.array() - m).exp().sum());
  return v.array() - lse;
}

/// In-place row-wise log_softmax over a (d x K) grid.
void log_softmax_rows_inplace(Matrix& grid);

/// Every row exponentiates and sums to 1 within tol.
bool rows_normalized(const Matrix& log_probs, double tol = 1e-9);

/// Max relative error between analytic gradients and central differences,
/// over a deterministic subset of at most max_coords coordinates.
/// Error metric: |numeric - analytic| / max(1e-8, |analytic| + |numeric|).
double finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                         const Matrix& params, const Matrix& analytic_grads,
                         double h, Index max_coords = 128);

double mean_of(const std::vector<double>& xs);
/// Bessel-corrected standard deviation, sqrt(sum (x-mean)^2 / (n-1)).
double bessel_std(const std::vector<double>& xs);

}  // namespace psamp
