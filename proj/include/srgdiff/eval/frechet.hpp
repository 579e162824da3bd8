// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace srgdiff::eval {

/// Ridge added to each covariance when a set has fewer samples than
/// dimensions plus one.
inline constexpr double kCovarianceRidge = 1e-6;
/// Eigenvalues of the covariance product below -kEigenTolerance (relative to
/// the largest magnitude, floor 1) are treated as indefiniteness.
inline constexpr double kEigenTolerance = 1e-8;

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Mean and unbiased covariance of the rows of `samples` (n x d).
GaussianFit fit_gaussian(const Eigen::MatrixXd& samples);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const GaussianFit& a, const GaussianFit& b);
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace srgdiff::eval
