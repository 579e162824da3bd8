// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eval/frechet.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "srgdiff/error.hpp"

namespace srgdiff::eval {

GaussianFit fit_gaussian(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows(), d = samples.cols();
  if (n < 2 || d < 1) throw ShapeError("fit_gaussian: need at least 2 samples of dimension >= 1");
  if (!samples.allFinite()) throw NumericalError("fit_gaussian: non-finite embeddings");
  GaussianFit fit;
  fit.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - fit.mean.transpose();
  fit.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  if (n < d + 1) fit.cov.diagonal().array() += kCovarianceRidge;
  return fit;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  const Eigen::VectorXd sq = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * sq.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) throw ShapeError("frechet_distance: dimension mismatch");
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov);
  Eigen::MatrixXd inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -kEigenTolerance * scale)
      throw NumericalError("frechet_distance: covariance product is indefinite");
    trace_sqrt += std::sqrt(std::max(0.0, lambda[i]));
  }
  const double value = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(value)) throw NumericalError("frechet_distance: non-finite result");
  return std::max(0.0, value);
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

}  // namespace srgdiff::eval
