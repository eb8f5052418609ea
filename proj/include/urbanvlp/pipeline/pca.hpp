#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "urbanvlp/numerics/tensor.hpp"

namespace urbanvlp {

struct PcaResult {
  Tensor projection;                 // [n x k'] with k' <= k
  Tensor axes;                       // [d x k'] unit principal directions
  std::vector<double> eigenvalues;   // all d covariance eigenvalues, descending
  std::vector<double> mean;          // column means
  std::string warning;               // set when fewer than k axes carry variance
};

/// Projects the centered rows of `x` onto the top-k eigenvectors of the
/// sample covariance. Each axis is signed so that its largest-magnitude
/// component is positive. Axes whose eigenvalue is numerically zero are
/// omitted.
inline PcaResult pca_project(const Tensor& x, std::size_t k = 2) {
  if (x.rank() != 2) throw DimensionError("pca_project expects a matrix, got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (n <= k) throw DataError("pca_project needs more rows than axes (" + std::to_string(n) + " <= " + std::to_string(k) + ")");

  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = x(i, j);
  const Eigen::RowVectorXd mu = m.colwise().mean();
  m.rowwise() -= mu;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");

  PcaResult out;
  out.mean.assign(mu.data(), mu.data() + d);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  for (std::size_t j = 0; j < d; ++j) out.eigenvalues.push_back(std::max(0.0, values(static_cast<Eigen::Index>(d - 1 - j))));

  const double tol = 1e-12 * std::max(1.0, out.eigenvalues.front());
  std::size_t kept = 0;
  while (kept < std::min(k, d) && out.eigenvalues[kept] > tol) ++kept;
  if (kept < k) {
    out.warning = "embedding rank " + std::to_string(kept) + " is below the requested " + std::to_string(k) +
                  " axes; returning " + std::to_string(kept);
  }

  out.axes = Tensor(Shape{d, kept});
  for (std::size_t a = 0; a < kept; ++a) {
    Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - a));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j) out.axes(j, a) = v(static_cast<Eigen::Index>(j));
  }
  out.projection = Tensor(Shape{n, kept});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < kept; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * out.axes(j, a);
      out.projection(i, a) = s;
    }
  return out;
}

}  // namespace urbanvlp
