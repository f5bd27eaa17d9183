#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "fungcn/error.hpp"
#include "fungcn/fda.hpp"

namespace fungcn::fda {

double FpcBasis::explained_fraction(int count) const {
  if (total_variance <= 0.0) return 0.0;
  count = std::min(count, size());
  return eigenvalues.head(count).sum() / total_variance;
}

FpcBasis fpca_on_grid(const Eigen::MatrixXd& values, const QuadratureGrid& grid, int k_graph) {
  const Eigen::Index n = values.rows();
  const Eigen::Index m = grid.size();
  if (n < 2) throw contract_error("fpca", "need at least 2 curves, got " + std::to_string(n));
  if (values.cols() != m) throw contract_error("fpca", "values are not on the quadrature grid");
  if (k_graph < 1 || k_graph > std::min<Eigen::Index>(n - 1, m)) {
    throw contract_error("fpca", "k_graph = " + std::to_string(k_graph) +
                                     " must lie in [1, min(n-1, grid size)]");
  }

  FpcBasis out;
  out.grid = grid;
  out.mean = values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values.rowwise() - out.mean.transpose();

  // Covariance operator discretized as C W; symmetrized as W^1/2 C W^1/2.
  const Eigen::VectorXd sqrt_w = grid.weights.cwiseSqrt();
  const Eigen::MatrixXd scaled =
      centered * sqrt_w.asDiagonal() / std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd op = scaled.transpose() * scaled;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op);
  if (eig.info() != Eigen::Success) {
    throw numerical_error("fpca", "eigendecomposition of the covariance operator failed");
  }

  out.total_variance = std::max(0.0, op.trace());
  out.eigenvalues.resize(k_graph);
  out.components.resize(m, k_graph);
  for (int c = 0; c < k_graph; ++c) {
    const Eigen::Index src = m - 1 - c;  // ascending order from the solver
    out.eigenvalues[c] = std::max(0.0, eig.eigenvalues()[src]);
    Eigen::VectorXd phi = eig.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    Eigen::Index arg = 0;
    phi.cwiseAbs().maxCoeff(&arg);
    if (phi[arg] < 0.0) phi = -phi;
    out.components.col(c) = phi;
  }
  return out;
}

FpcBasis fpca(std::span<const Curve> curves, int k_graph) {
  if (curves.size() < 2) {
    throw contract_error("fpca", "need at least 2 curves, got " + std::to_string(curves.size()));
  }
  const Domain domain = curves.front().domain();
  const auto grid = QuadratureGrid::simpson(domain);
  const Eigen::MatrixXd design = curves.front().basis->design(grid.points);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(curves.size()), grid.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (!(curves[i].domain() == domain)) {
      throw contract_error("domain", "fpca curves live on different domains");
    }
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    if (*curves[i].basis == *curves.front().basis) {
      values.row(row) = (design * curves[i].coeffs).transpose();
    } else {
      values.row(row) = curves[i].on_grid(grid).transpose();
    }
  }
  return fpca_on_grid(values, grid, k_graph);
}

Eigen::VectorXd project_grid_values(const Eigen::VectorXd& values, const FpcBasis& fpc) {
  if (values.size() != fpc.grid.size()) {
    throw contract_error("domain", "values are not on the FPC quadrature grid");
  }
  const Eigen::VectorXd weighted = (values - fpc.mean).cwiseProduct(fpc.grid.weights);
  return fpc.components.transpose() * weighted;
}

Eigen::VectorXd project(const Curve& curve, const FpcBasis& fpc) {
  if (!(curve.domain() == fpc.grid.domain)) {
    throw contract_error("domain", "curve and FPC basis live on different domains");
  }
  return project_grid_values(curve.on_grid(fpc.grid), fpc);
}

}  // namespace fungcn::fda
