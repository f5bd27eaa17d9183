#pragma once

// Forward and backward passes shared by the dense public entry points and the
// sparse adjacency used during training.

#include <span>

#include "fungcn/gcn.hpp"

namespace fungcn::gcn {

void check_shapes(const GcnParams& params, Eigen::Index a_rows, Eigen::Index a_cols,
                  const Eigen::MatrixXd& x_entity, std::span<const int> target_rows);

template <typename AMat>
void forward_impl(const GcnParams& params, const AMat& a, const Eigen::MatrixXd& x,
                  std::span<const int> target_rows, Activations& act) {
  act.ax = a * x;
  act.z1 = act.ax * params.w1;
  act.z1.rowwise() += params.b1.transpose();
  act.h1 = act.z1.cwiseMax(0.0);
  act.ah1 = a * act.h1;
  act.z2 = act.ah1 * params.w2;
  act.z2.rowwise() += params.b2.transpose();
  act.h2 = act.z2.cwiseMax(0.0);
  act.out.resize(static_cast<Eigen::Index>(target_rows.size()), params.k2());
  for (std::size_t t = 0; t < target_rows.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    act.out.row(r) = act.h2.row(target_rows[t]) * params.w_out[t] + params.b_out[t].transpose();
  }
}

/// Accumulates the gradient of loss_scale * MSE into `grad` and returns the MSE.
template <typename AMat>
double backward_impl(const GcnParams& params, const AMat& a, const Eigen::MatrixXd& truth,
                     std::span<const int> target_rows, const Activations& act,
                     double loss_scale, GcnParams& grad) {
  const Eigen::MatrixXd diff = act.out - truth;
  const double mse = diff.squaredNorm() / static_cast<double>(diff.size());
  const Eigen::MatrixXd d_out = (2.0 * loss_scale / static_cast<double>(diff.size())) * diff;

  Eigen::MatrixXd d_h2 = Eigen::MatrixXd::Zero(act.h2.rows(), act.h2.cols());
  for (std::size_t t = 0; t < target_rows.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const int row = target_rows[t];
    grad.w_out[t].noalias() += act.h2.row(row).transpose() * d_out.row(r);
    grad.b_out[t] += d_out.row(r).transpose();
    d_h2.row(row).noalias() += d_out.row(r) * params.w_out[t].transpose();
  }
  const Eigen::MatrixXd d_z2 = (act.z2.array() > 0.0).select(d_h2, 0.0);
  grad.w2.noalias() += act.ah1.transpose() * d_z2;
  grad.b2 += d_z2.colwise().sum().transpose();
  const Eigen::MatrixXd d_h1 = a.transpose() * (d_z2 * params.w2.transpose());
  const Eigen::MatrixXd d_z1 = (act.z1.array() > 0.0).select(d_h1, 0.0);
  grad.w1.noalias() += act.ax.transpose() * d_z1;
  grad.b1 += d_z1.colwise().sum().transpose();
  return mse;
}

}  // namespace fungcn::gcn
