#pragma once

// Mapping network outputs back to curves and category labels, and the
// evaluation metrics.

#include <span>

#include <Eigen/Dense>

#include "fungcn/embedding.hpp"
#include "fungcn/fda.hpp"

namespace fungcn::decode {

/// Destandardizes `coeffs` slot by slot (x = mean + sd * z) and wraps the
/// result as a curve in `basis`.
fda::Curve coeffs_to_curve(const Eigen::VectorXd& coeffs, const fda::BasisPtr& basis,
                           const Eigen::VectorXd& mean, const Eigen::VectorXd& sd);

/// Same, using row `feature` of tensor stats.
fda::Curve coeffs_to_curve(const Eigen::VectorXd& coeffs, const fda::BasisPtr& basis,
                           const embedding::SlotStats& stats, int feature);

/// Codebook vectors in the standardized space: (v - mean) / sd per slot.
Eigen::MatrixXd standardized_codebook(const embedding::CategoryCodebook& codebook,
                                      const Eigen::VectorXd& mean, const Eigen::VectorXd& sd);

/// Nearest level in the standardized space; ties go to the lowest level.
int decode_categorical(const Eigen::VectorXd& pred, const embedding::CategoryCodebook& codebook,
                       const Eigen::VectorXd& mean, const Eigen::VectorXd& sd);
int decode_categorical(const Eigen::VectorXd& pred, const embedding::CategoryCodebook& codebook,
                       const embedding::SlotStats& stats, int feature);

struct StdRmse {
  double value = 0.0;
  int used = 0;     ///< entities contributing to the average
  int skipped = 0;  ///< entities with a constant true curve
};

/// sqrt(mean_i (1 / sd_i) * integral (truth_i - pred_i)^2), where sd_i is the
/// standard deviation (denominator n_grid) of truth_i over the quadrature grid.
StdRmse std_rmse(std::span<const fda::Curve> truth, std::span<const fda::Curve> pred);

/// Same, from values on `grid` (rows = entities).
StdRmse std_rmse_grid(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                      const fda::QuadratureGrid& grid);

double accuracy(std::span<const int> truth, std::span<const int> pred);

}  // namespace fungcn::decode
