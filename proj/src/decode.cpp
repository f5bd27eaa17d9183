#include "fungcn/decode.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fungcn/error.hpp"

namespace fungcn::decode {

namespace {

void check_stats(Eigen::Index k, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  if (mean.size() == 0 || sd.size() == 0) throw contract_error("decode", "missing stats");
  if (mean.size() != k || sd.size() != k) {
    throw contract_error("decode", "stats width " + std::to_string(mean.size()) +
                                       " does not match length " + std::to_string(k));
  }
}

}  // namespace

fda::Curve coeffs_to_curve(const Eigen::VectorXd& coeffs, const fda::BasisPtr& basis,
                           const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  if (!basis) throw contract_error("decode", "missing basis");
  if (coeffs.size() != basis->size()) {
    throw contract_error("decode", "coefficient length " + std::to_string(coeffs.size()) +
                                       " does not match basis size " +
                                       std::to_string(basis->size()));
  }
  check_stats(coeffs.size(), mean, sd);
  return fda::Curve(basis, mean + sd.cwiseProduct(coeffs));
}

fda::Curve coeffs_to_curve(const Eigen::VectorXd& coeffs, const fda::BasisPtr& basis,
                           const embedding::SlotStats& stats, int feature) {
  if (stats.empty()) throw contract_error("decode", "missing stats");
  if (feature < 0 || feature >= stats.mean.rows()) {
    throw contract_error("decode", "feature index out of range");
  }
  return coeffs_to_curve(coeffs, basis, stats.mean.row(feature).transpose(),
                         stats.sd.row(feature).transpose());
}

Eigen::MatrixXd standardized_codebook(const embedding::CategoryCodebook& codebook,
                                      const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  if (codebook.vectors.size() == 0) throw contract_error("decode", "empty codebook");
  check_stats(codebook.dim(), mean, sd);
  Eigen::MatrixXd z = codebook.vectors;
  z.rowwise() -= mean.transpose();
  return z.array().rowwise() / sd.transpose().array();
}

int decode_categorical(const Eigen::VectorXd& pred, const embedding::CategoryCodebook& codebook,
                       const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  const Eigen::MatrixXd z = standardized_codebook(codebook, mean, sd);
  if (pred.size() != z.cols()) {
    throw contract_error("decode", "prediction length does not match the codebook width");
  }
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < z.rows(); ++l) {
    const double d = (z.row(l).transpose() - pred).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(l);
    }
  }
  return best;
}

int decode_categorical(const Eigen::VectorXd& pred, const embedding::CategoryCodebook& codebook,
                       const embedding::SlotStats& stats, int feature) {
  if (stats.empty()) throw contract_error("decode", "missing stats");
  if (feature < 0 || feature >= stats.mean.rows()) {
    throw contract_error("decode", "feature index out of range");
  }
  return decode_categorical(pred, codebook, stats.mean.row(feature).transpose(),
                            stats.sd.row(feature).transpose());
}

StdRmse std_rmse_grid(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                      const fda::QuadratureGrid& grid) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw contract_error("metric", "truth and prediction shapes differ");
  }
  if (truth.cols() != grid.size()) throw contract_error("metric", "values do not match the grid");
  StdRmse out;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const Eigen::VectorXd y = truth.row(i).transpose();
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      ++out.skipped;
      continue;
    }
    const Eigen::VectorXd diff = y - pred.row(i).transpose();
    acc += grid.integrate(diff.cwiseAbs2()) / sd;
    ++out.used;
  }
  if (out.used == 0) throw contract_error("metric", "every true curve is constant");
  out.value = std::sqrt(acc / out.used);
  return out;
}

StdRmse std_rmse(std::span<const fda::Curve> truth, std::span<const fda::Curve> pred) {
  if (truth.size() != pred.size()) throw contract_error("metric", "truth and prediction counts differ");
  if (truth.empty()) throw contract_error("metric", "no curves to compare");
  const fda::Domain domain = truth.front().domain();
  const auto grid = fda::QuadratureGrid::simpson(domain);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(truth.size()), grid.size());
  Eigen::MatrixXd yhat(y.rows(), y.cols());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(truth[i].domain() == domain) || !(pred[i].domain() == domain)) {
      throw contract_error("metric", "curves live on different domains");
    }
    y.row(static_cast<Eigen::Index>(i)) = truth[i].on_grid(grid).transpose();
    yhat.row(static_cast<Eigen::Index>(i)) = pred[i].on_grid(grid).transpose();
  }
  return std_rmse_grid(y, yhat, grid);
}

double accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw contract_error("metric", "label counts differ");
  if (truth.empty()) throw contract_error("metric", "accuracy of an empty set is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace fungcn::decode
