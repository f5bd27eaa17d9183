#include <cmath>
#include <limits>
#include <string>

#include "fungcn/error.hpp"
#include "fungcn/fda.hpp"

namespace fungcn::fda {

std::vector<double> default_penalty_grid() {
  constexpr int kCount = 20;
  std::vector<double> grid(kCount);
  for (int i = 0; i < kCount; ++i) {
    grid[i] = std::pow(10.0, -8.0 + 10.0 * i / (kCount - 1));
  }
  return grid;
}

PenalizedSmoother::PenalizedSmoother(BasisPtr basis, std::vector<double> times,
                                     std::vector<double> penalties)
    : basis_(std::move(basis)), times_(std::move(times)) {
  if (penalties.empty()) throw contract_error("smoothing", "empty penalty grid");
  design_ = basis_->design(std::span<const double>(times_));
  const Eigen::MatrixXd gram = design_.transpose() * design_;
  levels_.reserve(penalties.size());
  for (double penalty : penalties) {
    if (!(penalty > 0.0) || !std::isfinite(penalty)) {
      throw contract_error("smoothing", "penalties must be positive and finite");
    }
    Level level{penalty, Eigen::LLT<Eigen::MatrixXd>(gram + penalty * basis_->roughness()), 0.0,
                false};
    if (level.llt.info() == Eigen::Success && level.llt.rcond() > 1e-14) {
      level.trace = level.llt.solve(gram).trace();
      level.usable = std::isfinite(level.trace);
    }
    levels_.push_back(std::move(level));
  }
}

Curve PenalizedSmoother::fit_at(std::span<const double> values, std::size_t penalty_index) const {
  const Level& level = levels_.at(penalty_index);
  if (!level.usable) {
    throw numerical_error("smoothing-failure", "normal equations singular at penalty " +
                                                   std::to_string(level.penalty));
  }
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  return Curve(basis_, level.llt.solve(design_.transpose() * y));
}

SmoothingResult PenalizedSmoother::fit(std::span<const double> values) const {
  if (values.size() != times_.size()) {
    throw contract_error("smoothing", "value count does not match sample times");
  }
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd bty = design_.transpose() * y;
  const double m = static_cast<double>(values.size());

  std::vector<double> scores(levels_.size(), std::numeric_limits<double>::infinity());
  std::size_t best = levels_.size();
  Eigen::VectorXd best_coeffs;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& level = levels_[i];
    if (!level.usable) continue;
    Eigen::VectorXd c = level.llt.solve(bty);
    if (!c.allFinite()) continue;
    const double dof = m - level.trace;
    if (dof <= 1e-10) continue;
    const double rss = (y - design_ * c).squaredNorm();
    scores[i] = m * rss / (dof * dof);
    if (best == levels_.size() || scores[i] < scores[best]) {
      best = i;
      best_coeffs = std::move(c);
    }
  }
  if (best == levels_.size()) {
    throw numerical_error("smoothing-failure",
                          "no penalty on the grid gave a usable penalized fit");
  }
  return SmoothingResult{Curve(basis_, std::move(best_coeffs)), levels_[best].penalty,
                         scores[best], std::move(scores)};
}

SmoothingResult smooth_samples(const DiscreteSamples& samples, BasisPtr basis,
                               std::span<const double> penalty_grid) {
  samples.validate(basis->domain(), BSplineBasis::kDegree + 2);
  PenalizedSmoother smoother(basis, samples.times,
                             std::vector<double>(penalty_grid.begin(), penalty_grid.end()));
  return smoother.fit(samples.values);
}

}  // namespace fungcn::fda
