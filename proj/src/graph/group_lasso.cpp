#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "fungcn/error.hpp"
#include "fungcn/graph.hpp"

namespace fungcn::graph {

void SolverConfig::validate() const {
  if (p_max < 0) throw contract_error("config", "p_max must be >= 0");
  if (path_length < 2) throw contract_error("config", "path_length must be >= 2");
  if (!(c_min > 0.0 && c_min < 1.0)) throw contract_error("config", "c_min must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw contract_error("config", "tolerance must be positive");
  if (max_iters < 1) throw contract_error("config", "max_iters must be >= 1");
}

std::vector<double> SolverConfig::path() const {
  std::vector<double> c(static_cast<std::size_t>(path_length));
  for (int i = 0; i < path_length; ++i) {
    c[i] = std::pow(c_min, static_cast<double>(i) / (path_length - 1));
  }
  c.front() = 1.0;
  return c;
}

std::shared_ptr<const GroupGram> GroupGram::build(std::span<const Eigen::MatrixXd> blocks) {
  auto out = std::make_shared<GroupGram>();
  if (blocks.empty()) return out;
  const Eigen::Index n = blocks.front().rows();
  const Eigen::Index w = blocks.front().cols();
  Eigen::MatrixXd x(n, w * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (blocks[t].rows() != n || blocks[t].cols() != w) {
      throw contract_error("group-lasso", "predictor blocks must share one shape");
    }
    x.middleCols(static_cast<Eigen::Index>(t) * w, w) = blocks[t];
  }
  out->width = static_cast<int>(w);
  out->gram.noalias() = x.transpose() * x;
  for (int t = 0; t < out->groups(); ++t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(out->block(t, t)));
    out->eigenvectors.push_back(eig.eigenvectors());
    out->eigenvalues.push_back(eig.eigenvalues().cwiseMax(0.0));
  }
  return out;
}

GroupLassoProblem::GroupLassoProblem(std::shared_ptr<const GroupGram> gram, std::vector<int> groups,
                                     Eigen::MatrixXd cross, double response_sq)
    : gram_(std::move(gram)), groups_(std::move(groups)), cross_(std::move(cross)),
      response_sq_(response_sq) {
  if (cross_.rows() != static_cast<Eigen::Index>(groups_.size()) * gram_->width) {
    throw contract_error("group-lasso", "cross-product rows do not match the groups");
  }
}

GroupLassoProblem GroupLassoProblem::from_blocks(const Eigen::MatrixXd& target,
                                                 std::span<const Eigen::MatrixXd> predictors) {
  if (predictors.empty()) throw contract_error("group-lasso", "no predictor blocks");
  auto gram = GroupGram::build(predictors);
  const Eigen::Index w = gram->width;
  Eigen::MatrixXd cross(w * static_cast<Eigen::Index>(predictors.size()), target.cols());
  std::vector<int> groups;
  for (std::size_t t = 0; t < predictors.size(); ++t) {
    if (predictors[t].rows() != target.rows()) {
      throw contract_error("group-lasso", "target and predictors differ in row count");
    }
    cross.middleRows(static_cast<Eigen::Index>(t) * w, w).noalias() =
        predictors[t].transpose() * target;
    groups.push_back(static_cast<int>(t));
  }
  return GroupLassoProblem(std::move(gram), std::move(groups), std::move(cross),
                           target.squaredNorm());
}

GroupLassoProblem GroupLassoProblem::node_wise(std::shared_ptr<const GroupGram> gram, int target) {
  const int total = gram->groups();
  if (target < 0 || target >= total) throw contract_error("group-lasso", "target out of range");
  const int w = gram->width;
  std::vector<int> groups;
  Eigen::MatrixXd cross(static_cast<Eigen::Index>(total - 1) * w, w);
  for (int g = 0, row = 0; g < total; ++g) {
    if (g == target) continue;
    cross.middleRows(row * w, w) = gram->block(g, target);
    groups.push_back(g);
    ++row;
  }
  const double response_sq = gram->block(target, target).trace();
  return GroupLassoProblem(std::move(gram), std::move(groups), std::move(cross), response_sq);
}

std::vector<int> Solution::active() const {
  std::vector<int> out;
  for (std::size_t t = 0; t < coeffs.size(); ++t) {
    if (coeffs[t].squaredNorm() > 0.0) out.push_back(static_cast<int>(t));
  }
  return out;
}

double lambda_max(const GroupLassoProblem& problem) {
  bool any_nonzero = false;
  double best = 0.0;
  for (int t = 0; t < problem.groups(); ++t) {
    if (problem.gram_block(t, t).trace() > 0.0) any_nonzero = true;
    best = std::max(best, problem.cross_block(t).norm());
  }
  if (!any_nonzero) throw numerical_error("degenerate", "every predictor block is identically zero");
  return best;
}

double lambda_max(const Eigen::MatrixXd& target, std::span<const Eigen::MatrixXd> predictors) {
  return lambda_max(GroupLassoProblem::from_blocks(target, predictors));
}

namespace {

/// Gradient blocks g_t = X_t^T (Y - X B) from the non-zero groups only.
std::vector<Eigen::MatrixXd> residual_correlations(const GroupLassoProblem& problem,
                                                   const std::vector<Eigen::MatrixXd>& coeffs) {
  std::vector<int> nonzero;
  for (int s = 0; s < problem.groups(); ++s) {
    if (coeffs[s].squaredNorm() > 0.0) nonzero.push_back(s);
  }
  std::vector<Eigen::MatrixXd> grad(static_cast<std::size_t>(problem.groups()));
  for (int t = 0; t < problem.groups(); ++t) {
    grad[t] = problem.cross_block(t);
    for (int s : nonzero) grad[t].noalias() -= problem.gram_block(t, s) * coeffs[s];
  }
  return grad;
}

double group_violation(const Eigen::MatrixXd& grad, const Eigen::MatrixXd& coeff, double lambda) {
  const double norm = coeff.norm();
  if (norm == 0.0) return std::max(0.0, grad.norm() - lambda);
  return (grad - (lambda / norm) * coeff).norm();
}

/// Exact minimizer of 1/2 tr(B^T G B) - tr(B^T Z) + lambda ||B||_F, with
/// G = Q diag(ev) Q^T. Non-zero solutions satisfy B = (G + lambda/r I)^-1 Z
/// with r = ||B||, found as the root of the convex decreasing
/// f(r) = sum_i a_i / (ev_i r + lambda)^2 - 1.
Eigen::MatrixXd block_minimizer(const Eigen::MatrixXd& z, const Eigen::MatrixXd& q,
                                const Eigen::VectorXd& ev, double lambda) {
  const double z_norm = z.norm();
  if (z_norm <= lambda || z_norm == 0.0) return Eigen::MatrixXd::Zero(z.rows(), z.cols());
  const Eigen::MatrixXd c = q.transpose() * z;
  const double ev_floor = 1e-13 * std::max(1.0, ev.maxCoeff());
  const Eigen::Index w = ev.size();

  if (lambda == 0.0) {
    Eigen::MatrixXd scaled = c;
    for (Eigen::Index i = 0; i < w; ++i) {
      scaled.row(i) *= ev[i] > ev_floor ? 1.0 / ev[i] : 0.0;
    }
    return q * scaled;
  }

  const Eigen::VectorXd a = c.rowwise().squaredNorm();
  double r = 0.0;
  for (int it = 0; it < 200; ++it) {
    double f = -1.0;
    double df = 0.0;
    for (Eigen::Index i = 0; i < w; ++i) {
      const double denom = ev[i] * r + lambda;
      f += a[i] / (denom * denom);
      df -= 2.0 * a[i] * ev[i] / (denom * denom * denom);
    }
    if (df >= 0.0) break;  // no curvature left: G annihilates Z
    const double step = -f / df;
    r += step;
    if (std::abs(step) <= 1e-15 * std::max(r, 1e-300)) break;
  }
  Eigen::MatrixXd scaled = c;
  for (Eigen::Index i = 0; i < w; ++i) scaled.row(i) /= (ev[i] + lambda / r);
  return q * scaled;
}

}  // namespace

double objective(const GroupLassoProblem& problem, const std::vector<Eigen::MatrixXd>& coeffs,
                 double lambda) {
  double value = 0.5 * problem.response_sq();
  double penalty = 0.0;
  for (int t = 0; t < problem.groups(); ++t) {
    if (coeffs[t].squaredNorm() == 0.0) continue;
    value -= (coeffs[t].array() * problem.cross_block(t).array()).sum();
    for (int s = 0; s < problem.groups(); ++s) {
      if (coeffs[s].squaredNorm() == 0.0) continue;
      value += 0.5 * (coeffs[t].array() * (problem.gram_block(t, s) * coeffs[s]).array()).sum();
    }
    penalty += coeffs[t].norm();
  }
  return value + lambda * penalty;
}

double kkt_violation(const GroupLassoProblem& problem, const std::vector<Eigen::MatrixXd>& coeffs,
                     double lambda) {
  const auto grad = residual_correlations(problem, coeffs);
  double worst = 0.0;
  for (int t = 0; t < problem.groups(); ++t) {
    worst = std::max(worst, group_violation(grad[t], coeffs[t], lambda));
  }
  return worst / std::max(lambda, 1.0);
}

Solution solve_group_lasso(const GroupLassoProblem& problem, double lambda,
                           const Solution* warm_start, const SolverConfig& config) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw contract_error("group-lasso", "lambda must be finite and >= 0");
  }
  const int groups = problem.groups();
  const int w = problem.width();
  const int m = problem.responses();
  const GroupGram& shared = problem.shared();

  Solution sol;
  sol.lambda = lambda;
  if (warm_start && static_cast<int>(warm_start->coeffs.size()) == groups) {
    sol.coeffs = warm_start->coeffs;
  } else {
    sol.coeffs.assign(static_cast<std::size_t>(groups), Eigen::MatrixXd::Zero(w, m));
  }

  const double scale = std::max(lambda, 1.0);
  const double tol = config.tolerance * scale;
  std::vector<char> in_active(static_cast<std::size_t>(groups), 0);
  std::vector<int> active;
  for (int t = 0; t < groups; ++t) {
    if (sol.coeffs[t].squaredNorm() > 0.0) {
      in_active[t] = 1;
      active.push_back(t);
    }
  }

  auto grad = residual_correlations(problem, sol.coeffs);
  int sweeps = 0;
  while (sweeps < config.max_iters) {
    // Coordinate sweeps over the active set until it is stationary.
    while (sweeps < config.max_iters) {
      ++sweeps;
      for (int t : active) {
        const int g = problem.global_index(t);
        const Eigen::MatrixXd z = grad[t] + problem.gram_block(t, t) * sol.coeffs[t];
        Eigen::MatrixXd next =
            block_minimizer(z, shared.eigenvectors[g], shared.eigenvalues[g], lambda);
        const Eigen::MatrixXd delta = next - sol.coeffs[t];
        if (delta.squaredNorm() == 0.0) continue;
        sol.coeffs[t] = std::move(next);
        for (int s = 0; s < groups; ++s) grad[s].noalias() -= problem.gram_block(s, t) * delta;
      }
      double worst = 0.0;
      for (int t : active) worst = std::max(worst, group_violation(grad[t], sol.coeffs[t], lambda));
      if (worst <= 0.5 * tol) break;
    }

    // Refresh to shed accumulated rounding, then look for violators outside.
    grad = residual_correlations(problem, sol.coeffs);
    bool added = false;
    for (int t = 0; t < groups; ++t) {
      if (!in_active[t] && grad[t].norm() > lambda + 0.5 * tol) {
        in_active[t] = 1;
        active.push_back(t);
        added = true;
      }
    }
    if (added) continue;
    double worst = 0.0;
    for (int t : active) worst = std::max(worst, group_violation(grad[t], sol.coeffs[t], lambda));
    if (worst <= tol) break;
  }

  sol.iterations = sweeps;
  sol.kkt_violation = kkt_violation(problem, sol.coeffs, lambda);
  if (!(sol.kkt_violation <= config.tolerance)) {
    throw numerical_error("convergence", "group lasso did not converge in " +
                                             std::to_string(config.max_iters) +
                                             " sweeps; KKT violation " +
                                             std::to_string(sol.kkt_violation));
  }
  return sol;
}

}  // namespace fungcn::graph
