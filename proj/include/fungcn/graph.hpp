#pragma once

// Knowledge-graph estimation by node-wise functional feature selection.
//
// Every feature is regressed on all the others with a multi-response group
// lasso (one group per feature block of X_graph). Walking a geometric path
// c * lambda_max downwards, the value of c at which a feature first becomes
// active is its edge weight. The resulting adjacency is symmetrized, pruned
// at theta, and normalized as D A D with D = diag(row sums)^-1/2.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fungcn/embedding.hpp"

namespace fungcn::graph {

struct SolverConfig {
  int p_max = 5;           ///< stop once this many features have entered; 0 disables selection
  int path_length = 50;    ///< geometric steps from c = 1 down to c_min
  double c_min = 0.01;
  double tolerance = 1e-9; ///< relative KKT tolerance
  int max_iters = 100000;  ///< block sweeps per solve

  void validate() const;
  /// c values of the path, starting at 1.
  std::vector<double> path() const;
};

/// Gram matrix of a set of equal-width predictor blocks, plus the
/// eigendecomposition of each diagonal block. Shared read-only between the
/// node-wise problems of one graph.
struct GroupGram {
  Eigen::MatrixXd gram;
  int width = 0;
  std::vector<Eigen::MatrixXd> eigenvectors;
  std::vector<Eigen::VectorXd> eigenvalues;

  int groups() const { return width == 0 ? 0 : static_cast<int>(gram.rows() / width); }
  auto block(int a, int b) const { return gram.block(a * width, b * width, width, width); }

  static std::shared_ptr<const GroupGram> build(std::span<const Eigen::MatrixXd> blocks);
};

/// min_B 1/2 ||Y - sum_t X_t B_t||_F^2 + lambda sum_t ||B_t||_F, held in
/// Gram form: X_t^T X_s, X_t^T Y and ||Y||_F^2.
class GroupLassoProblem {
 public:
  GroupLassoProblem(std::shared_ptr<const GroupGram> gram, std::vector<int> groups,
                    Eigen::MatrixXd cross, double response_sq);

  static GroupLassoProblem from_blocks(const Eigen::MatrixXd& target,
                                       std::span<const Eigen::MatrixXd> predictors);

  /// Node-wise problem: `target` regressed on every other group of `gram`.
  /// Here the response is the target's own block, so every quantity comes
  /// from the shared Gram matrix.
  static GroupLassoProblem node_wise(std::shared_ptr<const GroupGram> gram, int target);

  int groups() const { return static_cast<int>(groups_.size()); }
  int width() const { return gram_->width; }
  int responses() const { return static_cast<int>(cross_.cols()); }
  int global_index(int local) const { return groups_[local]; }

  auto gram_block(int a, int b) const { return gram_->block(groups_[a], groups_[b]); }
  auto cross_block(int a) const { return cross_.middleRows(a * width(), width()); }
  const GroupGram& shared() const { return *gram_; }
  double response_sq() const { return response_sq_; }

 private:
  std::shared_ptr<const GroupGram> gram_;
  std::vector<int> groups_;
  Eigen::MatrixXd cross_;  ///< (groups * width) x responses
  double response_sq_;
};

struct Solution {
  std::vector<Eigen::MatrixXd> coeffs;  ///< one width x responses block per group
  double lambda = 0.0;
  int iterations = 0;
  double kkt_violation = 0.0;

  std::vector<int> active() const;  ///< local indices of non-zero groups
};

/// Smallest lambda with an all-zero solution: max_t ||X_t^T Y||_F.
/// Throws a degenerate error when every predictor block is identically zero.
double lambda_max(const GroupLassoProblem& problem);
double lambda_max(const Eigen::MatrixXd& target, std::span<const Eigen::MatrixXd> predictors);

double objective(const GroupLassoProblem& problem, const std::vector<Eigen::MatrixXd>& coeffs,
                 double lambda);

/// Worst KKT residual divided by max(lambda, 1): inactive groups contribute
/// max(0, ||g_t|| - lambda), active groups ||g_t - lambda B_t / ||B_t|| ||,
/// with g_t = X_t^T (Y - X B).
double kkt_violation(const GroupLassoProblem& problem, const std::vector<Eigen::MatrixXd>& coeffs,
                     double lambda);

/// Block coordinate descent with exact block minimization and an active set.
/// Throws a convergence error when the KKT tolerance is not met in max_iters sweeps.
Solution solve_group_lasso(const GroupLassoProblem& problem, double lambda,
                           const Solution* warm_start, const SolverConfig& config);

struct Selection {
  int feature = 0;
  double c_lambda = 0.0;
};

struct SelectionPath {
  int target = 0;
  std::vector<Selection> selections;  ///< in entry order
};

/// Selection path for one target over a node-wise problem.
SelectionPath feature_select_path(const GroupLassoProblem& problem, int target,
                                  const SolverConfig& config);
SelectionPath feature_select_path(int target, const embedding::EmbeddedTensor& x_graph,
                                  const SolverConfig& config);

/// p x p matrix with 1 on the diagonal and row j holding target j's c values.
Eigen::MatrixXd build_adjacency(std::span<const SelectionPath> paths, int p);

struct KnowledgeGraph {
  Eigen::MatrixXd a_raw;
  Eigen::MatrixXd a_sym;   ///< (A + A^T) / 2 after pruning
  Eigen::MatrixXd a_norm;  ///< D a_sym D
  double theta = 0.7;
  std::vector<SelectionPath> paths;

  int p() const { return static_cast<int>(a_raw.rows()); }
};

/// Default pruning thresholds for synthetic and survey data.
inline constexpr double kThetaSynthetic = 0.7;
inline constexpr double kThetaSurvey = 0.5;

KnowledgeGraph finalize(const Eigen::MatrixXd& a_raw, double theta);

/// All p node-wise selections (parallel over targets), then assembly.
KnowledgeGraph estimate_graph(const embedding::EmbeddedTensor& x_graph, const SolverConfig& config,
                              double theta);

}  // namespace fungcn::graph
