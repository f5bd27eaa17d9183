#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fungcn/error.hpp"
#include "fungcn/graph.hpp"
#include "fungcn/parallel.hpp"

namespace fungcn::graph {

namespace {

// Bisection depth used to separate features that enter within one path step.
constexpr int kMaxRefineDepth = 20;

class PathWalker {
 public:
  PathWalker(const GroupLassoProblem& problem, int target, const SolverConfig& config,
             double lam_max)
      : problem_(problem), config_(config), lam_max_(lam_max) {
    path_.target = target;
  }

  SelectionPath run() {
    const auto c = config_.path();
    Solution previous;
    previous.coeffs.assign(static_cast<std::size_t>(problem_.groups()),
                           Eigen::MatrixXd::Zero(problem_.width(), problem_.responses()));
    double c_prev = c.front();
    for (std::size_t i = 1; i < c.size() && !full(); ++i) {
      Solution current = solve(c[i], previous);
      descend(c_prev, previous, c[i], current, 0);
      previous = std::move(current);
      c_prev = c[i];
    }
    return std::move(path_);
  }

 private:
  bool full() const { return static_cast<int>(path_.selections.size()) >= config_.p_max; }

  Solution solve(double c, const Solution& warm) {
    return solve_group_lasso(problem_, c * lam_max_, &warm, config_);
  }

  /// Records features first active in (c_hi, c_lo], ordering simultaneous
  /// entries by bisecting the interval.
  void descend(double c_hi, const Solution& hi, double c_lo, const Solution& lo, int depth) {
    std::vector<int> fresh;
    for (int t : lo.active()) {
      if (!seen_.contains(t)) fresh.push_back(t);
    }
    if (fresh.empty()) return;
    if (fresh.size() == 1 || depth >= kMaxRefineDepth) {
      std::stable_sort(fresh.begin(), fresh.end(), [&](int a, int b) {
        return lo.coeffs[a].norm() > lo.coeffs[b].norm();
      });
      for (int t : fresh) {
        if (full()) break;
        seen_.insert(t);
        path_.selections.push_back({problem_.global_index(t), c_lo});
      }
      return;
    }
    const double c_mid = std::sqrt(c_hi * c_lo);
    const Solution mid = solve(c_mid, hi);
    descend(c_hi, hi, c_mid, mid, depth + 1);
    if (!full()) descend(c_mid, mid, c_lo, lo, depth + 1);
  }

  const GroupLassoProblem& problem_;
  const SolverConfig& config_;
  double lam_max_;
  std::set<int> seen_;
  SelectionPath path_;
};

}  // namespace

SelectionPath feature_select_path(const GroupLassoProblem& problem, int target,
                                  const SolverConfig& config) {
  config.validate();
  SelectionPath empty{target, {}};
  if (config.p_max == 0 || problem.groups() == 0) return empty;
  const double lam_max = lambda_max(problem);
  if (lam_max <= 0.0) return empty;
  try {
    return PathWalker(problem, target, config, lam_max).run();
  } catch (const Error& e) {
    throw Error(e.error_class(), e.kind(),
                std::string(e.what()) + " (target " + std::to_string(target) + ")");
  }
}

SelectionPath feature_select_path(int target, const embedding::EmbeddedTensor& x_graph,
                                  const SolverConfig& config) {
  if (x_graph.p() < 2) throw contract_error("graph", "need at least 2 features");
  std::vector<Eigen::MatrixXd> blocks;
  for (int j = 0; j < x_graph.p(); ++j) blocks.push_back(x_graph.feature_block(j));
  const auto gram = GroupGram::build(blocks);
  return feature_select_path(GroupLassoProblem::node_wise(gram, target), target, config);
}

Eigen::MatrixXd build_adjacency(std::span<const SelectionPath> paths, int p) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p);
  std::vector<char> seen(static_cast<std::size_t>(p), 0);
  for (const SelectionPath& path : paths) {
    if (path.target < 0 || path.target >= p) {
      throw contract_error("assembly", "path target " + std::to_string(path.target) +
                                           " out of range");
    }
    if (seen[path.target]) {
      throw contract_error("assembly", "duplicate path for target " + std::to_string(path.target));
    }
    seen[path.target] = 1;
    for (const Selection& s : path.selections) {
      if (s.feature < 0 || s.feature >= p || s.feature == path.target) {
        throw contract_error("assembly", "invalid selected feature " + std::to_string(s.feature));
      }
      a(path.target, s.feature) = s.c_lambda;
    }
  }
  return a;
}

KnowledgeGraph finalize(const Eigen::MatrixXd& a_raw, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw contract_error("config", "theta must lie in (0, 1), got " + std::to_string(theta));
  }
  if (a_raw.rows() != a_raw.cols()) throw contract_error("graph", "adjacency must be square");
  if (a_raw.size() > 0 && (a_raw.minCoeff() < 0.0 || a_raw.maxCoeff() > 1.0)) {
    throw contract_error("graph", "adjacency entries must lie in [0, 1]");
  }
  if (!a_raw.diagonal().isOnes(0.0)) throw contract_error("graph", "adjacency diagonal must be 1");

  KnowledgeGraph g;
  g.theta = theta;
  g.a_raw = a_raw;
  g.a_sym = 0.5 * (a_raw + a_raw.transpose());
  g.a_sym = (g.a_sym.array() < theta).select(0.0, g.a_sym);
  const Eigen::VectorXd d = g.a_sym.rowwise().sum().cwiseSqrt().cwiseInverse();
  g.a_norm = d.asDiagonal() * g.a_sym * d.asDiagonal();
  return g;
}

KnowledgeGraph estimate_graph(const embedding::EmbeddedTensor& x_graph, const SolverConfig& config,
                              double theta) {
  config.validate();
  const int p = x_graph.p();
  if (p < 2) throw contract_error("graph", "need at least 2 features");
  std::vector<Eigen::MatrixXd> blocks;
  for (int j = 0; j < p; ++j) blocks.push_back(x_graph.feature_block(j));
  const auto gram = GroupGram::build(blocks);

  std::vector<SelectionPath> paths(static_cast<std::size_t>(p));
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t j) {
    const int target = static_cast<int>(j);
    paths[j] = feature_select_path(GroupLassoProblem::node_wise(gram, target), target, config);
  });
  KnowledgeGraph g = finalize(build_adjacency(paths, p), theta);
  g.paths = std::move(paths);
  return g;
}

}  // namespace fungcn::graph
