#pragma once

// Functional data primitives: clamped cubic B-spline bases, Simpson
// quadrature, penalized smoothing with GCV, and discretized functional PCA.

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fungcn::fda {

/// Closed interval [t_min, t_max] on which curves live.
struct Domain {
  double t_min = 0.0;
  double t_max = 1.0;

  Domain() = default;
  Domain(double lo, double hi);

  double length() const { return t_max - t_min; }
  bool contains(double t) const { return t >= t_min && t <= t_max; }
  bool operator==(const Domain&) const = default;
};

/// Number of equispaced nodes used by every L2 integral in the library.
inline constexpr int kQuadratureNodes = 201;

/// Composite Simpson rule on an odd number of equispaced nodes.
struct QuadratureGrid {
  Domain domain;
  Eigen::VectorXd points;
  Eigen::VectorXd weights;

  static QuadratureGrid simpson(const Domain& domain, int nodes = kQuadratureNodes);

  Eigen::Index size() const { return points.size(); }
  double integrate(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    return weights.dot(values);
  }
};

/// Clamped cubic B-spline basis with equispaced interior knots.
///
/// The full knot vector repeats each boundary knot four times, so a curve's
/// value at t_min (t_max) equals its first (last) coefficient.
class BSplineBasis {
 public:
  static constexpr int kDegree = 3;

  BSplineBasis(int k, Domain domain);

  int size() const { return k_; }
  int degree() const { return kDegree; }
  const Domain& domain() const { return domain_; }
  const std::vector<double>& knots() const { return knots_; }
  std::vector<double> interior_knots() const;

  /// Values (or derivatives) of the at most four non-zero functions at t.
  /// Returns the index of the first of them.
  int eval_nonzero(double t, std::array<double, 4>& out, int derivative = 0) const;

  /// Dense length-k vector of basis values at t.
  Eigen::VectorXd eval(double t, int derivative = 0) const;

  /// m x k collocation matrix.
  Eigen::MatrixXd design(std::span<const double> times, int derivative = 0) const;
  Eigen::MatrixXd design(const Eigen::VectorXd& times, int derivative = 0) const;

  /// Roughness penalty R_rs = integral of b_r'' b_s'' (Simpson rule).
  const Eigen::MatrixXd& roughness() const { return roughness_; }

  bool operator==(const BSplineBasis& other) const {
    return k_ == other.k_ && domain_ == other.domain_;
  }

 private:
  int find_span(double t) const;

  int k_;
  Domain domain_;
  std::vector<double> knots_;
  Eigen::MatrixXd roughness_;
};

using BasisPtr = std::shared_ptr<const BSplineBasis>;

BasisPtr make_bspline_basis(int k, Domain domain);
Eigen::VectorXd eval_basis(const BSplineBasis& basis, double t);

/// A function expressed in a B-spline basis.
struct Curve {
  BasisPtr basis;
  Eigen::VectorXd coeffs;

  Curve(BasisPtr b, Eigen::VectorXd c);

  const Domain& domain() const { return basis->domain(); }
  double operator()(double t) const;
  Eigen::VectorXd on(const Eigen::VectorXd& times) const;
  Eigen::VectorXd on_grid(const QuadratureGrid& grid) const { return on(grid.points); }
};

/// Scattered observations of one curve.
struct DiscreteSamples {
  std::vector<double> times;
  std::vector<double> values;

  /// Throws unless times are strictly increasing, inside the domain, the same
  /// length as values, and at least `min_points` long.
  void validate(const Domain& domain, std::size_t min_points) const;
};

double inner_product(const Curve& f, const Curve& g);

/// L2 inner product of two callables on a domain, using the shared Simpson rule.
template <class F, class G>
double inner_product(F&& f, G&& g, const Domain& domain) {
  const auto grid = QuadratureGrid::simpson(domain);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    acc += grid.weights[i] * f(grid.points[i]) * g(grid.points[i]);
  }
  return acc;
}

/// 20 penalties, log-spaced over [1e-8, 1e2].
std::vector<double> default_penalty_grid();

struct SmoothingResult {
  Curve curve;
  double penalty = 0.0;
  double gcv = 0.0;
  std::vector<double> gcv_scores;  ///< one per grid penalty; +inf where undefined
};

/// Penalized least-squares smoother for a fixed set of sample times.
///
/// Factorizations are computed once per (times, penalty) and reused across
/// curves, which is the common case when entities share a sampling design.
class PenalizedSmoother {
 public:
  PenalizedSmoother(BasisPtr basis, std::vector<double> times, std::vector<double> penalties);

  const std::vector<double>& times() const { return times_; }

  /// Fit at every penalty and keep the GCV minimizer (ties -> smaller penalty).
  SmoothingResult fit(std::span<const double> values) const;

  /// Fit at one grid penalty.
  Curve fit_at(std::span<const double> values, std::size_t penalty_index) const;

 private:
  struct Level {
    double penalty;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double trace;
    bool usable;
  };

  BasisPtr basis_;
  std::vector<double> times_;
  Eigen::MatrixXd design_;
  std::vector<Level> levels_;
};

SmoothingResult smooth_samples(const DiscreteSamples& samples, BasisPtr basis,
                               std::span<const double> penalty_grid);

/// Functional principal components computed on the quadrature grid.
///
/// `mean` and the columns of `components` are grid values; components are
/// orthonormal under the grid weights.
struct FpcBasis {
  QuadratureGrid grid;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   ///< grid-size x k
  Eigen::VectorXd eigenvalues;  ///< k, non-increasing
  double total_variance = 0.0;  ///< trace of the covariance operator

  int size() const { return static_cast<int>(components.cols()); }
  double explained_fraction(int count) const;
};

FpcBasis fpca(std::span<const Curve> curves, int k_graph);

/// FPCA of curves already evaluated on `grid` (rows = curves).
FpcBasis fpca_on_grid(const Eigen::MatrixXd& values, const QuadratureGrid& grid, int k_graph);

Eigen::VectorXd project(const Curve& curve, const FpcBasis& fpc);
Eigen::VectorXd project_grid_values(const Eigen::VectorXd& values, const FpcBasis& fpc);

}  // namespace fungcn::fda
