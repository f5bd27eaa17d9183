#include "fungcn/fda.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fungcn/error.hpp"

namespace fungcn::fda {

Domain::Domain(double lo, double hi) : t_min(lo), t_max(hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw contract_error("domain", "require t_min < t_max, got [" + std::to_string(lo) + ", " +
                                       std::to_string(hi) + "]");
  }
}

QuadratureGrid QuadratureGrid::simpson(const Domain& domain, int nodes) {
  if (nodes < 3 || nodes % 2 == 0) {
    throw contract_error("quadrature", "Simpson rule needs an odd node count >= 3");
  }
  QuadratureGrid grid;
  grid.domain = domain;
  grid.points.resize(nodes);
  grid.weights.resize(nodes);
  const double h = domain.length() / (nodes - 1);
  for (int i = 0; i < nodes; ++i) {
    grid.points[i] = domain.t_min + h * i;
    const double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    grid.weights[i] = w * h / 3.0;
  }
  grid.points[nodes - 1] = domain.t_max;
  return grid;
}

BSplineBasis::BSplineBasis(int k, Domain domain) : k_(k), domain_(domain) {
  if (k < kDegree + 1) {
    throw contract_error("invalid-basis",
                         "cubic B-spline basis needs k >= 4, got " + std::to_string(k));
  }
  const int interior = k - kDegree - 1;
  knots_.reserve(static_cast<std::size_t>(k + kDegree + 1));
  for (int i = 0; i <= kDegree; ++i) knots_.push_back(domain.t_min);
  for (int i = 1; i <= interior; ++i) {
    knots_.push_back(domain.t_min + domain.length() * i / (interior + 1));
  }
  for (int i = 0; i <= kDegree; ++i) knots_.push_back(domain.t_max);

  const auto grid = QuadratureGrid::simpson(domain);
  const Eigen::MatrixXd d2 = design(grid.points, 2);
  roughness_ = d2.transpose() * grid.weights.asDiagonal() * d2;
}

std::vector<double> BSplineBasis::interior_knots() const {
  return {knots_.begin() + kDegree + 1, knots_.end() - kDegree - 1};
}

int BSplineBasis::find_span(double t) const {
  if (t >= domain_.t_max) return k_ - 1;
  // Last index i in [degree, k-1] with knots[i] <= t.
  auto it = std::upper_bound(knots_.begin() + kDegree, knots_.begin() + k_, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int BSplineBasis::eval_nonzero(double t, std::array<double, 4>& out, int derivative) const {
  if (!domain_.contains(t)) {
    throw contract_error("domain", "t = " + std::to_string(t) + " outside [" +
                                       std::to_string(domain_.t_min) + ", " +
                                       std::to_string(domain_.t_max) + "]");
  }
  constexpr int p = kDegree;
  const int span = find_span(t);
  out.fill(0.0);
  if (derivative > p) return span - p;

  // Triangular table of basis values for degrees 0..p (Cox-de Boor).
  double ndu[p + 1][p + 1];
  double left[p + 1];
  double right[p + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  if (derivative == 0) {
    for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];
    return span - p;
  }

  // Derivatives via the differentiated recurrence.
  double a[2][p + 1];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    double d = 0.0;
    const int k = derivative;
    for (int m = 1; m <= k; ++m) {
      d = 0.0;
      const int rk = r - m;
      const int pk = p - m;
      if (r >= m) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? m - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][m] = -a[s1][m - 1] / ndu[pk + 1][r];
        d += a[s2][m] * ndu[r][pk];
      }
      std::swap(s1, s2);
    }
    out[r] = d;
  }
  double factor = p;
  for (int m = 2; m <= derivative; ++m) factor *= (p - m + 1);
  for (int r = 0; r <= p; ++r) out[r] *= factor;
  return span - p;
}

Eigen::VectorXd BSplineBasis::eval(double t, int derivative) const {
  std::array<double, 4> vals{};
  const int first = eval_nonzero(t, vals, derivative);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k_);
  for (int j = 0; j < 4; ++j) out[first + j] = vals[j];
  return out;
}

Eigen::MatrixXd BSplineBasis::design(std::span<const double> times, int derivative) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), k_);
  std::array<double, 4> vals{};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const int first = eval_nonzero(times[i], vals, derivative);
    for (int j = 0; j < 4; ++j) out(static_cast<Eigen::Index>(i), first + j) = vals[j];
  }
  return out;
}

Eigen::MatrixXd BSplineBasis::design(const Eigen::VectorXd& times, int derivative) const {
  return design(std::span<const double>(times.data(), static_cast<std::size_t>(times.size())),
                derivative);
}

BasisPtr make_bspline_basis(int k, Domain domain) {
  return std::make_shared<const BSplineBasis>(k, domain);
}

Eigen::VectorXd eval_basis(const BSplineBasis& basis, double t) { return basis.eval(t); }

Curve::Curve(BasisPtr b, Eigen::VectorXd c) : basis(std::move(b)), coeffs(std::move(c)) {
  if (!basis) throw contract_error("curve", "null basis");
  if (coeffs.size() != basis->size()) {
    throw contract_error("curve", "coefficient length " + std::to_string(coeffs.size()) +
                                      " does not match basis size " +
                                      std::to_string(basis->size()));
  }
}

double Curve::operator()(double t) const {
  std::array<double, 4> vals{};
  const int first = basis->eval_nonzero(t, vals);
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) acc += vals[j] * coeffs[first + j];
  return acc;
}

Eigen::VectorXd Curve::on(const Eigen::VectorXd& times) const {
  return basis->design(times) * coeffs;
}

void DiscreteSamples::validate(const Domain& domain, std::size_t min_points) const {
  if (times.size() != values.size()) {
    throw contract_error("samples", "times and values differ in length");
  }
  if (times.size() < min_points) {
    throw contract_error("samples", "need at least " + std::to_string(min_points) +
                                        " observations, got " + std::to_string(times.size()));
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!domain.contains(times[i])) {
      throw contract_error("domain", "sample time " + std::to_string(times[i]) +
                                         " outside the domain");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw contract_error("samples", "times must be strictly increasing");
    }
    if (!std::isfinite(values[i])) {
      throw contract_error("samples", "non-finite observation");
    }
  }
}

double inner_product(const Curve& f, const Curve& g) {
  if (!(f.domain() == g.domain())) {
    throw contract_error("domain", "inner product of curves on different domains");
  }
  const auto grid = QuadratureGrid::simpson(f.domain());
  return grid.integrate(f.on_grid(grid).cwiseProduct(g.on_grid(grid)));
}

}  // namespace fungcn::fda
