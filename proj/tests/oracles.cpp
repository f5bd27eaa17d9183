#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

double cox_de_boor(const std::vector<double>& knots, int i, int degree, double t) {
  const auto last = static_cast<int>(knots.size()) - 1;
  if (degree == 0) {
    const double lo = knots[i], hi = knots[i + 1];
    if (t >= lo && t < hi) return 1.0;
    // Right end: the last non-empty interval is closed.
    if (t == knots[last] && hi == knots[last] && lo < hi) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  const double d1 = knots[i + degree] - knots[i];
  const double d2 = knots[i + degree + 1] - knots[i + 1];
  if (d1 > 0) left = (t - knots[i]) / d1 * cox_de_boor(knots, i, degree - 1, t);
  if (d2 > 0) right = (knots[i + degree + 1] - t) / d2 * cox_de_boor(knots, i + 1, degree - 1, t);
  return left + right;
}

std::vector<double> clamped_knots(int k, double lo, double hi) {
  const int interior = k - 4;
  std::vector<double> knots(4, lo);
  for (int i = 1; i <= interior; ++i) knots.push_back(lo + (hi - lo) * i / (interior + 1));
  knots.insert(knots.end(), 4, hi);
  return knots;
}

double trapezoid(const Eigen::VectorXd& values, double step) {
  return step * (values.sum() - 0.5 * (values[0] + values[values.size() - 1]));
}

double poly_eval(const std::vector<double>& p, double t) {
  double acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * t + *it;
  return acc;
}

double poly_product_integral(const std::vector<double>& p, const std::vector<double>& q, double a, double b) {
  std::vector<double> prod(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) prod[i + j] += p[i] * q[j];
  }
  double acc = 0.0;
  for (std::size_t d = 0; d < prod.size(); ++d) {
    acc += prod[d] * (std::pow(b, d + 1) - std::pow(a, d + 1)) / static_cast<double>(d + 1);
  }
  return acc;
}

double group_lasso_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int width,
                             const Eigen::MatrixXd& coeffs, double lambda) {
  double penalty = 0.0;
  for (Eigen::Index g = 0; g < coeffs.rows() / width; ++g) penalty += coeffs.middleRows(g * width, width).norm();
  return 0.5 * (y - x * coeffs).squaredNorm() + lambda * penalty;
}

GroupLassoOracle proximal_group_lasso(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int width,
                                      double lambda, int max_iters, double tol) {
  const Eigen::MatrixXd gram = x.transpose() * x;
  const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lipschitz, 1e-300);
  const Eigen::MatrixXd xty = x.transpose() * y;
  const Eigen::Index groups = x.cols() / width;

  auto prox = [&](const Eigen::MatrixXd& v) {
    Eigen::MatrixXd out = v;
    for (Eigen::Index g = 0; g < groups; ++g) {
      auto block = out.middleRows(g * width, width);
      const double norm = block.norm();
      block *= norm > step * lambda ? 1.0 - step * lambda / norm : 0.0;
    }
    return out;
  };
  auto objective = [&](const Eigen::MatrixXd& b) { return group_lasso_objective(x, y, width, b, lambda); };

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(x.cols(), y.cols());
  Eigen::MatrixXd z = b;
  double momentum = 1.0;
  double f = objective(b);
  GroupLassoOracle out;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd next = prox(z - step * (gram * z - xty));
    const double f_next = objective(next);
    if (f_next > f) {
      // Restart the momentum when the objective goes up.
      z = b;
      momentum = 1.0;
      continue;
    }
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    z = next + ((momentum - 1.0) / m_next) * (next - b);
    const double change = (next - b).norm();
    b = next;
    momentum = m_next;
    f = f_next;
    out.iterations = it + 1;
    if (change <= tol * std::max(1.0, b.norm())) break;
  }
  out.coeffs = b;
  out.objective = f;
  return out;
}

std::vector<std::vector<double>> naive_forward(const NaiveGcn& net, const std::vector<std::vector<double>>& a,
                                               const std::vector<std::vector<double>>& x,
                                               const std::vector<int>& target_rows) {
  const std::size_t p = a.size(), h = net.b1.size();
  auto conv = [&](const std::vector<std::vector<double>>& in, const std::vector<std::vector<double>>& w,
                  const std::vector<double>& bias) {
    const std::size_t width = in[0].size();
    std::vector<std::vector<double>> out(p, std::vector<double>(h, 0.0));
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < h; ++c) {
        double acc = bias[c];
        for (std::size_t s = 0; s < p; ++s) {
          for (std::size_t m = 0; m < width; ++m) acc += a[r][s] * in[s][m] * w[m][c];
        }
        out[r][c] = acc > 0.0 ? acc : 0.0;
      }
    }
    return out;
  };
  const auto h1 = conv(x, net.w1, net.b1);
  const auto h2 = conv(h1, net.w2, net.b2);
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < target_rows.size(); ++t) {
    const auto& w = net.w_out[t];
    std::vector<double> row(net.b_out[t]);
    for (std::size_t c = 0; c < row.size(); ++c) {
      for (std::size_t m = 0; m < h; ++m) row[c] += h2[target_rows[t]][m] * w[m][c];
    }
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

DenseFpca dense_fpca(const Eigen::MatrixXd& values, double step, int count) {
  const Eigen::Index m = values.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, step);
  w[0] *= 0.5;
  w[m - 1] *= 0.5;
  const Eigen::MatrixXd centered = values.rowwise() - values.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(values.rows());
  const Eigen::VectorXd root = w.cwiseSqrt();
  const Eigen::MatrixXd sym = root.asDiagonal() * cov * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  DenseFpca out;
  out.eigenvalues.resize(count);
  out.functions.resize(m, count);
  for (int c = 0; c < count; ++c) {
    const Eigen::Index idx = m - 1 - c;
    out.eigenvalues[c] = eig.eigenvalues()[idx];
    out.functions.col(c) = eig.eigenvectors().col(idx).cwiseQuotient(root);
  }
  out.total_variance = eig.eigenvalues().sum();
  return out;
}

}  // namespace oracle
