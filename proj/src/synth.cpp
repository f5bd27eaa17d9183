#include "fungcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fungcn/error.hpp"

namespace fungcn::synth {

void MaternParams::validate() const {
  if (!(eta2 > 0.0) || !(length > 0.0) || !(nu > 0.0) || !std::isfinite(eta2 + length + nu)) {
    throw contract_error("config", "Matern parameters must be positive and finite");
  }
}

namespace {

bool half_integer(double nu, int& n) {
  const double m = nu - 0.5;
  if (m < 0.0 || std::abs(m - std::round(m)) > 1e-12) return false;
  n = static_cast<int>(std::round(m));
  return true;
}

}  // namespace

double matern_cov(double t, double s, const MaternParams& params) {
  params.validate();
  const double r = std::abs(t - s);
  if (r == 0.0) return params.eta2;
  const double x = std::sqrt(2.0 * params.nu) * r / params.length;
  int n = 0;
  if (half_integer(params.nu, n) && n <= 20) {
    // x^nu K_nu(x) / (Gamma(nu) 2^(nu-1)) for nu = n + 1/2 collapses to
    // exp(-x) * n!/(2n)! * sum_i (n+i)! / (i! (n-i)!) (2x)^(n-i).
    double sum = 0.0;
    double coef = std::tgamma(n + 1.0) / std::tgamma(2.0 * n + 1.0);
    for (int i = 0; i <= n; ++i) {
      const double term = std::tgamma(n + i + 1.0) / (std::tgamma(i + 1.0) * std::tgamma(n - i + 1.0));
      sum += term * std::pow(2.0 * x, n - i);
    }
    return params.eta2 * std::exp(-x) * coef * sum;
  }
  if (x > 700.0) return 0.0;
  const double scale = params.eta2 / (std::tgamma(params.nu) * std::pow(2.0, params.nu - 1.0));
  return scale * std::pow(x, params.nu) * std::cyl_bessel_k(params.nu, x);
}

Eigen::MatrixXd matern_gram(const Eigen::VectorXd& grid, const MaternParams& params) {
  const Eigen::Index m = grid.size();
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    gram(a, a) = params.eta2;
    for (Eigen::Index b = 0; b < a; ++b) gram(a, b) = gram(b, a) = matern_cov(grid[a], grid[b], params);
  }
  return gram;
}

Eigen::MatrixXd gp_factor(const Eigen::MatrixXd& gram, double* jitter_used) {
  if (gram.rows() < 2 || gram.rows() != gram.cols()) {
    throw contract_error("synth", "Gram matrix must be square with at least 2 points");
  }
  const double scale = gram.diagonal().mean();
  for (double jitter : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
  }
  throw numerical_error("generation", "Gram matrix is not factorizable even with jitter 1e-6");
}

Eigen::MatrixXd sample_gp(int n, const Eigen::MatrixXd& factor, Rng& rng) {
  if (n < 0) throw contract_error("synth", "negative sample count");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(factor.cols(), n);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < z.rows(); ++a) z(a, i) = normal(rng);
  return (factor * z).transpose();
}

Eigen::MatrixXd sample_gp(int n, const Eigen::VectorXd& grid, const MaternParams& params,
                          std::uint64_t seed) {
  Rng rng(seed);
  return sample_gp(n, gp_factor(matern_gram(grid, params)), rng);
}

std::vector<fda::DiscreteSamples> to_samples(const Eigen::MatrixXd& curves,
                                             const Eigen::VectorXd& grid) {
  std::vector<fda::DiscreteSamples> out(static_cast<std::size_t>(curves.rows()));
  const std::vector<double> times(grid.data(), grid.data() + grid.size());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    out[i].times = times;
    out[i].values.resize(static_cast<std::size_t>(curves.cols()));
    for (Eigen::Index a = 0; a < curves.cols(); ++a) out[i].values[a] = curves(i, a);
  }
  return out;
}

Eigen::MatrixXd random_correlation(int d, double floor, Rng& rng) {
  if (d < 1) throw contract_error("synth", "correlation dimension must be positive");
  if (!(floor >= 0.0 && floor < 1.0)) throw contract_error("config", "noise_cov_floor must lie in [0, 1)");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(d, d + 1);
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
  Eigen::MatrixXd c = g * g.transpose();
  auto normalize = [&](Eigen::MatrixXd& m) {
    const Eigen::VectorXd s = m.diagonal().cwiseSqrt().cwiseInverse();
    m = s.asDiagonal() * m * s.asDiagonal();
  };
  normalize(c);
  // Alternate between raising entries to the floor and projecting onto the
  // PSD cone. The equicorrelation matrix at the floor lies in both sets, so
  // this converges.
  for (int iter = 0; iter < 1000; ++iter) {
    c = c.cwiseMax(floor);
    c.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.eigenvalues().minCoeff() >= 1e-8) break;
    c = eig.eigenvectors() * eig.eigenvalues().cwiseMax(1e-8).asDiagonal() *
        eig.eigenvectors().transpose();
    normalize(c);
  }
  return c;
}

Eigen::MatrixXd gaussian_filter(const Eigen::MatrixXd& columns, double sigma) {
  if (!(sigma >= 0.0)) throw contract_error("config", "filter width must be non-negative");
  if (sigma == 0.0) return columns;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  Eigen::VectorXd w(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  w /= w.sum();
  const auto m = static_cast<int>(columns.rows());
  auto reflect = [m](int idx) {
    while (idx < 0 || idx >= m) idx = idx < 0 ? -idx - 1 : 2 * m - idx - 1;
    return idx;
  };
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(columns.rows(), columns.cols());
  for (int a = 0; a < m; ++a)
    for (int k = -radius; k <= radius; ++k) out.row(a) += w[k + radius] * columns.row(reflect(a + k));
  return out;
}

Eigen::VectorXd uniform_grid(int size, const fda::Domain& domain) {
  if (size < 2) throw contract_error("config", "grid needs at least 2 points");
  return Eigen::VectorXd::LinSpaced(size, domain.t_min, domain.t_max);
}

std::array<int, 3> ScenarioConfig::counts() const {
  const int lon = static_cast<int>(std::lround(prop_longitudinal * p));
  const int cat = static_cast<int>(std::lround(prop_categorical * p));
  return {lon, cat, p - lon - cat};
}

void ScenarioConfig::validate() const {
  if (n < 3) throw contract_error("config", "n must be at least 3");
  if (p < 2) throw contract_error("config", "p must be at least 2");
  for (double v : {prop_longitudinal, prop_categorical, prop_scalar}) {
    if (!(v >= 0.0 && v <= 1.0)) throw contract_error("config", "proportions must lie in [0, 1]");
  }
  if (std::abs(prop_longitudinal + prop_categorical + prop_scalar - 1.0) > 1e-9) {
    throw contract_error("config", "proportions must sum to 1");
  }
  if (p0 != 0 && p0 != 10) {
    throw contract_error("config", "p0 must be 10 (the interconnected block) or 0");
  }
  if (p0 > p) throw contract_error("config", "p0 exceeds p");
  const auto [lon, cat, sca] = counts();
  if (lon < 0 || cat < 0 || sca < 0) throw contract_error("config", "proportions give negative counts");
  if (p0 == 10 && (lon < 4 || cat < 4 || sca < 2)) {
    throw contract_error("config", "proportions leave no room for the interconnected block "
                                   "(needs 4 longitudinal, 4 categorical, 2 scalar)");
  }
  if (grid_size < 5) throw contract_error("config", "grid_size must be at least 5");
  matern.validate();
  if (!(noise_cov_floor >= 0.0 && noise_cov_floor < 1.0)) {
    throw contract_error("config", "noise_cov_floor must lie in [0, 1)");
  }
  if (!(weight_lo < weight_hi)) throw contract_error("config", "weight range is empty");
  if (!(noise_sigma >= 0.0) || !(noise_scale >= 0.0)) {
    throw contract_error("config", "noise parameters must be non-negative");
  }
}

namespace {

Feature longitudinal_feature(std::string name, const Eigen::MatrixXd& curves,
                             const Eigen::VectorXd& grid) {
  Feature f;
  f.name = std::move(name);
  f.modality = Modality::longitudinal();
  f.samples = to_samples(curves, grid);
  return f;
}

Feature scalar_feature(std::string name, std::vector<double> values) {
  Feature f;
  f.name = std::move(name);
  f.modality = Modality::scalar();
  f.scalars = std::move(values);
  return f;
}

Feature categorical_feature(std::string name, int levels, std::vector<int> assignment) {
  Feature f;
  f.name = std::move(name);
  f.modality = Modality::categorical(levels);
  f.levels = std::move(assignment);
  for (int l = 0; l < levels; ++l) f.level_labels.push_back(std::to_string(l + 1));
  return f;
}

}  // namespace

InterconnectedBlock make_interconnected(const std::vector<Eigen::MatrixXd>& base,
                                        const Eigen::VectorXd& grid,
                                        const ScenarioConfig& config, std::uint64_t seed) {
  if (base.size() != 6) throw contract_error("synth", "the interconnected block needs 6 base features");
  const Eigen::Index n = base.front().rows();
  const Eigen::Index m = grid.size();
  for (const auto& b : base) {
    if (b.rows() != n || b.cols() != m) throw contract_error("synth", "base curves have mismatched shapes");
  }

  InterconnectedBlock block;
  Rng rng = make_rng(seed, "synth/block");
  std::vector<Eigen::MatrixXd> curves = base;
  std::normal_distribution<double> normal(0.0, 1.0);
  Rng noise_rng = make_rng(seed, "synth/block-noise");
  if (config.noise_layout == NoiseLayout::time) {
    // One noise curve per entity, shared by the six features.
    block.noise_correlation = random_correlation(static_cast<int>(m), config.noise_cov_floor, rng);
    const Eigen::MatrixXd chol = gp_factor(block.noise_correlation);
    const Eigen::MatrixXd filter = gaussian_filter(Eigen::MatrixXd::Identity(m, m), config.noise_sigma);
    const Eigen::MatrixXd mix = filter * chol;
    const double gain = std::sqrt(mix.rowwise().squaredNorm().mean());
    Eigen::VectorXd white(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index a = 0; a < m; ++a) white[a] = normal(noise_rng);
      const Eigen::VectorXd noise = mix * white * (config.noise_scale / gain);
      for (int k = 0; k < 6; ++k) curves[k].row(i) += noise.transpose();
    }
  } else {
    block.noise_correlation = random_correlation(6, config.noise_cov_floor, rng);
    const Eigen::MatrixXd chol = gp_factor(block.noise_correlation);
    // Unit-variance rescaling of the filtered white noise.
    Eigen::MatrixXd impulse = Eigen::MatrixXd::Zero(m, 1);
    impulse(m / 2, 0) = 1.0;
    const double gain = gaussian_filter(impulse, config.noise_sigma).norm();
    Eigen::MatrixXd white(m, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index a = 0; a < m; ++a)
        for (int k = 0; k < 6; ++k) white(a, k) = normal(noise_rng);
      const Eigen::MatrixXd noise =
          gaussian_filter(white * chol.transpose(), config.noise_sigma) * (config.noise_scale / gain);
      for (int k = 0; k < 6; ++k) curves[k].row(i) += noise.col(k).transpose();
    }
  }

  for (int k = 0; k < 4; ++k) {
    block.features.push_back(longitudinal_feature("ic_long_" + std::to_string(k + 1), curves[k], grid));
  }
  for (int k = 0; k < 2; ++k) {
    const Eigen::VectorXd means = curves[4 + k].rowwise().mean();
    block.features.push_back(scalar_feature("ic_scalar_" + std::to_string(k + 1),
                                            std::vector<double>(means.data(), means.data() + n)));
  }

  std::uniform_int_distribution<int> pick_time(0, static_cast<int>(m) - 1);
  std::uniform_real_distribution<double> weight(config.weight_lo, config.weight_hi);
  for (int c = 0; c < 4; ++c) {
    const int levels = kCategoryLevels[c];
    const int tau = pick_time(rng);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < 4; ++k) v += weight(rng) * curves[k].col(tau);
    const double lo = v.minCoeff();
    const double span = v.maxCoeff() - lo;
    std::vector<int> assignment(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scaled = span > 0.0 ? 1.0 + (levels - 1) * (v[i] - lo) / span : 1.0;
      assignment[i] = std::clamp(static_cast<int>(std::lround(scaled)), 1, levels) - 1;
    }
    block.category_time_index.push_back(tau);
    block.features.push_back(
        categorical_feature("ic_cat_" + std::to_string(c + 1), levels, std::move(assignment)));
  }
  return block;
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const auto [n_lon, n_cat, n_sca] = config.counts();
  const Eigen::VectorXd grid = uniform_grid(config.grid_size);
  const Eigen::MatrixXd factor = gp_factor(matern_gram(grid, config.matern));

  Scenario scenario;
  Dataset& ds = scenario.dataset;
  ds.domain = fda::Domain(0.0, 1.0);
  const int width = static_cast<int>(std::to_string(config.n).size());
  for (int i = 0; i < config.n; ++i) {
    std::string id = std::to_string(i + 1);
    ds.entity_ids.push_back("e" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id);
  }

  int filler_lon = n_lon, filler_cat = n_cat, filler_sca = n_sca;
  if (config.p0 == 10) {
    std::vector<Eigen::MatrixXd> base;
    for (int k = 0; k < 6; ++k) {
      Rng rng = make_rng(config.seed, "synth/base", static_cast<std::uint64_t>(k));
      base.push_back(sample_gp(config.n, factor, rng));
    }
    InterconnectedBlock block = make_interconnected(base, grid, config, config.seed);
    scenario.noise_correlation = block.noise_correlation;
    for (Feature& f : block.features) {
      scenario.interconnected.push_back(static_cast<int>(ds.features.size()));
      ds.features.push_back(std::move(f));
    }
    filler_lon -= 4;
    filler_cat -= 4;
    filler_sca -= 2;
  }

  for (int j = 0; j < filler_lon; ++j) {
    Rng rng = make_rng(config.seed, "synth/filler-longitudinal", static_cast<std::uint64_t>(j));
    ds.features.push_back(
        longitudinal_feature("long_" + std::to_string(j + 1), sample_gp(config.n, factor, rng), grid));
  }
  for (int j = 0; j < filler_cat; ++j) {
    Rng rng = make_rng(config.seed, "synth/filler-categorical", static_cast<std::uint64_t>(j));
    const int levels = std::uniform_int_distribution<int>(2, 5)(rng);
    std::vector<int> assignment(static_cast<std::size_t>(config.n));
    for (int i = 0; i < config.n; ++i) assignment[i] = i % levels;
    std::shuffle(assignment.begin(), assignment.end(), rng);
    ds.features.push_back(categorical_feature("cat_" + std::to_string(j + 1), levels, std::move(assignment)));
  }
  for (int j = 0; j < filler_sca; ++j) {
    Rng rng = make_rng(config.seed, "synth/filler-scalar", static_cast<std::uint64_t>(j));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(static_cast<std::size_t>(config.n));
    for (double& v : values) v = normal(rng);
    ds.features.push_back(scalar_feature("scalar_" + std::to_string(j + 1), std::move(values)));
  }
  ds.validate();
  return scenario;
}

}  // namespace fungcn::synth
