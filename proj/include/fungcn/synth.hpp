#pragma once

// Synthetic scenarios: Matern Gaussian-process curves, an interconnected
// block of 4 longitudinal, 2 scalar and 4 categorical features built from
// correlated noise, and independent filler features.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fungcn/dataset.hpp"
#include "fungcn/seed.hpp"

namespace fungcn::synth {

struct MaternParams {
  double eta2 = 1.0;     ///< pointwise variance
  double length = 0.25;  ///< range
  double nu = 3.5;       ///< smoothness

  void validate() const;
};

/// Matern covariance. Half-integer nu uses the exponential-polynomial form,
/// other values the modified Bessel function of the second kind.
double matern_cov(double t, double s, const MaternParams& params);

Eigen::MatrixXd matern_gram(const Eigen::VectorXd& grid, const MaternParams& params);

/// Lower Cholesky factor of `gram`, adding diagonal jitter 1e-12 .. 1e-6
/// (relative to the mean diagonal) only when needed.
Eigen::MatrixXd gp_factor(const Eigen::MatrixXd& gram, double* jitter_used = nullptr);

/// n zero-mean draws on the grid (rows = curves).
Eigen::MatrixXd sample_gp(int n, const Eigen::MatrixXd& factor, Rng& rng);
Eigen::MatrixXd sample_gp(int n, const Eigen::VectorXd& grid, const MaternParams& params,
                          std::uint64_t seed);

std::vector<fda::DiscreteSamples> to_samples(const Eigen::MatrixXd& curves,
                                             const Eigen::VectorXd& grid);

/// Random d x d correlation matrix (normalized Wishart) whose off-diagonal
/// entries are all at least `floor`.
Eigen::MatrixXd random_correlation(int d, double floor, Rng& rng);

/// Discrete Gaussian smoothing of each column with standard deviation `sigma`
/// grid steps, reflect boundary, truncated at 4 sigma.
Eigen::MatrixXd gaussian_filter(const Eigen::MatrixXd& columns, double sigma);

/// Layout of the correlated noise added to the interconnected block.
enum class NoiseLayout {
  features,  ///< 6 x 6 correlation across features, white in time before filtering
  time,      ///< grid x grid correlation across time, one curve shared by the 6 features
};

struct ScenarioConfig {
  int n = 300;
  int p = 20;
  double prop_longitudinal = 0.6;
  double prop_categorical = 0.2;
  double prop_scalar = 0.2;
  int p0 = 10;  ///< interconnected features: 10 (4 longitudinal, 4 categorical, 2 scalar) or 0
  int grid_size = 100;
  std::uint64_t seed = 0;
  MaternParams matern;
  double noise_cov_floor = 0.4;
  double weight_lo = -3.0;
  double weight_hi = 3.0;
  double noise_sigma = 3.0;  ///< Gaussian filter width in grid steps
  double noise_scale = 1.0;  ///< standard deviation of the smoothed noise
  NoiseLayout noise_layout = NoiseLayout::features;

  void validate() const;
  /// Feature counts (longitudinal, categorical, scalar).
  std::array<int, 3> counts() const;
};

struct InterconnectedBlock {
  std::vector<Feature> features;  ///< 4 longitudinal, 2 scalar, 4 categorical
  Eigen::MatrixXd noise_correlation;
  std::vector<int> category_time_index;  ///< grid index used by each categorical
};

inline constexpr int kCategoryLevels[4] = {2, 2, 3, 4};

/// Adds smoothed correlated noise to six base curve sets (each n x grid),
/// reduces two of them to curve means and derives four categoricals.
InterconnectedBlock make_interconnected(const std::vector<Eigen::MatrixXd>& base,
                                        const Eigen::VectorXd& grid,
                                        const ScenarioConfig& config, std::uint64_t seed);

struct Scenario {
  Dataset dataset;
  std::vector<int> interconnected;  ///< feature indices of the block
  Eigen::MatrixXd noise_correlation;
};

Scenario generate_scenario(const ScenarioConfig& config);

Eigen::VectorXd uniform_grid(int size, const fda::Domain& domain = {});

}  // namespace fungcn::synth
