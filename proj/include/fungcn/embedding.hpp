#pragma once

// Embedding of a multi-modal Dataset into standardized n x p x k tensors:
// FPC scores for the knowledge-graph input, B-spline coefficients for the
// network input. Categorical features map to fixed random codebook vectors;
// scalars are treated as constant curves.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fungcn/dataset.hpp"
#include "fungcn/fda.hpp"

namespace fungcn::embedding {

enum class Kind { graph, gcn };

std::string to_string(Kind kind);
Kind parse_kind(const std::string& text);

/// Default k_graph.
inline constexpr int kDefaultKGraph = 3;
/// k_gcn for classification, regression, forecasting.
inline constexpr int kDefaultKGcnClassification = 5;
inline constexpr int kDefaultKGcnRegression = 10;
inline constexpr int kDefaultKGcnForecast = 20;

struct CategoryCodebook {
  std::string feature;
  Eigen::MatrixXd vectors;  ///< levels x k, row l is the vector of level l
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Level vectors drawn i.i.d. N(0, 1) from a generator seeded with `seed`.
CategoryCodebook embed_categorical(const std::string& feature, int levels, int k,
                                   std::uint64_t seed);

/// Per (feature, slot) z-scoring parameters; x = mean + sd * z.
struct SlotStats {
  Eigen::MatrixXd mean;  ///< p x k
  Eigen::MatrixXd sd;    ///< p x k, population sd; 1 for constant slots

  bool empty() const { return mean.size() == 0; }
};

struct EmbedOptions {
  int k_smooth = 20;  ///< B-spline size used to smooth curves before FPCA
  std::vector<double> penalties = fda::default_penalty_grid();
};

class EmbeddedTensor {
 public:
  EmbeddedTensor() = default;
  EmbeddedTensor(Kind kind, int n, int p, int k);

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  int p() const { return p_; }
  int k() const { return k_; }

  double& at(int entity, int feature, int slot) { return data_[index(entity, feature, slot)]; }
  double at(int entity, int feature, int slot) const { return data_[index(entity, feature, slot)]; }

  /// p x k matrix of one entity.
  Eigen::MatrixXd entity(int i) const;
  /// n x k block of one feature.
  Eigen::MatrixXd feature_block(int j) const;
  void set_feature_block(int j, const Eigen::MatrixXd& block);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool standardized() const { return !stats.empty(); }

  std::vector<std::string> entity_ids;
  std::vector<std::string> feature_names;
  std::vector<Modality> modalities;
  std::vector<std::vector<std::string>> level_labels;  ///< categorical features, else empty
  SlotStats stats;
  std::vector<std::optional<CategoryCodebook>> codebooks;  ///< per feature
  fda::BasisPtr basis;                                     ///< gcn kind
  std::vector<std::optional<fda::FpcBasis>> fpc_bases;      ///< graph kind, per feature

 private:
  std::size_t index(int i, int j, int s) const {
    return (static_cast<std::size_t>(i) * p_ + j) * k_ + s;
  }

  Kind kind_ = Kind::gcn;
  int n_ = 0;
  int p_ = 0;
  int k_ = 0;
  std::vector<double> data_;
};

/// Per-entity FPC scores of a longitudinal feature (n x k_graph).
std::pair<Eigen::MatrixXd, fda::FpcBasis> embed_longitudinal_kg(const Dataset& dataset,
                                                                const std::string& feature,
                                                                int k_graph,
                                                                const EmbedOptions& options = {});

/// Per-entity GCV-penalized B-spline coefficients of a longitudinal feature (n x k_gcn).
std::pair<Eigen::MatrixXd, fda::BasisPtr> embed_longitudinal_gcn(const Dataset& dataset,
                                                                 const std::string& feature,
                                                                 int k_gcn,
                                                                 const EmbedOptions& options = {});

/// Constant curve v in the gcn basis: every B-spline coefficient equals v.
Eigen::VectorXd embed_scalar(double value, int k);

/// Ensemble embedding of a scalar feature. For the gcn kind each row is
/// (v, ..., v). For the graph kind the constant curves span a rank-one
/// space, so slot 0 holds the FPC score (v - mean v) * sqrt(|T|) and the
/// remaining slots are zero.
Eigen::MatrixXd embed_scalar_ensemble(const std::vector<double>& values, int k, Kind kind,
                                      const fda::Domain& domain);

/// Z-scores every (feature, slot) across entities with denominator n.
/// Constant slots become 0 with sd recorded as 1.
EmbeddedTensor standardize(EmbeddedTensor tensor);

/// Inverse of standardize using the stored stats.
EmbeddedTensor destandardize(EmbeddedTensor tensor);

/// Full embedding: dispatch per modality, stack, standardize.
EmbeddedTensor assemble(const Dataset& dataset, Kind kind, int k, std::uint64_t seed,
                        const EmbedOptions& options = {});

}  // namespace fungcn::embedding
