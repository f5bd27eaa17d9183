#pragma once

// Train/test replications: split entities, train one model per target,
// decode held-out predictions and score them against reference predictors.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fungcn/dataset.hpp"
#include "fungcn/embedding.hpp"
#include "fungcn/gcn.hpp"
#include "fungcn/graph.hpp"

namespace fungcn::pipeline {

enum class TaskKind { regression, forecast, classification };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// Network task and default k_gcn of each task kind.
gcn::Task network_task(TaskKind kind);
gcn::Mode network_mode(TaskKind kind);
int default_k_gcn(TaskKind kind);

struct TrainOverrides {
  std::optional<double> learning_rate;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<double> val_fraction;
  std::optional<int> hidden;
  std::optional<gcn::Schedule> schedule;
};

gcn::TrainConfig train_config(TaskKind kind, std::uint64_t seed, const TrainOverrides& overrides);

/// Held-out predictions for one target.
struct TargetPrediction {
  int feature = 0;
  TaskKind kind = TaskKind::regression;
  std::vector<int> entities;
  /// Destandardized coefficient rows (entities x k_gcn); forecasts carry the
  /// observed history followed by the predicted horizon.
  Eigen::MatrixXd coeffs;
  std::vector<int> levels;  ///< classification
  int horizon = 0;          ///< predicted trailing coefficients (forecast)
};

std::vector<TargetPrediction> predict(const gcn::TrainedModel& model, TaskKind kind,
                                      const Eigen::MatrixXd& a_norm,
                                      const embedding::EmbeddedTensor& x_gcn,
                                      std::span<const int> entities);

/// Destandardized coefficients of one feature for the given entities.
Eigen::MatrixXd true_coeffs(const embedding::EmbeddedTensor& x_gcn, int feature,
                            std::span<const int> entities);
/// True level of each entity, decoded from its embedded row.
std::vector<int> true_levels(const embedding::EmbeddedTensor& x_gcn, int feature,
                             std::span<const int> entities);

/// Curve values on the quadrature grid (rows = entities).
Eigen::MatrixXd curve_values(const Eigen::MatrixXd& coeffs, const fda::BSplineBasis& basis,
                             const fda::QuadratureGrid& grid);

struct Score {
  std::string metric;
  double value = 0.0;
};

/// Regression/forecast: std_rmse, reference std_rmse of the per-entity-mean
/// predictor and the count of skipped constant curves. Classification:
/// accuracy and the accuracy of always predicting the training majority class.
std::vector<Score> score(const TargetPrediction& pred, const embedding::EmbeddedTensor& x_gcn,
                         std::span<const int> train_entities);

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

/// Seeded random split with `n_train` training entities and the rest for testing.
Split split_entities(int n, int n_train, std::uint64_t seed);

struct MetricRow {
  std::string task;
  std::string target;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct ReplicationConfig {
  TaskKind kind = TaskKind::regression;
  std::vector<std::string> targets;
  std::vector<std::uint64_t> seeds;
  int n_train = 225;
  double r_f = 0.3;
  TrainOverrides train;
};

/// Replications over seeds and targets on one embedding and graph. Each
/// target is trained separately; rows are ordered by target, then seed.
std::vector<MetricRow> run_replications(const embedding::EmbeddedTensor& x_gcn,
                                        const graph::KnowledgeGraph& graph,
                                        const ReplicationConfig& config);

}  // namespace fungcn::pipeline
