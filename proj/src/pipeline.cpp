#include "fungcn/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "fungcn/decode.hpp"
#include "fungcn/error.hpp"
#include "fungcn/seed.hpp"

namespace fungcn::pipeline {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::regression: return "regression";
    case TaskKind::forecast: return "forecast";
    case TaskKind::classification: return "classification";
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "regression") return TaskKind::regression;
  if (text == "forecast") return TaskKind::forecast;
  if (text == "classification") return TaskKind::classification;
  throw contract_error("config", "unknown task '" + text + "'");
}

gcn::Task network_task(TaskKind kind) {
  return kind == TaskKind::classification ? gcn::Task::classification : gcn::Task::regression;
}

gcn::Mode network_mode(TaskKind kind) {
  return kind == TaskKind::forecast ? gcn::Mode::forecast : gcn::Mode::full;
}

int default_k_gcn(TaskKind kind) {
  switch (kind) {
    case TaskKind::regression: return embedding::kDefaultKGcnRegression;
    case TaskKind::forecast: return embedding::kDefaultKGcnForecast;
    case TaskKind::classification: return embedding::kDefaultKGcnClassification;
  }
  return embedding::kDefaultKGcnRegression;
}

gcn::TrainConfig train_config(TaskKind kind, std::uint64_t seed, const TrainOverrides& o) {
  gcn::TrainConfig c = gcn::TrainConfig::defaults_for(network_task(kind), network_mode(kind));
  c.seed = seed;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.max_epochs) c.max_epochs = *o.max_epochs;
  if (o.patience) c.patience = *o.patience;
  if (o.val_fraction) c.val_fraction = *o.val_fraction;
  if (o.hidden) c.hidden = *o.hidden;
  if (o.schedule) c.schedule = *o.schedule;
  return c;
}

Eigen::MatrixXd true_coeffs(const embedding::EmbeddedTensor& x_gcn, int feature,
                            std::span<const int> entities) {
  if (!x_gcn.standardized()) throw contract_error("decode", "missing stats");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(entities.size()), x_gcn.k());
  for (std::size_t r = 0; r < entities.size(); ++r) {
    for (int s = 0; s < x_gcn.k(); ++s) {
      out(static_cast<Eigen::Index>(r), s) =
          x_gcn.stats.mean(feature, s) + x_gcn.stats.sd(feature, s) * x_gcn.at(entities[r], feature, s);
    }
  }
  return out;
}

std::vector<int> true_levels(const embedding::EmbeddedTensor& x_gcn, int feature,
                             std::span<const int> entities) {
  const auto& book = x_gcn.codebooks.at(static_cast<std::size_t>(feature));
  if (!book) throw contract_error("decode", "feature has no codebook");
  std::vector<int> out;
  for (int e : entities) {
    const Eigen::VectorXd row = x_gcn.entity(e).row(feature).transpose();
    out.push_back(decode::decode_categorical(row, *book, x_gcn.stats, feature));
  }
  return out;
}

Eigen::MatrixXd curve_values(const Eigen::MatrixXd& coeffs, const fda::BSplineBasis& basis,
                             const fda::QuadratureGrid& grid) {
  return coeffs * basis.design(grid.points).transpose();
}

std::vector<TargetPrediction> predict(const gcn::TrainedModel& model, TaskKind kind,
                                      const Eigen::MatrixXd& a_norm,
                                      const embedding::EmbeddedTensor& x_gcn,
                                      std::span<const int> entities) {
  std::vector<TargetPrediction> preds;
  const auto& targets = model.task.targets;
  for (const gcn::Target& t : targets) {
    TargetPrediction p;
    p.feature = t.feature;
    p.kind = kind;
    p.entities.assign(entities.begin(), entities.end());
    if (kind != TaskKind::classification) p.coeffs.resize(static_cast<Eigen::Index>(entities.size()), x_gcn.k());
    if (kind == TaskKind::forecast) p.horizon = model.split.k2;
    preds.push_back(std::move(p));
  }
  for (std::size_t r = 0; r < entities.size(); ++r) {
    const int e = entities[r];
    const Eigen::MatrixXd out = gcn::predict_entity(model, a_norm, x_gcn, e);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const int j = targets[t].feature;
      TargetPrediction& p = preds[t];
      const Eigen::VectorXd z = out.row(static_cast<Eigen::Index>(t)).transpose();
      if (kind == TaskKind::classification) {
        const auto& book = x_gcn.codebooks.at(static_cast<std::size_t>(j));
        if (!book) throw contract_error("decode", "classification target has no codebook");
        p.levels.push_back(decode::decode_categorical(z, *book, x_gcn.stats, j));
        continue;
      }
      Eigen::VectorXd full(x_gcn.k());
      const int k1 = x_gcn.k() - static_cast<int>(z.size());
      for (int s = 0; s < k1; ++s) full[s] = x_gcn.at(e, j, s);
      full.tail(z.size()) = z;
      p.coeffs.row(static_cast<Eigen::Index>(r)) =
          decode::coeffs_to_curve(full, x_gcn.basis, x_gcn.stats, j).coeffs.transpose();
    }
  }
  return preds;
}

std::vector<Score> score(const TargetPrediction& pred, const embedding::EmbeddedTensor& x_gcn,
                         std::span<const int> train_entities) {
  if (pred.kind == TaskKind::classification) {
    const std::vector<int> truth = true_levels(x_gcn, pred.feature, pred.entities);
    const std::vector<int> train_truth = true_levels(x_gcn, pred.feature, train_entities);
    std::map<int, int> counts;
    for (int l : train_truth) ++counts[l];
    int majority = 0, best = -1;
    for (auto [level, count] : counts) {
      if (count > best) {
        best = count;
        majority = level;
      }
    }
    const std::vector<int> constant(truth.size(), majority);
    return {{"accuracy", decode::accuracy(truth, pred.levels)},
            {"majority_accuracy", decode::accuracy(truth, constant)}};
  }
  if (!x_gcn.basis) throw contract_error("decode", "tensor has no basis");
  const auto grid = fda::QuadratureGrid::simpson(x_gcn.basis->domain());
  const Eigen::MatrixXd truth_c = true_coeffs(x_gcn, pred.feature, pred.entities);
  const Eigen::MatrixXd truth = curve_values(truth_c, *x_gcn.basis, grid);
  const Eigen::MatrixXd fitted = curve_values(pred.coeffs, *x_gcn.basis, grid);
  const decode::StdRmse model_score = decode::std_rmse_grid(truth, fitted, grid);

  // Reference: each entity's own curve mean, over the horizon only in forecasts.
  Eigen::MatrixXd reference_c = truth_c;
  const int from = pred.kind == TaskKind::forecast ? x_gcn.k() - pred.horizon : 0;
  for (Eigen::Index r = 0; r < truth.rows(); ++r) {
    reference_c.row(r).tail(x_gcn.k() - from).setConstant(truth.row(r).mean());
  }
  const Eigen::MatrixXd reference = curve_values(reference_c, *x_gcn.basis, grid);
  const decode::StdRmse reference_score = decode::std_rmse_grid(truth, reference, grid);
  return {{"std_rmse", model_score.value},
          {"mean_std_rmse", reference_score.value},
          {"skipped", static_cast<double>(model_score.skipped)}};
}

Split split_entities(int n, int n_train, std::uint64_t seed) {
  if (n_train < 2 || n_train >= n) {
    throw contract_error("config", "n_train must lie in [2, n) with n = " + std::to_string(n));
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.test.assign(order.begin() + n_train, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<MetricRow> run_replications(const embedding::EmbeddedTensor& x_gcn,
                                        const graph::KnowledgeGraph& graph,
                                        const ReplicationConfig& config) {
  if (config.targets.empty()) throw contract_error("config", "no targets given");
  if (config.seeds.empty()) throw contract_error("config", "no replication seeds given");
  if (graph.p() != x_gcn.p()) {
    throw contract_error("pipeline", "graph and embedding have different feature counts");
  }
  std::vector<MetricRow> rows;
  for (const std::string& name : config.targets) {
    const auto it = std::find(x_gcn.feature_names.begin(), x_gcn.feature_names.end(), name);
    if (it == x_gcn.feature_names.end()) throw contract_error("config", "unknown target '" + name + "'");
    const int feature = static_cast<int>(it - x_gcn.feature_names.begin());
    gcn::TaskSpec task;
    task.targets = {{feature, network_task(config.kind)}};
    task.mode = network_mode(config.kind);
    task.r_f = config.r_f;
    for (std::uint64_t seed : config.seeds) {
      const Split split = split_entities(x_gcn.n(), config.n_train, derive_seed(seed, "split"));
      const gcn::TrainConfig tc =
          train_config(config.kind, derive_seed(seed, "train/" + name), config.train);
      const gcn::TrainedModel model = gcn::train(x_gcn, graph.a_norm, task, tc, split.train);
      const auto preds = predict(model, config.kind, graph.a_norm, x_gcn, split.test);
      for (const Score& s : score(preds.front(), x_gcn, split.train)) {
        rows.push_back({to_string(config.kind), name, seed, s.metric, s.value});
      }
    }
  }
  return rows;
}

}  // namespace fungcn::pipeline
