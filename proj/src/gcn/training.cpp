#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/SparseCore>

#include "fungcn/error.hpp"
#include "fungcn/gcn.hpp"
#include "fungcn/parallel.hpp"
#include "fungcn/seed.hpp"
#include "network_impl.hpp"

namespace fungcn::gcn {

std::string to_string(Schedule schedule) {
  return schedule == Schedule::per_epoch ? "per_epoch" : "per_entity";
}

Schedule parse_schedule(const std::string& text) {
  if (text == "per_epoch") return Schedule::per_epoch;
  if (text == "per_entity") return Schedule::per_entity;
  throw contract_error("config", "unknown schedule '" + text + "'");
}

TrainConfig TrainConfig::defaults_for(Task task, Mode mode) {
  TrainConfig c;
  c.learning_rate = (task == Task::regression && mode == Mode::full) ? 5e-5 : 1e-4;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw contract_error("config", "learning rate must be positive");
  }
  if (max_epochs < 0) throw contract_error("config", "max_epochs must be >= 0");
  if (patience < 1) throw contract_error("config", "patience must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw contract_error("config", "val_fraction must lie in (0, 1)");
  }
  if (hidden < 1) throw contract_error("config", "hidden width must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
        adam.epsilon > 0.0)) {
    throw contract_error("config", "invalid Adam constants");
  }
}

bool EarlyStopping::update(double val_loss) {
  improved_ = val_loss < best_;
  if (improved_) {
    best_ = val_loss;
    stagnant_ = 0;
  } else {
    ++stagnant_;
  }
  return stagnant_ >= patience_;
}

std::uint64_t fingerprint(const embedding::SlotStats& stats) {
  std::uint64_t h = fnv1a("stats");
  for (const Eigen::MatrixXd* m : {&stats.mean, &stats.sd}) {
    const std::int64_t dims[2] = {m->rows(), m->cols()};
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(dims), sizeof dims), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(m->data()),
                               static_cast<std::size_t>(m->size()) * sizeof(double)),
              h);
  }
  return h;
}

Eigen::MatrixXd network_input(const embedding::EmbeddedTensor& x_gcn, int entity,
                              const TaskSpec& task, const Split& split) {
  if (entity < 0 || entity >= x_gcn.n()) throw contract_error("gcn", "entity index out of range");
  if (split.k1 + (task.mode == Mode::forecast ? split.k2 : 0) != x_gcn.k()) {
    throw contract_error("gcn", "tensor width does not match the history/horizon split");
  }
  Eigen::MatrixXd x = x_gcn.entity(entity).leftCols(split.k1);
  if (task.mode == Mode::full) {
    for (int r : task.target_rows()) x.row(r).setZero();
  }
  return x;
}

Eigen::MatrixXd network_truth(const embedding::EmbeddedTensor& x_gcn, int entity,
                              const TaskSpec& task, const Split& split) {
  const Eigen::MatrixXd e = x_gcn.entity(entity);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(task.targets.size()), split.k2);
  for (std::size_t t = 0; t < task.targets.size(); ++t) {
    y.row(static_cast<Eigen::Index>(t)) = e.row(task.targets[t].feature).rightCols(split.k2);
  }
  return y;
}

namespace {

struct Example {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};

class Trainer {
 public:
  Trainer(const Eigen::MatrixXd& a_norm, std::vector<int> rows, const std::vector<Example>& data)
      : a_(a_norm.sparseView()), rows_(std::move(rows)), data_(data) {}

  double mean_loss(const GcnParams& params, const std::vector<int>& set) const {
    std::vector<double> losses(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
      Activations act;
      forward_impl(params, a_, data_[set[i]].x, rows_, act);
      losses[i] = loss(act.out, data_[set[i]].y);
    });
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(set.size());
  }

  /// Gradient and loss of one example.
  double gradient(const GcnParams& params, int example, GcnParams& grad) const {
    Activations act;
    forward_impl(params, a_, data_[example].x, rows_, act);
    return backward_impl(params, a_, data_[example].y, rows_, act, 1.0, grad);
  }

  /// Sum of per-example gradients, reduced in example order.
  double summed_gradient(const GcnParams& params, const std::vector<int>& set,
                         GcnParams& total) const {
    std::vector<GcnParams> grads(set.size());
    std::vector<double> losses(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
      grads[i] = GcnParams::zeros(params.k1(), params.k2(), params.hidden(), params.targets());
      losses[i] = gradient(params, set[i], grads[i]);
    });
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(params.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      flat += grads[i].flatten();
      sum += losses[i];
    }
    total = params;
    total.assign(flat);
    return sum / static_cast<double>(set.size());
  }

 private:
  Eigen::SparseMatrix<double> a_;
  std::vector<int> rows_;
  const std::vector<Example>& data_;
};

[[noreturn]] void diverged(int epoch) {
  throw numerical_error("divergence", "training diverged at epoch " + std::to_string(epoch));
}

}  // namespace

TrainedModel train(const embedding::EmbeddedTensor& x_gcn, const Eigen::MatrixXd& a_norm,
                   const TaskSpec& task, const TrainConfig& config,
                   std::span<const int> train_entities) {
  config.validate();
  task.validate(x_gcn.modalities);
  if (a_norm.rows() != x_gcn.p() || a_norm.cols() != x_gcn.p()) {
    throw contract_error("gcn", "graph has " + std::to_string(a_norm.rows()) +
                                    " features but the tensor has " + std::to_string(x_gcn.p()));
  }
  if (!a_norm.allFinite()) throw contract_error("gcn", "adjacency has non-finite entries");
  if (train_entities.size() < 2) throw contract_error("gcn", "need at least 2 training entities");
  std::set<int> distinct(train_entities.begin(), train_entities.end());
  if (distinct.size() != train_entities.size()) {
    throw contract_error("gcn", "duplicate training entities");
  }
  if (*distinct.begin() < 0 || *distinct.rbegin() >= x_gcn.n()) {
    throw contract_error("gcn", "training entity index out of range");
  }

  TrainedModel model;
  model.task = task;
  model.split = split_sizes(x_gcn.k(), task.mode, task.r_f);
  model.stats_fingerprint = fingerprint(x_gcn.stats);

  // Validation split: floor(val_fraction * n_train), at least one entity on each side.
  std::vector<int> order(train_entities.begin(), train_entities.end());
  Rng split_rng = make_rng(config.seed, "gcn/validation");
  std::shuffle(order.begin(), order.end(), split_rng);
  const int n_train = static_cast<int>(order.size());
  const int n_val = std::clamp(static_cast<int>(std::floor(config.val_fraction * n_train)), 1,
                               n_train - 1);
  model.val_entities.assign(order.begin(), order.begin() + n_val);
  model.train_entities.assign(order.begin() + n_val, order.end());
  std::sort(model.val_entities.begin(), model.val_entities.end());
  std::sort(model.train_entities.begin(), model.train_entities.end());

  // Examples are indexed 0..n_train-1: fit entities first, then validation.
  std::vector<Example> data;
  std::vector<int> fit_set, val_set;
  for (int e : model.train_entities) {
    fit_set.push_back(static_cast<int>(data.size()));
    data.push_back({network_input(x_gcn, e, task, model.split),
                    network_truth(x_gcn, e, task, model.split)});
  }
  for (int e : model.val_entities) {
    val_set.push_back(static_cast<int>(data.size()));
    data.push_back({network_input(x_gcn, e, task, model.split),
                    network_truth(x_gcn, e, task, model.split)});
  }

  const Trainer trainer(a_norm, task.target_rows(), data);
  const int targets = static_cast<int>(task.targets.size());
  GcnParams params = GcnParams::glorot(model.split.k1, model.split.k2, config.hidden, targets,
                                       derive_seed(config.seed, "gcn/init"));
  model.params = params;
  if (config.max_epochs == 0) return model;

  const double baseline = trainer.mean_loss(params, val_set);
  if (!std::isfinite(baseline)) diverged(0);
  EarlyStopping stopper(config.patience, baseline);
  AdamState adam;
  Rng order_rng = make_rng(config.seed, "gcn/order");
  Eigen::VectorXd flat = params.flatten();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double train_loss = 0.0;
    if (config.schedule == Schedule::per_epoch) {
      GcnParams grad;
      train_loss = trainer.summed_gradient(params, fit_set, grad);
      adam_step(flat, grad.flatten(), adam, config.learning_rate, config.adam);
      params.assign(flat);
    } else {
      std::vector<int> visit = fit_set;
      std::shuffle(visit.begin(), visit.end(), order_rng);
      for (int ex : visit) {
        GcnParams grad = GcnParams::zeros(params.k1(), params.k2(), params.hidden(), targets);
        train_loss += trainer.gradient(params, ex, grad);
        adam_step(flat, grad.flatten(), adam, config.learning_rate, config.adam);
        params.assign(flat);
      }
      train_loss /= static_cast<double>(visit.size());
    }
    const double val_loss = trainer.mean_loss(params, val_set);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss) || !params.all_finite()) {
      diverged(epoch);
    }
    model.train_loss.push_back(train_loss);
    model.val_loss.push_back(val_loss);
    model.stopped_epoch = epoch;
    const bool stop = stopper.update(val_loss);
    if (stopper.improved()) {
      model.params = params;
      model.best_epoch = epoch;
    }
    if (stop) break;
  }
  return model;
}

Eigen::MatrixXd predict(const TrainedModel& model, const Eigen::MatrixXd& a_norm,
                        const Eigen::MatrixXd& x_entity) {
  return forward(model.params, a_norm, x_entity, model.task.target_rows());
}

Eigen::MatrixXd predict_entity(const TrainedModel& model, const Eigen::MatrixXd& a_norm,
                               const embedding::EmbeddedTensor& x_gcn, int entity) {
  if (fingerprint(x_gcn.stats) != model.stats_fingerprint) {
    throw contract_error("gcn", "tensor standardization does not match the model's training stats");
  }
  return predict(model, a_norm, network_input(x_gcn, entity, model.task, model.split));
}

}  // namespace fungcn::gcn
