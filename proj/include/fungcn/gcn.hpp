#pragma once

// Two-layer graph convolutional network over the feature graph:
//
//   H1 = ReLU(A X W1 + b1),  H2 = ReLU(A H1 W2 + b2),
//   out[tau] = H2[target_tau] W_out[tau] + b_out[tau]
//
// X is one entity's p x k1 embedding; the output has one row of k2 values per
// target. Gradients are written out by hand and trained with Adam.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fungcn/embedding.hpp"

namespace fungcn::gcn {

enum class Task { regression, classification };
/// `full` predicts the whole target curve; `forecast` predicts the horizon
/// coefficients from the history coefficients of every feature.
enum class Mode { full, forecast };

std::string to_string(Task task);
std::string to_string(Mode mode);
Task parse_task(const std::string& text);
Mode parse_mode(const std::string& text);

struct Target {
  int feature = 0;
  Task task = Task::regression;
};

struct TaskSpec {
  std::vector<Target> targets;
  Mode mode = Mode::full;
  double r_f = 0.3;  ///< forecast ratio

  std::vector<int> target_rows() const;
  /// Checks target/modality compatibility against the tensor's features.
  void validate(const std::vector<Modality>& modalities) const;
};

struct Split {
  int k1 = 0;  ///< history coefficients (network input width)
  int k2 = 0;  ///< horizon coefficients (network output width)
};

/// k2 = round-half-up(r_f * k_gcn), k1 = k_gcn - k2; both equal k_gcn in full mode.
Split split_sizes(int k_gcn, Mode mode, double r_f);

struct HistoryHorizon {
  Split split;
  embedding::EmbeddedTensor history;  ///< slots [0, k1)
  embedding::EmbeddedTensor horizon;  ///< slots [k1, k_gcn)
};

HistoryHorizon split_history_horizon(const embedding::EmbeddedTensor& x_gcn, double r_f);

struct GcnParams {
  Eigen::MatrixXd w1;  ///< k1 x h
  Eigen::VectorXd b1;  ///< h
  Eigen::MatrixXd w2;  ///< h x h
  Eigen::VectorXd b2;  ///< h
  std::vector<Eigen::MatrixXd> w_out;  ///< per target, h x k2
  std::vector<Eigen::VectorXd> b_out;  ///< per target, k2

  static GcnParams zeros(int k1, int k2, int hidden, int targets);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  static GcnParams glorot(int k1, int k2, int hidden, int targets, std::uint64_t seed);

  int hidden() const { return static_cast<int>(w2.rows()); }
  int k1() const { return static_cast<int>(w1.rows()); }
  int k2() const { return w_out.empty() ? 0 : static_cast<int>(w_out.front().cols()); }
  int targets() const { return static_cast<int>(w_out.size()); }

  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  bool all_finite() const;
};

/// Intermediate activations kept for the backward pass.
struct Activations {
  Eigen::MatrixXd ax, z1, h1, ah1, z2, h2, out;
};

Eigen::MatrixXd forward(const GcnParams& params, const Eigen::MatrixXd& a_norm,
                        const Eigen::MatrixXd& x_entity, std::span<const int> target_rows,
                        Activations* cache = nullptr);

/// Mean squared error over every target row and slot.
double loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Exact gradient of loss_scale * loss(forward(...), truth). ReLU'(0) = 0.
/// Returns the (unscaled) loss through `loss_out` when given.
GcnParams backward(const GcnParams& params, const Eigen::MatrixXd& a_norm,
                   const Eigen::MatrixXd& x_entity, const Eigen::MatrixXd& truth,
                   std::span<const int> target_rows, double loss_scale = 1.0,
                   double* loss_out = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// One bias-corrected Adam update of a flat parameter vector.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double learning_rate, const AdamConfig& config = {});
GcnParams adam_step(const GcnParams& params, const GcnParams& grad, AdamState& state,
                    double learning_rate, const AdamConfig& config = {});

/// When Adam steps are taken.
enum class Schedule {
  per_epoch,   ///< gradients summed over the training entities, one step per epoch
  per_entity,  ///< one step per training entity, entity order reshuffled each epoch
};

std::string to_string(Schedule schedule);
Schedule parse_schedule(const std::string& text);

struct TrainConfig {
  double learning_rate = 5e-5;
  int max_epochs = 50;
  int patience = 5;  ///< epochs without validation improvement before stopping
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  int hidden = 32;
  Schedule schedule = Schedule::per_entity;
  AdamConfig adam;

  /// Default learning rate: 5e-5 for full-curve regression, 1e-4 otherwise.
  static TrainConfig defaults_for(Task task, Mode mode);
  void validate() const;
};

/// Tracks the best validation loss; `update` returns true once `patience`
/// consecutive epochs have passed without strict improvement.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double baseline) : patience_(patience), best_(baseline) {}
  bool update(double val_loss);
  bool improved() const { return improved_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_;
  int stagnant_ = 0;
  bool improved_ = false;
};

struct TrainedModel {
  GcnParams params;  ///< best-validation parameters
  TaskSpec task;
  Split split;
  std::vector<double> train_loss;  ///< per epoch
  std::vector<double> val_loss;    ///< per epoch
  int stopped_epoch = 0;
  int best_epoch = 0;  ///< 0 = initial parameters
  std::vector<int> train_entities;
  std::vector<int> val_entities;
  std::uint64_t stats_fingerprint = 0;
};

/// Network input for one entity: all history slots of every feature. In full
/// mode the target rows are zeroed so the target is never visible.
Eigen::MatrixXd network_input(const embedding::EmbeddedTensor& x_gcn, int entity,
                              const TaskSpec& task, const Split& split);
/// Loss truth for one entity: the targets' rows, horizon slots only in forecast mode.
Eigen::MatrixXd network_truth(const embedding::EmbeddedTensor& x_gcn, int entity,
                              const TaskSpec& task, const Split& split);

TrainedModel train(const embedding::EmbeddedTensor& x_gcn, const Eigen::MatrixXd& a_norm,
                   const TaskSpec& task, const TrainConfig& config,
                   std::span<const int> train_entities);

/// Forward pass with the model's parameters on a prepared p x k1 input.
Eigen::MatrixXd predict(const TrainedModel& model, const Eigen::MatrixXd& a_norm,
                        const Eigen::MatrixXd& x_entity);

/// Builds the input from `x_gcn`, after checking it carries the training stats.
Eigen::MatrixXd predict_entity(const TrainedModel& model, const Eigen::MatrixXd& a_norm,
                               const embedding::EmbeddedTensor& x_gcn, int entity);

std::uint64_t fingerprint(const embedding::SlotStats& stats);

}  // namespace fungcn::gcn
