#include <cmath>
#include <random>
#include <string>

#include "fungcn/error.hpp"
#include "fungcn/gcn.hpp"
#include "fungcn/seed.hpp"
#include "network_impl.hpp"

namespace fungcn::gcn {

std::string to_string(Task task) {
  return task == Task::regression ? "regression" : "classification";
}

std::string to_string(Mode mode) { return mode == Mode::full ? "static" : "forecast"; }

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::regression;
  if (text == "classification") return Task::classification;
  throw contract_error("config", "unknown task '" + text + "'");
}

Mode parse_mode(const std::string& text) {
  if (text == "static") return Mode::full;
  if (text == "forecast") return Mode::forecast;
  throw contract_error("config", "unknown mode '" + text + "'");
}

std::vector<int> TaskSpec::target_rows() const {
  std::vector<int> rows;
  rows.reserve(targets.size());
  for (const Target& t : targets) rows.push_back(t.feature);
  return rows;
}

void TaskSpec::validate(const std::vector<Modality>& modalities) const {
  if (targets.empty()) throw contract_error("task", "no targets given");
  if (mode == Mode::forecast && !(r_f > 0.0 && r_f < 1.0)) {
    throw contract_error("task", "forecast ratio must lie in (0, 1)");
  }
  std::vector<char> seen(modalities.size(), 0);
  for (const Target& t : targets) {
    if (t.feature < 0 || t.feature >= static_cast<int>(modalities.size())) {
      throw contract_error("task", "target index " + std::to_string(t.feature) + " out of range");
    }
    if (seen[t.feature]) {
      throw contract_error("task", "duplicate target " + std::to_string(t.feature));
    }
    seen[t.feature] = 1;
    const ModalityKind kind = modalities[t.feature].kind;
    if (t.task == Task::classification && kind != ModalityKind::categorical) {
      throw contract_error("task", "classification target " + std::to_string(t.feature) +
                                       " is not categorical");
    }
    if (t.task == Task::regression && kind == ModalityKind::categorical) {
      throw contract_error("task", "regression target " + std::to_string(t.feature) +
                                       " is categorical");
    }
    if (mode == Mode::forecast && kind != ModalityKind::longitudinal) {
      throw contract_error("task", "forecast target " + std::to_string(t.feature) +
                                       " is not longitudinal");
    }
  }
}

Split split_sizes(int k_gcn, Mode mode, double r_f) {
  if (k_gcn < 1) throw contract_error("task", "k_gcn must be positive");
  if (mode == Mode::full) return {k_gcn, k_gcn};
  if (!(r_f > 0.0 && r_f < 1.0)) throw contract_error("task", "forecast ratio must lie in (0, 1)");
  const int k2 = static_cast<int>(std::floor(r_f * k_gcn + 0.5));
  if (k2 < 1 || k2 >= k_gcn) {
    throw contract_error("task", "forecast ratio " + std::to_string(r_f) +
                                     " leaves an empty history or horizon for k_gcn = " +
                                     std::to_string(k_gcn));
  }
  return {k_gcn - k2, k2};
}

HistoryHorizon split_history_horizon(const embedding::EmbeddedTensor& x_gcn, double r_f) {
  const Split split = split_sizes(x_gcn.k(), Mode::forecast, r_f);
  HistoryHorizon out{split, embedding::EmbeddedTensor(x_gcn.kind(), x_gcn.n(), x_gcn.p(), split.k1),
                     embedding::EmbeddedTensor(x_gcn.kind(), x_gcn.n(), x_gcn.p(), split.k2)};
  for (int j = 0; j < x_gcn.p(); ++j) {
    const Eigen::MatrixXd block = x_gcn.feature_block(j);
    out.history.set_feature_block(j, block.leftCols(split.k1));
    out.horizon.set_feature_block(j, block.rightCols(split.k2));
  }
  for (auto* part : {&out.history, &out.horizon}) {
    part->entity_ids = x_gcn.entity_ids;
    part->feature_names = x_gcn.feature_names;
    part->modalities = x_gcn.modalities;
    part->level_labels = x_gcn.level_labels;
  }
  if (x_gcn.standardized()) {
    out.history.stats = {x_gcn.stats.mean.leftCols(split.k1), x_gcn.stats.sd.leftCols(split.k1)};
    out.horizon.stats = {x_gcn.stats.mean.rightCols(split.k2), x_gcn.stats.sd.rightCols(split.k2)};
  }
  return out;
}

GcnParams GcnParams::zeros(int k1, int k2, int hidden, int targets) {
  if (k1 < 1 || k2 < 1 || hidden < 1 || targets < 1) {
    throw contract_error("gcn", "invalid network dimensions");
  }
  GcnParams p;
  p.w1 = Eigen::MatrixXd::Zero(k1, hidden);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
  p.b2 = Eigen::VectorXd::Zero(hidden);
  p.w_out.assign(static_cast<std::size_t>(targets), Eigen::MatrixXd::Zero(hidden, k2));
  p.b_out.assign(static_cast<std::size_t>(targets), Eigen::VectorXd::Zero(k2));
  return p;
}

GcnParams GcnParams::glorot(int k1, int k2, int hidden, int targets, std::uint64_t seed) {
  GcnParams p = zeros(k1, k2, hidden, targets);
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
  };
  fill(p.w1);
  fill(p.w2);
  for (auto& w : p.w_out) fill(w);
  return p;
}

Eigen::Index GcnParams::size() const {
  Eigen::Index total = w1.size() + b1.size() + w2.size() + b2.size();
  for (std::size_t t = 0; t < w_out.size(); ++t) total += w_out[t].size() + b_out[t].size();
  return total;
}

namespace {

template <typename Params, typename Fn>
void for_each_block(Params& p, Fn&& fn) {
  fn(p.w1.data(), p.w1.size());
  fn(p.b1.data(), p.b1.size());
  fn(p.w2.data(), p.w2.size());
  fn(p.b2.data(), p.b2.size());
  for (std::size_t t = 0; t < p.w_out.size(); ++t) {
    fn(p.w_out[t].data(), p.w_out[t].size());
    fn(p.b_out[t].data(), p.b_out[t].size());
  }
}

}  // namespace

Eigen::VectorXd GcnParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index at = 0;
  for_each_block(*this, [&](const double* data, Eigen::Index n) {
    flat.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(data, n);
    at += n;
  });
  return flat;
}

void GcnParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw contract_error("gcn", "flat parameter size mismatch");
  Eigen::Index at = 0;
  for_each_block(*this, [&](double* data, Eigen::Index n) {
    Eigen::Map<Eigen::VectorXd>(data, n) = flat.segment(at, n);
    at += n;
  });
}

bool GcnParams::all_finite() const {
  bool ok = true;
  for_each_block(*this, [&](const double* data, Eigen::Index n) {
    ok = ok && Eigen::Map<const Eigen::VectorXd>(data, n).allFinite();
  });
  return ok;
}

void check_shapes(const GcnParams& params, Eigen::Index a_rows, Eigen::Index a_cols,
                  const Eigen::MatrixXd& x_entity, std::span<const int> target_rows) {
  const Eigen::Index p = x_entity.rows();
  if (a_rows != p || a_cols != p) {
    throw contract_error("gcn", "adjacency is " + std::to_string(a_rows) + "x" +
                                    std::to_string(a_cols) + " but the input has " +
                                    std::to_string(p) + " features");
  }
  if (x_entity.cols() != params.k1()) {
    throw contract_error("gcn", "input width " + std::to_string(x_entity.cols()) +
                                    " does not match k1 = " + std::to_string(params.k1()));
  }
  if (static_cast<int>(target_rows.size()) != params.targets()) {
    throw contract_error("gcn", "target count does not match the output heads");
  }
  for (int r : target_rows) {
    if (r < 0 || r >= p) throw contract_error("gcn", "target row out of range");
  }
}

Eigen::MatrixXd forward(const GcnParams& params, const Eigen::MatrixXd& a_norm,
                        const Eigen::MatrixXd& x_entity, std::span<const int> target_rows,
                        Activations* cache) {
  check_shapes(params, a_norm.rows(), a_norm.cols(), x_entity, target_rows);
  Activations local;
  Activations& act = cache ? *cache : local;
  forward_impl(params, a_norm, x_entity, target_rows, act);
  return act.out;
}

double loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw contract_error("gcn", "prediction and truth shapes differ");
  }
  if (pred.size() == 0) throw contract_error("gcn", "empty prediction");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

GcnParams backward(const GcnParams& params, const Eigen::MatrixXd& a_norm,
                   const Eigen::MatrixXd& x_entity, const Eigen::MatrixXd& truth,
                   std::span<const int> target_rows, double loss_scale, double* loss_out) {
  check_shapes(params, a_norm.rows(), a_norm.cols(), x_entity, target_rows);
  if (truth.rows() != params.targets() || truth.cols() != params.k2()) {
    throw contract_error("gcn", "truth shape does not match the output heads");
  }
  Activations act;
  forward_impl(params, a_norm, x_entity, target_rows, act);
  GcnParams grad = GcnParams::zeros(params.k1(), params.k2(), params.hidden(), params.targets());
  const double l = backward_impl(params, a_norm, truth, target_rows, act, loss_scale, grad);
  if (loss_out) *loss_out = l;
  return grad;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double learning_rate, const AdamConfig& config) {
  if (grad.size() != params.size()) throw contract_error("adam", "gradient size mismatch");
  if (state.step == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  } else if (state.m.size() != params.size()) {
    throw contract_error("adam", "optimizer state size mismatch");
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params.array() -= learning_rate * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + config.epsilon);
}

GcnParams adam_step(const GcnParams& params, const GcnParams& grad, AdamState& state,
                    double learning_rate, const AdamConfig& config) {
  Eigen::VectorXd flat = params.flatten();
  adam_step(flat, grad.flatten(), state, learning_rate, config);
  GcnParams out = params;
  out.assign(flat);
  return out;
}

}  // namespace fungcn::gcn
