// fungcn: simulate, embed, graph, train, predict, evaluate.
//
// Each subcommand reads a flat JSON config (--config), applies --override
// key=value pairs on top, and writes its outputs into --out. Inputs default to
// the files earlier commands write into the same directory.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fungcn/error.hpp"
#include "fungcn/io.hpp"
#include "fungcn/pipeline.hpp"
#include "fungcn/seed.hpp"
#include "fungcn/synth.hpp"

namespace fs = std::filesystem;
using fungcn::contract_error;
using fungcn::io::json;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> overrides;
};

/// Flat key/value configuration restricted to the keys a command accepts.
class Config {
 public:
  Config(const Options& opt, const std::set<std::string>& allowed) : allowed_(allowed) {
    if (!opt.config_path.empty()) {
      values_ = fungcn::io::read_json(opt.config_path);
      if (!values_.is_object()) throw contract_error("config", "config must be a JSON object");
    } else {
      values_ = json::object();
    }
    for (const std::string& kv : opt.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw contract_error("config", "override '" + kv + "' is not key=value");
      }
      const std::string text = kv.substr(eq + 1);
      json value = json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;
      values_[kv.substr(0, eq)] = value;
    }
    for (const auto& [key, value] : values_.items()) {
      if (!allowed_.count(key)) throw contract_error("config", "unknown key '" + key + "'");
    }
    if (opt.seed) values_["seed"] = *opt.seed;
    out_ = opt.out;
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!values_.contains(key)) return fallback;
    try {
      return values_.at(key).get<T>();
    } catch (const json::exception&) {
      throw contract_error("config", "key '" + key + "' has the wrong type: " + values_.at(key).dump());
    }
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) const {
    if (!values_.contains(key)) return std::nullopt;
    return get<T>(key, T{});
  }

  std::uint64_t seed() const { return get<std::uint64_t>("seed", 0); }
  const fs::path& out() const { return out_; }

  /// Input path from the config, defaulting to a file in the output directory.
  fs::path input(const std::string& key, const std::string& default_name) const {
    const fs::path p = values_.contains(key) ? fs::path(get<std::string>(key, "")) : out_ / default_name;
    if (!fs::exists(p)) throw contract_error("config", key + " file '" + p.string() + "' not found");
    return p;
  }

  /// Names from either a JSON array or a comma-separated string.
  std::vector<std::string> names(const std::string& key) const {
    if (!values_.contains(key)) return {};
    const json& v = values_.at(key);
    if (v.is_array()) return get<std::vector<std::string>>(key, {});
    std::vector<std::string> out;
    std::stringstream ss(get<std::string>(key, ""));
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  const json& values() const { return values_; }

 private:
  std::set<std::string> allowed_;
  json values_;
  fs::path out_;
};

const std::set<std::string> kTrainKeys = {"learning_rate", "max_epochs", "patience", "val_fraction",
                                          "hidden", "schedule"};

std::set<std::string> keys(std::initializer_list<std::string> own, bool with_train = false) {
  std::set<std::string> out(own);
  out.insert("seed");
  if (with_train) out.insert(kTrainKeys.begin(), kTrainKeys.end());
  return out;
}

fungcn::pipeline::TrainOverrides train_overrides(const Config& c) {
  fungcn::pipeline::TrainOverrides o;
  o.learning_rate = c.maybe<double>("learning_rate");
  o.max_epochs = c.maybe<int>("max_epochs");
  o.patience = c.maybe<int>("patience");
  o.val_fraction = c.maybe<double>("val_fraction");
  o.hidden = c.maybe<int>("hidden");
  if (auto s = c.maybe<std::string>("schedule")) o.schedule = fungcn::gcn::parse_schedule(*s);
  return o;
}

int feature_index(const fungcn::embedding::EmbeddedTensor& x, const std::string& name) {
  const auto it = std::find(x.feature_names.begin(), x.feature_names.end(), name);
  if (it == x.feature_names.end()) throw contract_error("config", "unknown target '" + name + "'");
  return static_cast<int>(it - x.feature_names.begin());
}

fungcn::embedding::EmbeddedTensor load_tensor(const fs::path& path) {
  return fungcn::io::tensor_from_json(fungcn::io::read_json(path));
}

fungcn::graph::KnowledgeGraph load_graph(const fs::path& path) {
  return fungcn::io::graph_from_json(fungcn::io::read_json(path));
}

void check_graph_matches(const fungcn::graph::KnowledgeGraph& g, const fungcn::embedding::EmbeddedTensor& x) {
  if (g.p() != x.p()) {
    throw contract_error("pipeline", "graph has " + std::to_string(g.p()) + " features, tensor has " +
                                         std::to_string(x.p()));
  }
}

/// The model must come from a tensor with the same entities and features.
void check_model_matches(const fungcn::io::ModelFile& m, const fungcn::embedding::EmbeddedTensor& x,
                         const fungcn::graph::KnowledgeGraph& g) {
  if (m.feature_names != x.feature_names) {
    throw contract_error("pipeline", "model and tensor have different feature sets");
  }
  if (m.entity_ids != x.entity_ids) {
    throw contract_error("pipeline", "model and tensor have different entities");
  }
  if (m.graph_hash != fungcn::io::graph_hash(g)) {
    throw contract_error("pipeline", "graph does not match the one the model was trained on");
  }
}

int cmd_simulate(const Options& opt) {
  const Config c(opt, keys({"n", "p", "prop_longitudinal", "prop_categorical", "prop_scalar", "p0",
                            "grid_size", "matern_eta2", "matern_length", "matern_nu", "noise_cov_floor",
                            "weight_lo", "weight_hi", "noise_sigma", "noise_scale", "noise_layout"}));
  fungcn::synth::ScenarioConfig s;
  s.n = c.get("n", s.n);
  s.p = c.get("p", s.p);
  s.prop_longitudinal = c.get("prop_longitudinal", s.prop_longitudinal);
  s.prop_categorical = c.get("prop_categorical", s.prop_categorical);
  s.prop_scalar = c.get("prop_scalar", s.prop_scalar);
  s.p0 = c.get("p0", s.p0);
  s.grid_size = c.get("grid_size", s.grid_size);
  s.matern.eta2 = c.get("matern_eta2", s.matern.eta2);
  s.matern.length = c.get("matern_length", s.matern.length);
  s.matern.nu = c.get("matern_nu", s.matern.nu);
  s.noise_cov_floor = c.get("noise_cov_floor", s.noise_cov_floor);
  s.weight_lo = c.get("weight_lo", s.weight_lo);
  s.weight_hi = c.get("weight_hi", s.weight_hi);
  s.noise_sigma = c.get("noise_sigma", s.noise_sigma);
  s.noise_scale = c.get("noise_scale", s.noise_scale);
  const std::string layout = c.get<std::string>("noise_layout", "features");
  if (layout == "features") {
    s.noise_layout = fungcn::synth::NoiseLayout::features;
  } else if (layout == "time") {
    s.noise_layout = fungcn::synth::NoiseLayout::time;
  } else {
    throw contract_error("config", "noise_layout must be 'features' or 'time'");
  }
  s.seed = c.seed();
  s.validate();

  const auto scenario = fungcn::synth::generate_scenario(s);
  fungcn::io::write_text(c.out() / "dataset.csv", fungcn::io::dataset_to_csv(scenario.dataset));
  json manifest = fungcn::io::manifest_json(scenario.dataset, s.seed, c.values());
  std::vector<std::string> block;
  for (int j : scenario.interconnected) block.push_back(scenario.dataset.features[j].name);
  manifest["interconnected"] = block;
  fungcn::io::write_json(c.out() / "manifest.json", manifest);
  std::cout << "simulated " << scenario.dataset.n() << " entities x " << scenario.dataset.p()
            << " features\n";
  return 0;
}

int cmd_embed(const Options& opt) {
  const Config c(opt, keys({"dataset", "manifest", "task", "k_graph", "k_gcn", "k_smooth"}));
  const auto dataset = fungcn::io::read_dataset(c.input("dataset", "dataset.csv"),
                                                c.input("manifest", "manifest.json"));
  const auto kind = fungcn::pipeline::parse_task_kind(c.get<std::string>("task", "regression"));
  const int k_graph = c.get("k_graph", fungcn::embedding::kDefaultKGraph);
  const int k_gcn = c.get("k_gcn", fungcn::pipeline::default_k_gcn(kind));
  fungcn::embedding::EmbedOptions options;
  options.k_smooth = c.get("k_smooth", options.k_smooth);
  const std::uint64_t seed = c.seed();

  const auto x_graph = fungcn::embedding::assemble(dataset, fungcn::embedding::Kind::graph, k_graph,
                                                   fungcn::derive_seed(seed, "embed/graph"), options);
  const auto x_gcn = fungcn::embedding::assemble(dataset, fungcn::embedding::Kind::gcn, k_gcn,
                                                 fungcn::derive_seed(seed, "embed/gcn"), options);
  for (const auto* t : {&x_graph, &x_gcn}) {
    const json doc = fungcn::io::tensor_to_json(*t);
    const std::string name = "x_" + fungcn::embedding::to_string(t->kind());
    fungcn::io::write_json(c.out() / (name + ".json"), doc);
    std::cout << name << ": " << t->n() << " x " << t->p() << " x " << t->k() << " hash "
              << fungcn::io::hex(fungcn::io::hash_text(doc.dump())) << "\n";
  }
  return 0;
}

int cmd_graph(const Options& opt) {
  const Config c(opt, keys({"x_graph", "p_max", "path_length", "c_min", "tolerance", "max_iters", "theta"}));
  const auto x_graph = load_tensor(c.input("x_graph", "x_graph.json"));
  if (x_graph.kind() != fungcn::embedding::Kind::graph) {
    throw contract_error("config", "x_graph must be a graph-kind tensor");
  }
  fungcn::graph::SolverConfig solver;
  solver.p_max = c.get("p_max", solver.p_max);
  solver.path_length = c.get("path_length", solver.path_length);
  solver.c_min = c.get("c_min", solver.c_min);
  solver.tolerance = c.get("tolerance", solver.tolerance);
  solver.max_iters = c.get("max_iters", solver.max_iters);
  solver.validate();
  const double theta = c.get("theta", fungcn::graph::kThetaSynthetic);

  const auto g = fungcn::graph::estimate_graph(x_graph, solver, theta);
  fungcn::io::write_json(c.out() / "graph.json",
                         fungcn::io::graph_to_json(g, x_graph.feature_names, x_graph.modalities, solver));
  fungcn::io::write_text(c.out() / "graph.dot",
                         fungcn::io::graph_to_dot(g, x_graph.feature_names, x_graph.modalities));
  int edges = 0;
  for (int a = 0; a < g.p(); ++a) {
    for (int b = a + 1; b < g.p(); ++b) edges += g.a_sym(a, b) > 0.0;
  }
  std::cout << "graph: " << g.p() << " nodes, " << edges << " edges\n";
  return 0;
}

int cmd_train(const Options& opt) {
  const Config c(opt, keys({"x_gcn", "graph", "task", "targets", "n_train", "r_f"}, true));
  const auto x_gcn = load_tensor(c.input("x_gcn", "x_gcn.json"));
  const auto g = load_graph(c.input("graph", "graph.json"));
  check_graph_matches(g, x_gcn);
  const auto kind = fungcn::pipeline::parse_task_kind(c.get<std::string>("task", "regression"));
  const auto targets = c.names("targets");
  if (targets.empty()) throw contract_error("config", "targets must name at least one feature");

  fungcn::gcn::TaskSpec task;
  for (const std::string& name : targets) {
    task.targets.push_back({feature_index(x_gcn, name), fungcn::pipeline::network_task(kind)});
  }
  task.mode = fungcn::pipeline::network_mode(kind);
  task.r_f = c.get("r_f", task.r_f);
  const std::uint64_t seed = c.seed();
  const auto split = fungcn::pipeline::split_entities(
      x_gcn.n(), c.get("n_train", fungcn::pipeline::ReplicationConfig{}.n_train),
      fungcn::derive_seed(seed, "split"));
  const auto tc = fungcn::pipeline::train_config(kind, fungcn::derive_seed(seed, "train"), train_overrides(c));

  fungcn::io::ModelFile file;
  file.model = fungcn::gcn::train(x_gcn, g.a_norm, task, tc, split.train);
  file.kind = kind;
  file.feature_names = x_gcn.feature_names;
  file.entity_ids = x_gcn.entity_ids;
  file.test_entities = split.test;
  file.graph_hash = fungcn::io::graph_hash(g);
  file.config = c.values();
  fungcn::io::write_json(c.out() / "model.json", fungcn::io::model_to_json(file));
  fungcn::io::write_text(c.out() / "losses.csv", fungcn::io::losses_to_csv(file.model));
  std::cout << "trained " << file.model.train_loss.size() << " epochs, best epoch "
            << file.model.best_epoch << "\n";
  return 0;
}

/// Entities to predict: the model's held-out set, or every entity.
std::vector<int> prediction_entities(const Config& c, const fungcn::io::ModelFile& m) {
  const std::string which = c.get<std::string>("entities", "test");
  if (which == "test") return m.test_entities;
  if (which == "all") {
    std::vector<int> all(m.entity_ids.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  throw contract_error("config", "entities must be 'test' or 'all'");
}

int cmd_predict(const Options& opt) {
  const Config c(opt, keys({"model", "x_gcn", "graph", "entities"}));
  const auto x_gcn = load_tensor(c.input("x_gcn", "x_gcn.json"));
  const auto g = load_graph(c.input("graph", "graph.json"));
  const auto m = fungcn::io::model_from_json(fungcn::io::read_json(c.input("model", "model.json")));
  check_graph_matches(g, x_gcn);
  check_model_matches(m, x_gcn, g);
  const auto entities = prediction_entities(c, m);
  const auto preds = fungcn::pipeline::predict(m.model, m.kind, g.a_norm, x_gcn, entities);
  fungcn::io::write_text(c.out() / "predictions.csv", fungcn::io::predictions_to_csv(preds, x_gcn));
  std::cout << "predicted " << entities.size() << " entities\n";
  return 0;
}

int cmd_evaluate(const Options& opt) {
  const Config c(opt, keys({"x_gcn", "graph", "model", "predictions", "task", "targets", "seeds",
                            "replications", "n_train", "r_f"},
                           true));
  const auto x_gcn = load_tensor(c.input("x_gcn", "x_gcn.json"));
  const std::uint64_t seed = c.seed();
  const std::string task = c.get<std::string>("task", "regression");
  std::vector<fungcn::pipeline::MetricRow> rows;

  if (c.values().contains("predictions")) {
    // Score an existing predictions file against the tensor's own values.
    const auto parsed = fungcn::io::parse_predictions_csv(
        fungcn::io::read_text(c.input("predictions", "predictions.csv")), x_gcn);
    rows = fungcn::io::score_predictions(parsed, x_gcn, task, seed);
  } else if (c.values().contains("model")) {
    const auto g = load_graph(c.input("graph", "graph.json"));
    const auto m = fungcn::io::model_from_json(fungcn::io::read_json(c.input("model", "model.json")));
    check_graph_matches(g, x_gcn);
    check_model_matches(m, x_gcn, g);
    const auto preds = fungcn::pipeline::predict(m.model, m.kind, g.a_norm, x_gcn, m.test_entities);
    std::vector<int> fit = m.model.train_entities;
    fit.insert(fit.end(), m.model.val_entities.begin(), m.model.val_entities.end());
    std::sort(fit.begin(), fit.end());
    for (const auto& p : preds) {
      for (const auto& s : fungcn::pipeline::score(p, x_gcn, fit)) {
        rows.push_back({fungcn::pipeline::to_string(m.kind), x_gcn.feature_names[p.feature], seed, s.metric,
                        s.value});
      }
    }
  } else {
    const auto g = load_graph(c.input("graph", "graph.json"));
    check_graph_matches(g, x_gcn);
    fungcn::pipeline::ReplicationConfig rc;
    rc.kind = fungcn::pipeline::parse_task_kind(task);
    rc.targets = c.names("targets");
    if (c.values().contains("seeds")) {
      rc.seeds = c.get<std::vector<std::uint64_t>>("seeds", {});
    } else {
      // Replication r uses seed + r.
      const int reps = c.get("replications", 20);
      if (reps < 1) throw contract_error("config", "replications must be positive");
      for (int r = 0; r < reps; ++r) rc.seeds.push_back(seed + static_cast<std::uint64_t>(r));
    }
    rc.n_train = c.get("n_train", rc.n_train);
    rc.r_f = c.get("r_f", rc.r_f);
    rc.train = train_overrides(c);
    rows = fungcn::pipeline::run_replications(x_gcn, g, rc);
  }
  fungcn::io::write_text(c.out() / "metrics.csv", fungcn::io::metrics_to_csv(rows));
  std::cout << "wrote " << rows.size() << " metric rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional knowledge graphs and graph convolutional networks"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "root seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--override", opt.overrides, "key=value, value parsed as JSON when possible");
  };
  const std::vector<std::pair<std::string, int (*)(const Options&)>> commands = {
      {"simulate", cmd_simulate}, {"embed", cmd_embed},     {"graph", cmd_graph},
      {"train", cmd_train},       {"predict", cmd_predict}, {"evaluate", cmd_evaluate}};
  const std::map<std::string, std::string> help = {
      {"simulate", "generate a synthetic scenario as dataset.csv and manifest.json"},
      {"embed", "embed a dataset into x_graph.json and x_gcn.json"},
      {"graph", "estimate the knowledge graph into graph.json and graph.dot"},
      {"train", "train a network into model.json and losses.csv"},
      {"predict", "write predictions.csv for held-out entities"},
      {"evaluate", "write metrics.csv from replications, a model or a predictions file"}};
  for (const auto& [name, fn] : commands) add_common(app.add_subcommand(name, help.at(name)));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) return fn(opt);
    }
  } catch (const fungcn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.error_class() == fungcn::ErrorClass::numerical ? 3 : 2;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
