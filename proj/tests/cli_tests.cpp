#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>

#include "fungcn/io.hpp"
#include "fungcn/pipeline.hpp"

namespace fs = std::filesystem;
using json = fungcn::io::json;

namespace {

const std::string kCli = FUNGCN_CLI;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(FUNGCN_SCRATCH) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small pipeline: simulate, embed, graph and train into `dir`.
void build_pipeline(const fs::path& dir, int seed) {
  const std::string out = " --out \"" + dir.string() + "\" --seed " + std::to_string(seed);
  const fs::path log = dir / "log.txt";
  REQUIRE(run("simulate" + out + " --override n=40 --override grid_size=20", log) == 0);
  REQUIRE(run("embed" + out + " --override task=regression", log) == 0);
  REQUIRE(run("graph" + out, log) == 0);
  REQUIRE(run("train" + out + " --override targets=ic_long_1 --override n_train=30 --override max_epochs=3", log) == 0);
}

struct DotGraph {
  std::map<std::string, std::string> modality;
  std::map<std::pair<std::string, std::string>, double> edges;
};

/// Minimal reader for the undirected DOT subset the CLI writes.
DotGraph parse_dot(const std::string& text) {
  DotGraph g;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "graph knowledge_graph {");
  const std::regex node(R"re(^\s*"([^"]+)" \[label="([^"\\]+)\\n([a-z]+)", modality="([a-z]+)"\];$)re");
  const std::regex edge(R"re(^\s*"([^"]+)" -- "([^"]+)" \[weight=([^,]+), penwidth=([^\]]+)\];$)re");
  bool closed = false;
  while (std::getline(in, line)) {
    std::smatch m;
    if (line == "}") {
      closed = true;
    } else if (std::regex_match(line, m, node)) {
      CHECK(m[1] == m[2]);
      CHECK(m[3] == m[4]);
      g.modality[m[1]] = m[4];
    } else if (std::regex_match(line, m, edge)) {
      const double w = std::stod(m[3]);
      CHECK(std::stod(m[4]) == doctest::Approx(4 * w));
      g.edges[{m[1], m[2]}] = w;
    } else {
      CHECK_MESSAGE(line.find("node [") != std::string::npos, "unexpected DOT line: " << line);
    }
  }
  CHECK(closed);
  return g;
}

}  // namespace

TEST_CASE("help and usage errors") {
  const fs::path dir = scratch("usage");
  CHECK(run("--help", dir / "log") == 0);
  CHECK(run("", dir / "log") == 2);
  CHECK(run("bogus", dir / "log") == 2);
  CHECK(run("simulate --config /nonexistent.json", dir / "log") == 2);
}

TEST_CASE("contract errors exit with 2") {
  const fs::path dir = scratch("contract");
  const std::string out = " --out \"" + dir.string() + "\"";
  CHECK(run("simulate" + out + " --override prop_scalar=0.5", dir / "log") == 2);
  CHECK(slurp(dir / "log").find("proportions") != std::string::npos);
  CHECK(run("simulate" + out + " --override colour=blue", dir / "log") == 2);
  CHECK(slurp(dir / "log").find("unknown key 'colour'") != std::string::npos);
  CHECK(run("simulate" + out + " --override n=abc", dir / "log") == 2);
  CHECK(run("graph" + out, dir / "log") == 2);  // no x_graph.json yet
  CHECK(run("train" + out, dir / "log") == 2);

  std::ofstream(dir / "config.json") << "[1, 2]";
  CHECK(run("simulate" + out + " --config \"" + (dir / "config.json").string() + "\"", dir / "log") == 2);
  std::ofstream(dir / "config.json") << "{\"n\": ";
  CHECK(run("simulate" + out + " --config \"" + (dir / "config.json").string() + "\"", dir / "log") == 2);
}

TEST_CASE("pipeline outputs and cross-file checks") {
  const fs::path a = scratch("pipeline_a");
  build_pipeline(a, 3);
  for (const char* f : {"dataset.csv", "manifest.json", "x_graph.json", "x_gcn.json", "graph.json", "graph.dot",
                        "model.json", "losses.csv"}) {
    CHECK_MESSAGE(fs::exists(a / f), f);
  }
  CHECK(slurp(a / "dataset.csv").rfind("entity_id,feature,time,value\n", 0) == 0);
  CHECK(slurp(a / "losses.csv").rfind("epoch,train_loss,val_loss\n", 0) == 0);
  const json manifest = json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["format"] == "fungcn-manifest");
  CHECK(manifest["seed"] == 3);

  const std::string out = " --out \"" + a.string() + "\" --seed 3";
  REQUIRE(run("predict" + out, a / "log") == 0);
  const std::string preds = slurp(a / "predictions.csv");
  CHECK(preds.rfind("entity_id,feature,time,value\n", 0) == 0);
  CHECK(preds.find(",ic_long_1,") != std::string::npos);

  // Held-out scoring of the trained model.
  REQUIRE(run("evaluate" + out + " --override model=\"" + (a / "model.json").string() + "\"", a / "log") == 0);
  CHECK(slurp(a / "metrics.csv").rfind("task,target,seed,metric,value\nregression,ic_long_1,3,std_rmse,", 0) == 0);

  // A model trained on another dataset is rejected.
  const fs::path b = scratch("pipeline_b");
  const std::string out_b = " --out \"" + b.string() + "\" --seed 4";
  REQUIRE(run("simulate" + out_b + " --override n=41 --override grid_size=20", b / "log") == 0);
  REQUIRE(run("embed" + out_b, b / "log") == 0);
  CHECK(run("predict" + out_b + " --override model=\"" + (a / "model.json").string() + "\"" +
                " --override graph=\"" + (a / "graph.json").string() + "\"",
            b / "log") == 2);
  CHECK(slurp(b / "log").find("different entities") != std::string::npos);
  // Mismatched graph for a model.
  REQUIRE(run("graph" + out_b, b / "log") == 0);
  CHECK(run("predict" + out + " --override graph=\"" + (b / "graph.json").string() + "\"", a / "log") == 2);

  // Predictions file scored against the truth.
  REQUIRE(run("evaluate" + out + " --override predictions=\"" + (a / "predictions.csv").string() + "\"", a / "log") == 0);
  CHECK(slurp(a / "metrics.csv").find("ic_long_1,3,std_rmse,") != std::string::npos);
}

TEST_CASE("perfect predictions file scores zero") {
  const fs::path dir = scratch("oracle");
  build_pipeline(dir, 6);
  const std::string out = " --out \"" + dir.string() + "\" --seed 6";
  // Predictions equal to the tensor's own curves and levels.
  const auto x = fungcn::io::tensor_from_json(json::parse(slurp(dir / "x_gcn.json")));
  const std::vector<int> entities = {0, 7, 13, 21};
  fungcn::pipeline::TargetPrediction curve;
  curve.feature = 1;
  curve.entities = entities;
  curve.coeffs = fungcn::pipeline::true_coeffs(x, 1, entities);
  fungcn::pipeline::TargetPrediction level;
  level.feature = 7;
  level.kind = fungcn::pipeline::TaskKind::classification;
  level.entities = entities;
  level.levels = fungcn::pipeline::true_levels(x, 7, entities);
  std::ofstream(dir / "oracle.csv") << fungcn::io::predictions_to_csv({curve, level}, x);
  REQUIRE(run("evaluate" + out + " --override predictions=\"" + (dir / "oracle.csv").string() + "\"", dir / "log") == 0);
  std::istringstream in(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(in, line);
  int checked = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 5);
    if (f[3] == "std_rmse") {
      CHECK(f[1] == "ic_long_2");
      CHECK(std::stod(f[4]) < 1e-12);
      ++checked;
    } else if (f[3] == "accuracy") {
      CHECK(f[1] == "ic_cat_2");
      CHECK(std::stod(f[4]) == 1.0);
      ++checked;
    }
  }
  CHECK(checked == 2);
}

TEST_CASE("numerical failures exit with 3") {
  const fs::path dir = scratch("numerical");
  build_pipeline(dir, 2);
  const std::string out = " --out \"" + dir.string() + "\" --seed 2";
  CHECK(run("train" + out + " --override targets=ic_long_1 --override n_train=30 --override learning_rate=1e300",
            dir / "log") == 3);
}

TEST_CASE("same seed gives byte-identical outputs") {
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  build_pipeline(a, 9);
  build_pipeline(b, 9);
  for (const char* f : {"dataset.csv", "x_graph.json", "x_gcn.json", "graph.json", "graph.dot", "losses.csv"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  const fs::path c = scratch("repeat_c");
  build_pipeline(c, 10);
  CHECK(slurp(a / "dataset.csv") != slurp(c / "dataset.csv"));
}

TEST_CASE("DOT output matches the graph container") {
  const fs::path dir = scratch("dot");
  build_pipeline(dir, 1);
  const json g = json::parse(slurp(dir / "graph.json"));
  const DotGraph dot = parse_dot(slurp(dir / "graph.dot"));
  const auto names = g["feature_names"].get<std::vector<std::string>>();
  REQUIRE(dot.modality.size() == names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    CHECK(dot.modality.at(names[j]) == g["modalities"][j]["modality"].get<std::string>());
  }
  const auto a_sym = g["a_sym"].get<std::vector<std::vector<double>>>();
  std::size_t expected = 0;
  for (std::size_t r = 0; r < names.size(); ++r) {
    for (std::size_t s = r + 1; s < names.size(); ++s) {
      if (a_sym[r][s] <= 0.0) continue;
      ++expected;
      const auto it = dot.edges.find({names[r], names[s]});
      REQUIRE(it != dot.edges.end());
      CHECK(it->second == a_sym[r][s]);
    }
  }
  CHECK(dot.edges.size() == expected);
}

TEST_CASE("replication runner writes rows per target and seed") {
  const fs::path dir = scratch("replications");
  build_pipeline(dir, 5);
  const std::string out = " --out \"" + dir.string() + "\" --seed 5";
  REQUIRE(run("evaluate" + out +
                  " --override task=regression --override targets=ic_long_1,ic_long_2 --override replications=2"
                  " --override n_train=30 --override max_epochs=2",
              dir / "log") == 0);
  std::istringstream in(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "task,target,seed,metric,value");
  std::map<std::string, std::set<std::string>> seeds;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == "regression");
    seeds[f[1]].insert(f[2]);
  }
  CHECK(rows == 12);  // 2 targets x 2 seeds x (std_rmse, mean_std_rmse, skipped)
  CHECK(seeds["ic_long_1"] == std::set<std::string>{"5", "6"});
  CHECK(seeds["ic_long_2"] == std::set<std::string>{"5", "6"});
}
