#include <set>

#include <doctest.h>

#include "fungcn/error.hpp"
#include "fungcn/pipeline.hpp"
#include "fungcn/synth.hpp"

using namespace fungcn;

namespace {

struct Fixture {
  embedding::EmbeddedTensor x_gcn;
  graph::KnowledgeGraph graph;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    synth::ScenarioConfig config;
    config.n = 40;
    config.grid_size = 30;
    config.seed = 11;
    const auto s = synth::generate_scenario(config);
    Fixture out;
    out.x_gcn = embedding::assemble(s.dataset, embedding::Kind::gcn, 10, 11);
    out.graph = graph::estimate_graph(embedding::assemble(s.dataset, embedding::Kind::graph, 3, 11), {}, 0.7);
    return out;
  }();
  return f;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("entity split") {
    const auto s = pipeline::split_entities(20, 15, 3);
    CHECK(s.train.size() == 15);
    CHECK(s.test.size() == 5);
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 20);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(pipeline::split_entities(20, 15, 3).test == s.test);
    CHECK(pipeline::split_entities(20, 15, 4).test != s.test);
    CHECK_THROWS_AS(pipeline::split_entities(20, 20, 3), Error);
    CHECK_THROWS_AS(pipeline::split_entities(20, 1, 3), Error);
  }

  TEST_CASE("forecasts keep the observed history") {
    const auto& f = fixture();
    gcn::TaskSpec task{{{0, gcn::Task::regression}}, gcn::Mode::forecast, 0.3};
    gcn::TrainConfig config;
    config.max_epochs = 2;
    const auto split = pipeline::split_entities(40, 30, 1);
    const auto model = gcn::train(f.x_gcn, f.graph.a_norm, task, config, split.train);
    const auto preds = pipeline::predict(model, pipeline::TaskKind::forecast, f.graph.a_norm, f.x_gcn, split.test);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].horizon == 3);
    const Eigen::MatrixXd truth = pipeline::true_coeffs(f.x_gcn, 0, split.test);
    CHECK((preds[0].coeffs.leftCols(7) - truth.leftCols(7)).cwiseAbs().maxCoeff() < 1e-12);
    const auto scores = pipeline::score(preds[0], f.x_gcn, split.train);
    REQUIRE(scores.size() == 3);
    CHECK(scores[0].metric == "std_rmse");
    CHECK(scores[1].metric == "mean_std_rmse");
    CHECK(scores[2].metric == "skipped");
  }

  TEST_CASE("replication rows are ordered by target then seed") {
    const auto& f = fixture();
    pipeline::ReplicationConfig config;
    config.kind = pipeline::TaskKind::classification;
    config.targets = {"ic_cat_1", "ic_cat_2"};
    config.seeds = {4, 2};
    config.n_train = 30;
    config.train.max_epochs = 2;
    const auto rows = pipeline::run_replications(f.x_gcn, f.graph, config);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].target == "ic_cat_1");
    CHECK(rows[0].seed == 4);
    CHECK(rows[0].metric == "accuracy");
    CHECK(rows[1].metric == "majority_accuracy");
    CHECK(rows[2].seed == 2);
    CHECK(rows[4].target == "ic_cat_2");
    for (const auto& r : rows) {
      CHECK(r.task == "classification");
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
    }
    CHECK(pipeline::run_replications(f.x_gcn, f.graph, config).size() == rows.size());

    config.targets = {"missing"};
    CHECK_THROWS_AS(pipeline::run_replications(f.x_gcn, f.graph, config), Error);
    config.targets = {"ic_long_1"};
    CHECK_THROWS_AS(pipeline::run_replications(f.x_gcn, f.graph, config), Error);
  }

  TEST_CASE("regression reference equals the mean predictor score") {
    const auto& f = fixture();
    const std::vector<int> entities = {0, 5, 9};
    pipeline::TargetPrediction p;
    p.feature = 2;
    p.entities = entities;
    p.coeffs = pipeline::true_coeffs(f.x_gcn, 2, entities);
    const std::vector<int> train = {1, 2, 3};
    const auto scores = pipeline::score(p, f.x_gcn, train);
    CHECK(scores[0].value < 1e-12);
    CHECK(scores[1].value > 0.0);
  }
}
