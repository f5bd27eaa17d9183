#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "fungcn/decode.hpp"
#include "fungcn/embedding.hpp"
#include "fungcn/error.hpp"
#include "fungcn/synth.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fungcn;
using embedding::EmbeddedTensor;
using embedding::Kind;

namespace {

Dataset one_feature(Feature f, int n) {
  Dataset ds;
  ds.entity_ids = testing::entity_ids(n);
  ds.features.push_back(std::move(f));
  return ds;
}

EmbeddedTensor random_tensor(int n, int p, int k, std::mt19937_64& rng) {
  EmbeddedTensor t(Kind::gcn, n, p, k);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int j = 0; j < p; ++j) {
    for (int s = 0; s < k; ++s) {
      const double mu = 10 * z(rng), sd = scale(rng);
      for (int i = 0; i < n; ++i) t.at(i, j, s) = mu + sd * z(rng);
    }
  }
  return t;
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("a shared curve has zero FPC scores") {
    const auto times = testing::linspace(50);
    const auto ds = one_feature(testing::longitudinal("f", 20, times, [](int, double t) { return std::sin(5 * t); }), 20);
    const auto [scores, fpc] = embedding::embed_longitudinal_kg(ds, "f", 3);
    CHECK(scores.cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("rank-one ensemble scores are the centered multipliers") {
    // Linear phi has no curvature, so smoothing leaves it untouched at every penalty.
    // phi = (1 + t) / ||1 + t||, with ||1 + t||^2 = 7/3 on [0, 1].
    const double unit = std::sqrt(7.0 / 3.0);
    std::vector<double> c;
    for (int i = 0; i < 30; ++i) c.push_back(std::cos(1.3 * i) * 2);
    double mean = 0;
    for (double v : c) mean += v;
    mean /= 30;
    const auto ds = one_feature(testing::longitudinal("f", 30, testing::linspace(40),
                                                      [&](int i, double t) { return c[i] * (1.0 + t) / unit; }),
                                30);
    const auto [scores, fpc] = embedding::embed_longitudinal_kg(ds, "f", 3);
    const double sign = scores(0, 0) * (c[0] - mean) >= 0 ? 1.0 : -1.0;
    for (int i = 0; i < 30; ++i) {
      CHECK(std::abs(sign * scores(i, 0) - (c[i] - mean)) < 1e-6);
      CHECK(std::abs(scores(i, 1)) < 1e-6);
      CHECK(std::abs(scores(i, 2)) < 1e-6);
    }
  }

  TEST_CASE("GP ensemble scores match a dense trapezoid oracle") {
    const auto grid = synth::uniform_grid(100);
    const Eigen::MatrixXd draws = synth::sample_gp(300, grid, {}, 23);
    Feature f;
    f.name = "gp";
    f.modality = Modality::longitudinal();
    f.samples = synth::to_samples(draws, grid);
    Dataset ds;
    ds.entity_ids = testing::entity_ids(300);
    ds.features.push_back(f);

    const auto [scores, fpc] = embedding::embed_longitudinal_kg(ds, "gp", 3);
    // Same smoothed curves, evaluated on a fine grid and decomposed independently.
    const auto [coeffs, basis] = embedding::embed_longitudinal_gcn(ds, "gp", 20);
    const int fine = 2001;
    const Eigen::MatrixXd values = coeffs * basis->design(Eigen::VectorXd::LinSpaced(fine, 0, 1)).transpose();
    const auto dense = oracle::dense_fpca(values, 1.0 / (fine - 1), 3);
    const Eigen::MatrixXd centered = values.rowwise() - values.colwise().mean();
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd expected(300);
      for (int i = 0; i < 300; ++i) {
        expected[i] = oracle::trapezoid(centered.row(i).transpose().cwiseProduct(dense.functions.col(c)),
                                        1.0 / (fine - 1));
      }
      const double sign = expected.dot(scores.col(c)) >= 0 ? 1.0 : -1.0;
      CHECK((sign * scores.col(c) - expected).norm() / expected.norm() < 1e-3);
    }
  }

  TEST_CASE("gcn embedding of constants, cubics and noisy sines") {
    const auto times = testing::linspace(60);
    const auto flat = one_feature(testing::longitudinal("f", 5, times, [](int i, double) { return 1.5 * i - 2; }), 5);
    const auto [c0, b0] = embedding::embed_longitudinal_gcn(flat, "f", 10);
    for (int i = 0; i < 5; ++i) CHECK((c0.row(i).array() - (1.5 * i - 2)).abs().maxCoeff() < 1e-8);

    // Constant curve decoded through coeffs_to_curve on the quadrature grid.
    const auto grid = fda::QuadratureGrid::simpson(fda::Domain(0, 1));
    const auto curve = decode::coeffs_to_curve(embedding::embed_scalar(3.7, 10), b0, Eigen::VectorXd::Zero(10),
                                               Eigen::VectorXd::Ones(10));
    CHECK((curve.on_grid(grid).array() - 3.7).abs().maxCoeff() < 1e-10);

    // Cubics lie in the span: exact in the unpenalized limit, and within the
    // bias of the smallest default penalty under GCV.
    auto cubic = [](int i, double t) { return (i + 1) * (0.3 - t + 2 * t * t * t); };
    const auto poly = one_feature(testing::longitudinal("f", 3, times, cubic), 3);
    embedding::EmbedOptions tiny;
    tiny.penalties = {1e-14};
    const auto [c1, b1] = embedding::embed_longitudinal_gcn(poly, "f", 10, tiny);
    const auto [c1g, b1g] = embedding::embed_longitudinal_gcn(poly, "f", 10);
    for (int i = 0; i < 3; ++i) {
      const fda::Curve exact(b1, c1.row(i).transpose()), gcv(b1g, c1g.row(i).transpose());
      double err = 0, err_gcv = 0;
      for (Eigen::Index a = 0; a < grid.size(); ++a) {
        const double truth = cubic(i, grid.points[a]);
        err = std::max(err, std::abs(exact(grid.points[a]) - truth));
        err_gcv = std::max(err_gcv, std::abs(gcv(grid.points[a]) - truth));
      }
      CHECK(err < 1e-6);
      CHECK(err_gcv < 1e-4);
    }

    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0, 0.1);
    const double pi = std::numbers::pi;
    const auto sines = one_feature(testing::longitudinal("f", 10, testing::linspace(100),
                                                         [&](int, double t) { return std::sin(2 * pi * t) + noise(rng); }),
                                   10);
    const auto [c2, b2] = embedding::embed_longitudinal_gcn(sines, "f", 10);
    for (int i = 0; i < 10; ++i) {
      const fda::Curve fit(b2, c2.row(i).transpose());
      double sq = 0;
      for (Eigen::Index a = 0; a < grid.size(); ++a) sq += std::pow(fit(grid.points[a]) - std::sin(2 * pi * grid.points[a]), 2);
      CHECK(std::sqrt(sq / grid.size()) < 0.1);
    }
  }

  TEST_CASE("categorical codebooks") {
    const auto a = embedding::embed_categorical("c", 4, 5, 99);
    const auto b = embedding::embed_categorical("c", 4, 5, 99);
    CHECK(a.vectors == b.vectors);
    const auto two = embedding::embed_categorical("c", 2, 5, 1);
    CHECK((two.vectors.row(0) - two.vectors.row(1)).norm() > 0);
    for (int l = 0; l < a.levels(); ++l) {
      int best = -1;
      double dist = 1e300;
      for (int m = 0; m < a.levels(); ++m) {
        const double d = (a.vectors.row(l) - a.vectors.row(m)).norm();
        if (d < dist) {
          dist = d;
          best = m;
        }
      }
      CHECK(best == l);
    }
    CHECK_THROWS_AS(embedding::embed_categorical("c", 1, 5, 1), Error);
  }

  TEST_CASE("scalars") {
    CHECK(embedding::embed_scalar(0.0, 10).isZero());
    CHECK((embedding::embed_scalar(3.7, 10).array() == 3.7).all());
    CHECK_THROWS_AS(embedding::embed_scalar(std::nan(""), 3), Error);

    // Graph kind: slot 0 equals the FPC score of the constant curves.
    const std::vector<double> v = {1.0, -2.0, 0.5, 4.0, 3.0};
    const fda::Domain domain(0, 2);
    const Eigen::MatrixXd e = embedding::embed_scalar_ensemble(v, 3, Kind::graph, domain);
    const auto grid = fda::QuadratureGrid::simpson(domain);
    Eigen::MatrixXd values(5, grid.size());
    for (int i = 0; i < 5; ++i) values.row(i).setConstant(v[i]);
    const auto fpc = fda::fpca_on_grid(values, grid, 1);
    for (int i = 0; i < 5; ++i) {
      const double score = fda::project_grid_values(values.row(i).transpose(), fpc)[0];
      CHECK(std::abs(std::abs(e(i, 0)) - std::abs(score)) < 1e-10);
      CHECK(e(i, 0) * score >= 0);
      CHECK(e.row(i).tail(2).isZero());
    }
  }

  TEST_CASE("standardize") {
    EmbeddedTensor t(Kind::gcn, 2, 2, 1);
    t.at(0, 0, 0) = 1;
    t.at(1, 0, 0) = 3;
    t.at(0, 1, 0) = 5;
    t.at(1, 1, 0) = 5;
    const auto s = embedding::standardize(t);
    CHECK(s.at(0, 0, 0) == doctest::Approx(-1.0));
    CHECK(s.at(1, 0, 0) == doctest::Approx(1.0));
    CHECK(s.at(0, 1, 0) == 0.0);
    CHECK(s.at(1, 1, 0) == 0.0);
    CHECK(s.stats.sd(1, 0) == 1.0);
    CHECK(s.stats.mean(1, 0) == 5.0);

    std::mt19937_64 rng(4);
    const auto z = embedding::standardize(random_tensor(50, 4, 3, rng));
    for (int j = 0; j < 4; ++j) {
      const Eigen::MatrixXd block = z.feature_block(j);
      const Eigen::RowVectorXd mean = block.colwise().mean();
      CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::RowVectorXd sd = ((block.rowwise() - mean).array().square().colwise().sum() / 50).sqrt();
      CHECK((sd.array() - 1).abs().maxCoeff() < 1e-10);
    }
    const auto again = embedding::standardize(z);
    for (std::size_t i = 0; i < z.data().size(); ++i) CHECK(std::abs(again.data()[i] - z.data()[i]) < 1e-10);
    const auto back = embedding::destandardize(again);
    const auto orig = embedding::destandardize(z);
    for (std::size_t i = 0; i < z.data().size(); ++i) CHECK(std::abs(back.data()[i] - orig.data()[i]) < 1e-9);
  }

  TEST_CASE("destandardize after standardize is the identity") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const auto t = random_tensor(2 + trial % 7, 1 + trial % 4, 1 + trial % 5, rng);
      const auto back = embedding::destandardize(embedding::standardize(t));
      for (std::size_t i = 0; i < t.data().size(); ++i) {
        CHECK(std::abs(back.data()[i] - t.data()[i]) <= 1e-12 * std::max(1.0, std::abs(t.data()[i])));
      }
    }
  }

  TEST_CASE("assemble shapes and determinism") {
    Dataset ds;
    ds.entity_ids = testing::entity_ids(6);
    ds.features.push_back(testing::scalar("s", {1, 2, 3, 4, 5, 6}));
    ds.features.push_back(testing::categorical("c", 3, {0, 1, 2, 0, 1, 2}));
    for (Kind kind : {Kind::graph, Kind::gcn}) {
      const auto t = embedding::assemble(ds, kind, 4, 7);
      CHECK(t.n() == 6);
      CHECK(t.p() == 2);
      CHECK(t.k() == 4);
      CHECK(t.standardized());
      CHECK(t.codebooks[1].has_value());
      CHECK(t.level_labels[1] == std::vector<std::string>{"L0", "L1", "L2"});
      const auto u = embedding::assemble(ds, kind, 4, 7);
      CHECK(t.data() == u.data());
    }

    synth::ScenarioConfig config;
    config.seed = 3;
    const auto scenario = synth::generate_scenario(config);
    const auto x = embedding::assemble(scenario.dataset, Kind::gcn, 10, 3);
    CHECK(x.n() == 300);
    CHECK(x.p() == 20);
    for (int j = 0; j < 20; ++j) {
      CHECK(x.feature_block(j).colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("feature failures are listed by name") {
    Dataset ds;
    ds.entity_ids = testing::entity_ids(3);
    // Too few samples per curve for a cubic fit.
    ds.features.push_back(testing::longitudinal("short", 3, {0.0, 1.0}, [](int, double t) { return t; }));
    ds.features.push_back(testing::scalar("s", {1, 2, 3}));
    try {
      embedding::assemble(ds, Kind::gcn, 5, 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("short") != std::string::npos);
    }
  }
}
