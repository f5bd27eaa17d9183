#include "fungcn/embedding.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "fungcn/error.hpp"
#include "fungcn/parallel.hpp"
#include "fungcn/seed.hpp"

namespace fungcn::embedding {

std::string to_string(Kind kind) { return kind == Kind::graph ? "graph" : "gcn"; }

Kind parse_kind(const std::string& text) {
  if (text == "graph") return Kind::graph;
  if (text == "gcn") return Kind::gcn;
  throw contract_error("config", "unknown embedding kind '" + text + "'");
}

EmbeddedTensor::EmbeddedTensor(Kind kind, int n, int p, int k)
    : kind_(kind), n_(n), p_(p), k_(k), data_(static_cast<std::size_t>(n) * p * k, 0.0) {
  if (n < 0 || p < 0 || k < 1) throw contract_error("tensor", "invalid tensor shape");
  codebooks.resize(static_cast<std::size_t>(p));
  fpc_bases.resize(static_cast<std::size_t>(p));
}

Eigen::MatrixXd EmbeddedTensor::entity(int i) const {
  Eigen::MatrixXd out(p_, k_);
  for (int j = 0; j < p_; ++j)
    for (int s = 0; s < k_; ++s) out(j, s) = at(i, j, s);
  return out;
}

Eigen::MatrixXd EmbeddedTensor::feature_block(int j) const {
  Eigen::MatrixXd out(n_, k_);
  for (int i = 0; i < n_; ++i)
    for (int s = 0; s < k_; ++s) out(i, s) = at(i, j, s);
  return out;
}

void EmbeddedTensor::set_feature_block(int j, const Eigen::MatrixXd& block) {
  if (block.rows() != n_ || block.cols() != k_) {
    throw contract_error("tensor", "feature block has the wrong shape");
  }
  for (int i = 0; i < n_; ++i)
    for (int s = 0; s < k_; ++s) at(i, j, s) = block(i, s);
}

CategoryCodebook embed_categorical(const std::string& feature, int levels, int k,
                                   std::uint64_t seed) {
  if (levels < 2) throw contract_error("embedding", "categorical '" + feature + "' needs >= 2 levels");
  if (k < 1) throw contract_error("embedding", "embedding dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CategoryCodebook book{feature, Eigen::MatrixXd(levels, k), seed};
  for (int l = 0; l < levels; ++l)
    for (int s = 0; s < k; ++s) book.vectors(l, s) = normal(rng);
  return book;
}

namespace {

const Feature& longitudinal_feature(const Dataset& dataset, const std::string& name) {
  const Feature& f = dataset.feature(name);
  if (f.modality.kind != ModalityKind::longitudinal) {
    throw contract_error("embedding", "feature '" + name + "' is not longitudinal");
  }
  return f;
}

/// Smooths every entity's samples; entities sharing sample times share one
/// factorized smoother. Returns n x k coefficients.
Eigen::MatrixXd smooth_feature(const Feature& f, const fda::BasisPtr& basis,
                               const std::vector<double>& penalties) {
  std::map<std::vector<double>, fda::PenalizedSmoother> cache;
  Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(f.samples.size()), basis->size());
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    const fda::DiscreteSamples& s = f.samples[i];
    s.validate(basis->domain(), fda::BSplineBasis::kDegree + 2);
    auto it = cache.find(s.times);
    if (it == cache.end()) {
      it = cache.emplace(s.times, fda::PenalizedSmoother(basis, s.times, penalties)).first;
    }
    coeffs.row(static_cast<Eigen::Index>(i)) = it->second.fit(s.values).curve.coeffs.transpose();
  }
  return coeffs;
}

}  // namespace

std::pair<Eigen::MatrixXd, fda::FpcBasis> embed_longitudinal_kg(const Dataset& dataset,
                                                                const std::string& feature,
                                                                int k_graph,
                                                                const EmbedOptions& options) {
  const Feature& f = longitudinal_feature(dataset, feature);
  const auto basis = fda::make_bspline_basis(options.k_smooth, dataset.domain);
  const Eigen::MatrixXd coeffs = smooth_feature(f, basis, options.penalties);
  const auto grid = fda::QuadratureGrid::simpson(dataset.domain);
  const Eigen::MatrixXd values = coeffs * basis->design(grid.points).transpose();
  fda::FpcBasis fpc = fda::fpca_on_grid(values, grid, k_graph);
  Eigen::MatrixXd scores(values.rows(), k_graph);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    scores.row(i) = fda::project_grid_values(values.row(i).transpose(), fpc).transpose();
  }
  return {std::move(scores), std::move(fpc)};
}

std::pair<Eigen::MatrixXd, fda::BasisPtr> embed_longitudinal_gcn(const Dataset& dataset,
                                                                 const std::string& feature,
                                                                 int k_gcn,
                                                                 const EmbedOptions& options) {
  const Feature& f = longitudinal_feature(dataset, feature);
  auto basis = fda::make_bspline_basis(k_gcn, dataset.domain);
  return {smooth_feature(f, basis, options.penalties), basis};
}

Eigen::VectorXd embed_scalar(double value, int k) {
  if (!std::isfinite(value)) throw contract_error("embedding", "non-finite scalar value");
  return Eigen::VectorXd::Constant(k, value);
}

Eigen::MatrixXd embed_scalar_ensemble(const std::vector<double>& values, int k, Kind kind,
                                      const fda::Domain& domain) {
  const auto n = static_cast<Eigen::Index>(values.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, k);
  if (kind == Kind::gcn) {
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = embed_scalar(values[i], k).transpose();
    return out;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= std::max<double>(1.0, static_cast<double>(n));
  const double scale = std::sqrt(domain.length());
  for (Eigen::Index i = 0; i < n; ++i) out(i, 0) = (values[i] - mean) * scale;
  return out;
}

EmbeddedTensor standardize(EmbeddedTensor tensor) {
  const int n = tensor.n();
  const int p = tensor.p();
  const int k = tensor.k();
  if (n < 2) throw contract_error("standardize", "need at least 2 entities");
  SlotStats stats{Eigen::MatrixXd::Zero(p, k), Eigen::MatrixXd::Ones(p, k)};
  for (int j = 0; j < p; ++j) {
    for (int s = 0; s < k; ++s) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += tensor.at(i, j, s);
      mean /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = tensor.at(i, j, s) - mean;
        var += d * d;
      }
      var /= n;
      double sd = std::sqrt(var);
      // A slot whose spread is at rounding level is treated as constant.
      const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
      if (constant) sd = 1.0;
      for (int i = 0; i < n; ++i) {
        double& x = tensor.at(i, j, s);
        x = constant ? 0.0 : (x - mean) / sd;
      }
      stats.mean(j, s) = mean;
      stats.sd(j, s) = sd;
    }
  }
  if (tensor.standardized()) {
    // Compose with the existing transform so destandardize still maps back
    // to the original scale.
    stats.mean = tensor.stats.mean + tensor.stats.sd.cwiseProduct(stats.mean);
    stats.sd = tensor.stats.sd.cwiseProduct(stats.sd);
  }
  tensor.stats = std::move(stats);
  return tensor;
}

EmbeddedTensor destandardize(EmbeddedTensor tensor) {
  if (!tensor.standardized()) throw contract_error("standardize", "tensor has no stats");
  for (int i = 0; i < tensor.n(); ++i)
    for (int j = 0; j < tensor.p(); ++j)
      for (int s = 0; s < tensor.k(); ++s) {
        double& x = tensor.at(i, j, s);
        x = tensor.stats.mean(j, s) + tensor.stats.sd(j, s) * x;
      }
  tensor.stats = {};
  return tensor;
}

EmbeddedTensor assemble(const Dataset& dataset, Kind kind, int k, std::uint64_t seed,
                        const EmbedOptions& options) {
  dataset.validate();
  const int n = static_cast<int>(dataset.n());
  const int p = static_cast<int>(dataset.p());
  EmbeddedTensor tensor(kind, n, p, k);
  tensor.entity_ids = dataset.entity_ids;
  if (kind == Kind::gcn) tensor.basis = fda::make_bspline_basis(k, dataset.domain);

  const std::string codebook_tag = "codebook/" + to_string(kind);
  std::vector<std::string> failures(static_cast<std::size_t>(p));
  std::vector<ErrorClass> failure_class(static_cast<std::size_t>(p), ErrorClass::contract);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    const Feature& f = dataset.features[jj];
    try {
      switch (f.modality.kind) {
        case ModalityKind::longitudinal:
          if (kind == Kind::graph) {
            auto [scores, fpc] = embed_longitudinal_kg(dataset, f.name, k, options);
            tensor.set_feature_block(j, scores);
            tensor.fpc_bases[jj] = std::move(fpc);
          } else {
            auto [coeffs, basis] = embed_longitudinal_gcn(dataset, f.name, k, options);
            tensor.set_feature_block(j, coeffs);
          }
          break;
        case ModalityKind::categorical: {
          auto book = embed_categorical(f.name, f.modality.levels, k,
                                        derive_seed(seed, codebook_tag, jj));
          Eigen::MatrixXd block(n, k);
          for (int i = 0; i < n; ++i) block.row(i) = book.vectors.row(f.levels[i]);
          tensor.set_feature_block(j, block);
          tensor.codebooks[jj] = std::move(book);
          break;
        }
        case ModalityKind::scalar:
          tensor.set_feature_block(j, embed_scalar_ensemble(f.scalars, k, kind, dataset.domain));
          break;
      }
    } catch (const Error& e) {
      failures[jj] = e.what();
      failure_class[jj] = e.error_class();
    }
  });

  std::string report;
  ErrorClass cls = ErrorClass::contract;
  for (int j = 0; j < p; ++j) {
    if (failures[j].empty()) continue;
    report += "\n  " + dataset.features[j].name + ": " + failures[j];
    if (failure_class[j] == ErrorClass::numerical) cls = ErrorClass::numerical;
  }
  if (!report.empty()) throw Error(cls, "embedding", "feature embedding failed:" + report);

  for (const Feature& f : dataset.features) {
    tensor.feature_names.push_back(f.name);
    tensor.modalities.push_back(f.modality);
    std::vector<std::string> labels = f.level_labels;
    if (f.modality.kind == ModalityKind::categorical && labels.empty()) {
      for (int l = 0; l < f.modality.levels; ++l) labels.push_back(std::to_string(l));
    }
    tensor.level_labels.push_back(std::move(labels));
  }
  return standardize(std::move(tensor));
}

}  // namespace fungcn::embedding
