#pragma once

// Files exchanged between commands: long-format dataset CSV plus a JSON
// manifest, versioned JSON containers for tensors, graphs and models, graph
// DOT export, predictions and metric CSVs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fungcn/dataset.hpp"
#include "fungcn/embedding.hpp"
#include "fungcn/gcn.hpp"
#include "fungcn/graph.hpp"
#include "fungcn/pipeline.hpp"

namespace fungcn::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text(const fs::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_text(const fs::path& path, const std::string& text);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& doc);

/// Checks the "format" and "version" fields of a container.
void check_container(const json& doc, const std::string& format);

std::uint64_t hash_text(const std::string& text);
std::string hex(std::uint64_t value);

// Dataset --------------------------------------------------------------------

struct FeatureSchema {
  std::string name;
  Modality modality;
  std::vector<std::string> level_labels;  ///< categorical, in level order
};

struct Schema {
  fda::Domain domain;
  std::vector<FeatureSchema> features;
};

Schema schema_of(const Dataset& dataset);
json schema_to_json(const Schema& schema);
Schema schema_from_json(const json& doc);

/// Splits one CSV record; double quotes may enclose fields containing commas.
std::vector<std::string> split_csv_line(const std::string& line);

/// Parses long-format rows (entity_id, feature, time, value) against a schema.
/// Entities appear in first-seen order; samples are sorted by time.
Dataset parse_dataset_csv(const std::string& text, const Schema& schema);
std::string dataset_to_csv(const Dataset& dataset);

/// Manifest written next to a dataset: schema, seed, config and its hash.
json manifest_json(const Dataset& dataset, std::uint64_t seed, const json& config);

/// Reads a dataset CSV using the schema in a manifest.
Dataset read_dataset(const fs::path& csv, const fs::path& manifest);

// Containers -----------------------------------------------------------------

json tensor_to_json(const embedding::EmbeddedTensor& tensor);
embedding::EmbeddedTensor tensor_from_json(const json& doc);

json graph_to_json(const graph::KnowledgeGraph& graph, const std::vector<std::string>& names,
                   const std::vector<Modality>& modalities, const graph::SolverConfig& solver);
graph::KnowledgeGraph graph_from_json(const json& doc);
/// Hash of the adjacency and threshold, stored in models trained on the graph.
std::uint64_t graph_hash(const graph::KnowledgeGraph& graph);

/// Undirected DOT graph; nodes labeled by feature and modality, edge width
/// proportional to the symmetrized weight.
std::string graph_to_dot(const graph::KnowledgeGraph& graph, const std::vector<std::string>& names,
                         const std::vector<Modality>& modalities);

struct ModelFile {
  gcn::TrainedModel model;
  pipeline::TaskKind kind = pipeline::TaskKind::regression;
  std::vector<std::string> feature_names;
  std::vector<std::string> entity_ids;  ///< of the tensor the model was trained on
  std::vector<int> test_entities;
  std::uint64_t graph_hash = 0;
  json config;
};

json model_to_json(const ModelFile& model);
ModelFile model_from_json(const json& doc);

// CSV reports ----------------------------------------------------------------

std::string metrics_to_csv(const std::vector<pipeline::MetricRow>& rows);
std::string losses_to_csv(const gcn::TrainedModel& model);

/// Predicted curves at the quadrature nodes, or level labels with an empty time.
std::string predictions_to_csv(const std::vector<pipeline::TargetPrediction>& preds,
                               const embedding::EmbeddedTensor& x_gcn);

struct PredictionRows {
  /// Per target feature: entity index -> values at the quadrature nodes.
  std::vector<std::pair<int, std::vector<std::pair<int, std::vector<double>>>>> curves;
  /// Per target feature: entity index -> level.
  std::vector<std::pair<int, std::vector<std::pair<int, int>>>> levels;
};

PredictionRows parse_predictions_csv(const std::string& text, const embedding::EmbeddedTensor& x_gcn);

/// Scores a predictions file against the tensor's true curves and levels.
std::vector<pipeline::MetricRow> score_predictions(const PredictionRows& rows,
                                                   const embedding::EmbeddedTensor& x_gcn,
                                                   const std::string& task, std::uint64_t seed);

}  // namespace fungcn::io
