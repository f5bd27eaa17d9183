#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fungcn/fda.hpp"

namespace fungcn {

enum class ModalityKind { longitudinal, categorical, scalar };

struct Modality {
  ModalityKind kind = ModalityKind::scalar;
  int levels = 0;  ///< categorical only

  static Modality longitudinal() { return {ModalityKind::longitudinal, 0}; }
  static Modality categorical(int levels) { return {ModalityKind::categorical, levels}; }
  static Modality scalar() { return {ModalityKind::scalar, 0}; }

  bool operator==(const Modality&) const = default;
};

std::string to_string(ModalityKind kind);
ModalityKind parse_modality(const std::string& text);

/// One feature observed on every entity. Exactly one of the per-entity
/// vectors is populated, matching the modality.
struct Feature {
  std::string name;
  Modality modality;
  std::vector<fda::DiscreteSamples> samples;  ///< longitudinal
  std::vector<int> levels;                    ///< categorical, in [0, modality.levels)
  std::vector<double> scalars;                ///< scalar
  std::vector<std::string> level_labels;      ///< categorical; defaults to "0", "1", ...
};

struct Dataset {
  fda::Domain domain;
  std::vector<std::string> entity_ids;
  std::vector<Feature> features;

  std::size_t n() const { return entity_ids.size(); }
  std::size_t p() const { return features.size(); }

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  ///< throws if absent
  const Feature& feature(const std::string& name) const { return features[index_of(name)]; }

  /// Completeness and level-bound checks; throws a contract error naming the
  /// offending entity and feature.
  void validate() const;

  std::size_t count(ModalityKind kind) const;
};

}  // namespace fungcn
