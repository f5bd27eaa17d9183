#include "fungcn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "fungcn/error.hpp"

namespace fungcn {

std::string to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::longitudinal: return "longitudinal";
    case ModalityKind::categorical: return "categorical";
    case ModalityKind::scalar: return "scalar";
  }
  return "unknown";
}

ModalityKind parse_modality(const std::string& text) {
  if (text == "longitudinal") return ModalityKind::longitudinal;
  if (text == "categorical") return ModalityKind::categorical;
  if (text == "scalar") return ModalityKind::scalar;
  throw contract_error("config", "unknown modality '" + text + "'");
}

std::optional<std::size_t> Dataset::find(const std::string& name) const {
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(const std::string& name) const {
  if (auto j = find(name)) return *j;
  throw contract_error("dataset", "no feature named '" + name + "'");
}

std::size_t Dataset::count(ModalityKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      features.begin(), features.end(), [kind](const Feature& f) { return f.modality.kind == kind; }));
}

void Dataset::validate() const {
  const std::size_t entities = n();
  for (const Feature& f : features) {
    auto missing = [&](std::size_t have) {
      if (have != entities) {
        const std::string who = have < entities ? entity_ids[have] : "<extra>";
        throw contract_error("ingestion", "missing value for entity '" + who + "', feature '" +
                                              f.name + "'");
      }
    };
    switch (f.modality.kind) {
      case ModalityKind::longitudinal:
        missing(f.samples.size());
        for (std::size_t i = 0; i < entities; ++i) {
          if (f.samples[i].times.empty()) {
            throw contract_error("ingestion", "missing value for entity '" + entity_ids[i] +
                                                  "', feature '" + f.name + "'");
          }
          f.samples[i].validate(domain, 1);
        }
        break;
      case ModalityKind::categorical:
        if (f.modality.levels < 2) {
          throw contract_error("dataset", "categorical feature '" + f.name + "' needs >= 2 levels");
        }
        missing(f.levels.size());
        for (std::size_t i = 0; i < entities; ++i) {
          if (f.levels[i] < 0 || f.levels[i] >= f.modality.levels) {
            throw contract_error("dataset", "level index out of range for entity '" +
                                                entity_ids[i] + "', feature '" + f.name + "'");
          }
        }
        break;
      case ModalityKind::scalar:
        missing(f.scalars.size());
        for (std::size_t i = 0; i < entities; ++i) {
          if (!std::isfinite(f.scalars[i])) {
            throw contract_error("dataset", "non-finite scalar for entity '" + entity_ids[i] +
                                                "', feature '" + f.name + "'");
          }
        }
        break;
    }
  }
}

}  // namespace fungcn
