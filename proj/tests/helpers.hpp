#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fungcn/dataset.hpp"

namespace testing {

inline std::vector<std::string> entity_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
  return ids;
}

inline std::vector<double> linspace(int m, double lo = 0.0, double hi = 1.0) {
  std::vector<double> t(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) t[i] = lo + (hi - lo) * i / (m - 1);
  t.back() = hi;
  return t;
}

/// Longitudinal feature sampled on a shared grid from curve(entity, t).
inline fungcn::Feature longitudinal(const std::string& name, int n, const std::vector<double>& times,
                                    const std::function<double(int, double)>& curve) {
  fungcn::Feature f;
  f.name = name;
  f.modality = fungcn::Modality::longitudinal();
  for (int i = 0; i < n; ++i) {
    fungcn::fda::DiscreteSamples s;
    s.times = times;
    for (double t : times) s.values.push_back(curve(i, t));
    f.samples.push_back(std::move(s));
  }
  return f;
}

inline fungcn::Feature categorical(const std::string& name, int levels, std::vector<int> values) {
  fungcn::Feature f;
  f.name = name;
  f.modality = fungcn::Modality::categorical(levels);
  f.levels = std::move(values);
  for (int l = 0; l < levels; ++l) f.level_labels.push_back("L" + std::to_string(l));
  return f;
}

inline fungcn::Feature scalar(const std::string& name, std::vector<double> values) {
  fungcn::Feature f;
  f.name = name;
  f.modality = fungcn::Modality::scalar();
  f.scalars = std::move(values);
  return f;
}

}  // namespace testing
