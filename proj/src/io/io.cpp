#include "fungcn/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "fungcn/decode.hpp"
#include "fungcn/error.hpp"
#include "fungcn/seed.hpp"

namespace fungcn::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw contract_error("ingestion", "invalid number '" + text + "' in " + what);
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array()) throw contract_error("container", "matrix must be an array of rows");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw contract_error("container", "ragged matrix");
    }
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& a) {
  const auto values = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json modality_to_json(const Modality& m) {
  json j = {{"modality", to_string(m.kind)}};
  if (m.kind == ModalityKind::categorical) j["levels"] = m.levels;
  return j;
}

Modality modality_from_json(const json& j) {
  const ModalityKind kind = parse_modality(j.at("modality").get<std::string>());
  if (kind == ModalityKind::categorical) return Modality::categorical(j.at("levels").get<int>());
  return {kind, 0};
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

void expect_header(const std::vector<std::string>& lines, const std::string& header,
                   const std::string& what) {
  if (lines.empty() || lines.front() != header) {
    throw contract_error("ingestion", what + " must start with the header '" + header + "'");
  }
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw contract_error("io", "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw contract_error("io", "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw contract_error("io", "write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw contract_error("io", "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(1) + "\n"); }

void check_container(const json& doc, const std::string& format) {
  if (!doc.is_object() || !doc.contains("format") || doc.at("format") != format) {
    throw contract_error("container", "expected a '" + format + "' container");
  }
  if (!doc.contains("version") || doc.at("version") != kFormatVersion) {
    throw contract_error("container", "unsupported " + format + " version " +
                                          (doc.contains("version") ? doc.at("version").dump() : "?"));
  }
}

std::uint64_t hash_text(const std::string& text) { return fnv1a(text); }

std::string hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<std::size_t>(i)] = digits[value & 15];
  return out;
}

Schema schema_of(const Dataset& dataset) {
  Schema s{dataset.domain, {}};
  for (const Feature& f : dataset.features) {
    FeatureSchema fs{f.name, f.modality, f.level_labels};
    if (f.modality.kind == ModalityKind::categorical && fs.level_labels.empty()) {
      for (int l = 0; l < f.modality.levels; ++l) fs.level_labels.push_back(std::to_string(l));
    }
    s.features.push_back(std::move(fs));
  }
  return s;
}

json schema_to_json(const Schema& schema) {
  json features = json::array();
  for (const FeatureSchema& f : schema.features) {
    json j = {{"name", f.name}, {"modality", to_string(f.modality.kind)}};
    if (f.modality.kind == ModalityKind::categorical) j["levels"] = f.level_labels;
    features.push_back(std::move(j));
  }
  return {{"domain", {schema.domain.t_min, schema.domain.t_max}}, {"features", features}};
}

Schema schema_from_json(const json& doc) {
  Schema s;
  try {
    const auto domain = doc.at("domain").get<std::vector<double>>();
    if (domain.size() != 2) throw contract_error("config", "domain must have two end points");
    s.domain = fda::Domain(domain[0], domain[1]);
    for (const json& j : doc.at("features")) {
      FeatureSchema f;
      f.name = j.at("name").get<std::string>();
      const ModalityKind kind = parse_modality(j.at("modality").get<std::string>());
      if (kind == ModalityKind::categorical) {
        f.level_labels = j.at("levels").get<std::vector<std::string>>();
        f.modality = Modality::categorical(static_cast<int>(f.level_labels.size()));
      } else {
        f.modality = {kind, 0};
      }
      s.features.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw contract_error("config", std::string("malformed schema: ") + e.what());
  }
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw contract_error("ingestion", "unterminated quote in '" + line + "'");
  return fields;
}

Dataset parse_dataset_csv(const std::string& text, const Schema& schema) {
  const auto lines = csv_lines(text);
  expect_header(lines, "entity_id,feature,time,value", "dataset CSV");

  std::map<std::string, std::size_t> feature_index;
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    if (!feature_index.emplace(schema.features[j].name, j).second) {
      throw contract_error("config", "duplicate feature '" + schema.features[j].name + "' in schema");
    }
  }
  std::vector<std::map<std::string, int>> label_index(schema.features.size());
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto& labels = schema.features[j].level_labels;
    for (std::size_t l = 0; l < labels.size(); ++l) label_index[j][labels[l]] = static_cast<int>(l);
  }

  Dataset ds;
  ds.domain = schema.domain;
  std::map<std::string, std::size_t> entity_index;
  // Per feature, per entity: observed (time, value) pairs, or one value.
  std::vector<std::vector<std::vector<std::pair<double, double>>>> points(schema.features.size());
  std::vector<std::vector<std::optional<double>>> single(schema.features.size());

  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string where = "line " + std::to_string(ln + 1);
    const auto fields = split_csv_line(lines[ln]);
    if (fields.size() != 4) throw contract_error("ingestion", where + ": expected 4 fields");
    const std::string& id = fields[0];
    if (id.empty()) throw contract_error("ingestion", where + ": empty entity_id");
    const auto fit = feature_index.find(fields[1]);
    if (fit == feature_index.end()) {
      throw contract_error("ingestion", where + ": feature '" + fields[1] + "' is not in the schema");
    }
    const std::size_t j = fit->second;
    auto [eit, fresh] = entity_index.emplace(id, ds.entity_ids.size());
    if (fresh) {
      ds.entity_ids.push_back(id);
      for (auto& p : points) p.emplace_back();
      for (auto& s : single) s.emplace_back();
    }
    const std::size_t i = eit->second;
    const FeatureSchema& f = schema.features[j];
    const std::string who = "entity '" + id + "', feature '" + f.name + "'";
    if (f.modality.kind == ModalityKind::longitudinal) {
      if (fields[2].empty()) throw contract_error("ingestion", where + ": missing time for " + who);
      points[j][i].emplace_back(parse_double(fields[2], where), parse_double(fields[3], where));
      continue;
    }
    if (!fields[2].empty()) throw contract_error("ingestion", where + ": unexpected time for " + who);
    if (single[j][i]) throw contract_error("ingestion", where + ": duplicate value for " + who);
    if (f.modality.kind == ModalityKind::scalar) {
      single[j][i] = parse_double(fields[3], where);
    } else {
      const auto lit = label_index[j].find(fields[3]);
      if (lit == label_index[j].end()) {
        throw contract_error("ingestion", where + ": unknown level '" + fields[3] + "' for " + who);
      }
      single[j][i] = lit->second;
    }
  }

  const std::size_t n = ds.entity_ids.size();
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const FeatureSchema& fs = schema.features[j];
    Feature f;
    f.name = fs.name;
    f.modality = fs.modality;
    f.level_labels = fs.level_labels;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string who = "entity '" + ds.entity_ids[i] + "', feature '" + fs.name + "'";
      if (fs.modality.kind == ModalityKind::longitudinal) {
        auto& pts = points[j][i];
        if (pts.empty()) throw contract_error("ingestion", "missing value for " + who);
        std::sort(pts.begin(), pts.end());
        fda::DiscreteSamples s;
        for (std::size_t a = 0; a < pts.size(); ++a) {
          if (a > 0 && pts[a].first == pts[a - 1].first) {
            throw contract_error("ingestion", "duplicate time " + format_double(pts[a].first) +
                                                  " for " + who);
          }
          s.times.push_back(pts[a].first);
          s.values.push_back(pts[a].second);
        }
        f.samples.push_back(std::move(s));
      } else {
        if (!single[j][i]) throw contract_error("ingestion", "missing value for " + who);
        if (fs.modality.kind == ModalityKind::scalar) {
          f.scalars.push_back(*single[j][i]);
        } else {
          f.levels.push_back(static_cast<int>(*single[j][i]));
        }
      }
    }
    ds.features.push_back(std::move(f));
  }
  ds.validate();
  return ds;
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::string out = "entity_id,feature,time,value\n";
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const std::string id = quote_csv(dataset.entity_ids[i]);
    for (const Feature& f : dataset.features) {
      const std::string name = quote_csv(f.name);
      switch (f.modality.kind) {
        case ModalityKind::longitudinal:
          for (std::size_t a = 0; a < f.samples[i].times.size(); ++a) {
            out += id + "," + name + "," + format_double(f.samples[i].times[a]) + "," +
                   format_double(f.samples[i].values[a]) + "\n";
          }
          break;
        case ModalityKind::scalar:
          out += id + "," + name + ",," + format_double(f.scalars[i]) + "\n";
          break;
        case ModalityKind::categorical: {
          const int l = f.levels[i];
          const std::string label = f.level_labels.empty() ? std::to_string(l) : f.level_labels[l];
          out += id + "," + name + ",," + quote_csv(label) + "\n";
          break;
        }
      }
    }
  }
  return out;
}

json manifest_json(const Dataset& dataset, std::uint64_t seed, const json& config) {
  return {{"format", "fungcn-manifest"},
          {"version", kFormatVersion},
          {"seed", seed},
          {"seed_derivation", "splitmix64(splitmix64(seed ^ fnv1a(tag)) + index)"},
          {"config", config},
          {"config_hash", hex(hash_text(config.dump()))},
          {"n", dataset.n()},
          {"p", dataset.p()},
          {"schema", schema_to_json(schema_of(dataset))}};
}

Dataset read_dataset(const fs::path& csv, const fs::path& manifest) {
  const json doc = read_json(manifest);
  check_container(doc, "fungcn-manifest");
  return parse_dataset_csv(read_text(csv), schema_from_json(doc.at("schema")));
}

json tensor_to_json(const embedding::EmbeddedTensor& t) {
  json modalities = json::array();
  for (const Modality& m : t.modalities) modalities.push_back(modality_to_json(m));
  json codebooks = json::array();
  for (const auto& book : t.codebooks) {
    if (!book) {
      codebooks.push_back(nullptr);
      continue;
    }
    codebooks.push_back({{"seed", book->seed}, {"vectors", matrix_to_json(book->vectors)}});
  }
  json fpc = json::array();
  for (const auto& f : t.fpc_bases) {
    if (!f) {
      fpc.push_back(nullptr);
      continue;
    }
    fpc.push_back({{"nodes", f->grid.size()},
                   {"mean", vector_to_json(f->mean)},
                   {"components", matrix_to_json(f->components.transpose())},
                   {"eigenvalues", vector_to_json(f->eigenvalues)},
                   {"total_variance", f->total_variance}});
  }
  json doc = {{"format", "fungcn-tensor"},
              {"version", kFormatVersion},
              {"kind", embedding::to_string(t.kind())},
              {"n", t.n()},
              {"p", t.p()},
              {"k", t.k()},
              {"entity_ids", t.entity_ids},
              {"feature_names", t.feature_names},
              {"modalities", modalities},
              {"level_labels", t.level_labels},
              {"data", t.data()},
              {"codebooks", codebooks},
              {"fpc", fpc}};
  if (t.standardized()) doc["stats"] = {{"mean", matrix_to_json(t.stats.mean)}, {"sd", matrix_to_json(t.stats.sd)}};
  if (t.basis) {
    doc["basis"] = {{"size", t.basis->size()},
                    {"domain", {t.basis->domain().t_min, t.basis->domain().t_max}}};
  }
  return doc;
}

embedding::EmbeddedTensor tensor_from_json(const json& doc) {
  check_container(doc, "fungcn-tensor");
  try {
    embedding::EmbeddedTensor t(embedding::parse_kind(doc.at("kind").get<std::string>()),
                                doc.at("n").get<int>(), doc.at("p").get<int>(), doc.at("k").get<int>());
    t.entity_ids = doc.at("entity_ids").get<std::vector<std::string>>();
    t.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const json& m : doc.at("modalities")) t.modalities.push_back(modality_from_json(m));
    t.level_labels = doc.at("level_labels").get<std::vector<std::vector<std::string>>>();
    auto data = doc.at("data").get<std::vector<double>>();
    if (data.size() != t.data().size()) throw contract_error("container", "tensor data has the wrong size");
    t.data() = std::move(data);
    if (static_cast<int>(t.entity_ids.size()) != t.n() || static_cast<int>(t.feature_names.size()) != t.p() ||
        static_cast<int>(t.modalities.size()) != t.p() || static_cast<int>(t.level_labels.size()) != t.p()) {
      throw contract_error("container", "tensor metadata does not match its shape");
    }
    if (doc.contains("stats")) {
      t.stats.mean = matrix_from_json(doc.at("stats").at("mean"));
      t.stats.sd = matrix_from_json(doc.at("stats").at("sd"));
      if (t.stats.mean.rows() != t.p() || t.stats.mean.cols() != t.k() ||
          t.stats.sd.rows() != t.p() || t.stats.sd.cols() != t.k()) {
        throw contract_error("container", "tensor stats do not match its shape");
      }
    }
    const json& books = doc.at("codebooks");
    for (int j = 0; j < t.p(); ++j) {
      const json& b = books.at(static_cast<std::size_t>(j));
      if (b.is_null()) continue;
      t.codebooks[j] = embedding::CategoryCodebook{t.feature_names[j], matrix_from_json(b.at("vectors")),
                                                   b.at("seed").get<std::uint64_t>()};
    }
    if (doc.contains("basis")) {
      const auto d = doc.at("basis").at("domain").get<std::vector<double>>();
      t.basis = fda::make_bspline_basis(doc.at("basis").at("size").get<int>(), fda::Domain(d.at(0), d.at(1)));
    }
    const json& fpc = doc.at("fpc");
    for (int j = 0; j < t.p(); ++j) {
      const json& f = fpc.at(static_cast<std::size_t>(j));
      if (f.is_null()) continue;
      fda::FpcBasis b;
      const fda::Domain domain = t.basis ? t.basis->domain() : fda::Domain();
      b.grid = fda::QuadratureGrid::simpson(domain, f.at("nodes").get<int>());
      b.mean = vector_from_json(f.at("mean"));
      b.components = matrix_from_json(f.at("components")).transpose();
      b.eigenvalues = vector_from_json(f.at("eigenvalues"));
      b.total_variance = f.at("total_variance").get<double>();
      t.fpc_bases[j] = std::move(b);
    }
    return t;
  } catch (const json::exception& e) {
    throw contract_error("container", std::string("malformed tensor container: ") + e.what());
  }
}

json graph_to_json(const graph::KnowledgeGraph& g, const std::vector<std::string>& names,
                   const std::vector<Modality>& modalities, const graph::SolverConfig& solver) {
  if (static_cast<int>(names.size()) != g.p() || static_cast<int>(modalities.size()) != g.p()) {
    throw contract_error("graph", "feature metadata does not match the graph size");
  }
  json mods = json::array();
  for (const Modality& m : modalities) mods.push_back(modality_to_json(m));
  json paths = json::array();
  for (const auto& path : g.paths) {
    json sel = json::array();
    for (const auto& s : path.selections) sel.push_back({{"feature", s.feature}, {"c_lambda", s.c_lambda}});
    paths.push_back({{"target", path.target}, {"selections", sel}});
  }
  return {{"format", "fungcn-graph"},
          {"version", kFormatVersion},
          {"theta", g.theta},
          {"feature_names", names},
          {"modalities", mods},
          {"solver",
           {{"p_max", solver.p_max},
            {"path_length", solver.path_length},
            {"c_min", solver.c_min},
            {"tolerance", solver.tolerance}}},
          {"a_raw", matrix_to_json(g.a_raw)},
          {"a_sym", matrix_to_json(g.a_sym)},
          {"a_norm", matrix_to_json(g.a_norm)},
          {"paths", paths}};
}

graph::KnowledgeGraph graph_from_json(const json& doc) {
  check_container(doc, "fungcn-graph");
  try {
    graph::KnowledgeGraph g;
    g.theta = doc.at("theta").get<double>();
    g.a_raw = matrix_from_json(doc.at("a_raw"));
    g.a_sym = matrix_from_json(doc.at("a_sym"));
    g.a_norm = matrix_from_json(doc.at("a_norm"));
    for (const json& p : doc.at("paths")) {
      graph::SelectionPath path{p.at("target").get<int>(), {}};
      for (const json& s : p.at("selections")) {
        path.selections.push_back({s.at("feature").get<int>(), s.at("c_lambda").get<double>()});
      }
      g.paths.push_back(std::move(path));
    }
    const int p = g.p();
    if (g.a_raw.cols() != p || g.a_sym.rows() != p || g.a_sym.cols() != p || g.a_norm.rows() != p ||
        g.a_norm.cols() != p) {
      throw contract_error("container", "graph matrices have inconsistent shapes");
    }
    return g;
  } catch (const json::exception& e) {
    throw contract_error("container", std::string("malformed graph container: ") + e.what());
  }
}

std::uint64_t graph_hash(const graph::KnowledgeGraph& g) {
  std::uint64_t h = fnv1a("graph");
  const double theta = g.theta;
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(&theta), sizeof theta), h);
  for (const Eigen::MatrixXd* m : {&g.a_raw, &g.a_norm}) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(m->data()),
                               static_cast<std::size_t>(m->size()) * sizeof(double)),
              h);
  }
  return h;
}

namespace {

std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string graph_to_dot(const graph::KnowledgeGraph& g, const std::vector<std::string>& names,
                         const std::vector<Modality>& modalities) {
  if (static_cast<int>(names.size()) != g.p() || static_cast<int>(modalities.size()) != g.p()) {
    throw contract_error("graph", "feature metadata does not match the graph size");
  }
  std::string out = "graph knowledge_graph {\n  node [shape=ellipse];\n";
  for (int j = 0; j < g.p(); ++j) {
    const std::string kind = to_string(modalities[j].kind);
    std::string label = dot_id(names[j]);
    label.insert(label.size() - 1, "\\n" + kind);
    out += "  " + dot_id(names[j]) + " [label=" + label +
           ", modality=" + dot_id(kind) + "];\n";
  }
  for (int a = 0; a < g.p(); ++a) {
    for (int b = a + 1; b < g.p(); ++b) {
      const double w = g.a_sym(a, b);
      if (w <= 0.0) continue;
      // penwidth scales the weight so that the strongest edges stand out.
      out += "  " + dot_id(names[a]) + " -- " + dot_id(names[b]) + " [weight=" + format_double(w) +
             ", penwidth=" + format_double(4.0 * w) + "];\n";
    }
  }
  return out + "}\n";
}

json model_to_json(const ModelFile& f) {
  const gcn::TrainedModel& m = f.model;
  json targets = json::array();
  for (const gcn::Target& t : m.task.targets) {
    targets.push_back({{"feature", t.feature},
                       {"name", f.feature_names.at(static_cast<std::size_t>(t.feature))},
                       {"task", gcn::to_string(t.task)}});
  }
  json heads = json::array();
  for (std::size_t t = 0; t < m.params.w_out.size(); ++t) {
    heads.push_back({{"w", matrix_to_json(m.params.w_out[t])}, {"b", vector_to_json(m.params.b_out[t])}});
  }
  return {{"format", "fungcn-model"},
          {"version", kFormatVersion},
          {"task", pipeline::to_string(f.kind)},
          {"mode", gcn::to_string(m.task.mode)},
          {"r_f", m.task.r_f},
          {"targets", targets},
          {"k1", m.split.k1},
          {"k2", m.split.k2},
          {"feature_names", f.feature_names},
          {"params",
           {{"w1", matrix_to_json(m.params.w1)},
            {"b1", vector_to_json(m.params.b1)},
            {"w2", matrix_to_json(m.params.w2)},
            {"b2", vector_to_json(m.params.b2)},
            {"heads", heads}}},
          {"train_loss", m.train_loss},
          {"val_loss", m.val_loss},
          {"stopped_epoch", m.stopped_epoch},
          {"best_epoch", m.best_epoch},
          {"entity_ids", f.entity_ids},
          {"train_entities", m.train_entities},
          {"val_entities", m.val_entities},
          {"test_entities", f.test_entities},
          {"stats_fingerprint", hex(m.stats_fingerprint)},
          {"graph_hash", hex(f.graph_hash)},
          {"config", f.config}};
}

ModelFile model_from_json(const json& doc) {
  check_container(doc, "fungcn-model");
  try {
    ModelFile f;
    gcn::TrainedModel& m = f.model;
    f.kind = pipeline::parse_task_kind(doc.at("task").get<std::string>());
    m.task.mode = gcn::parse_mode(doc.at("mode").get<std::string>());
    m.task.r_f = doc.at("r_f").get<double>();
    for (const json& t : doc.at("targets")) {
      m.task.targets.push_back({t.at("feature").get<int>(), gcn::parse_task(t.at("task").get<std::string>())});
    }
    m.split = {doc.at("k1").get<int>(), doc.at("k2").get<int>()};
    f.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const json& p = doc.at("params");
    m.params.w1 = matrix_from_json(p.at("w1"));
    m.params.b1 = vector_from_json(p.at("b1"));
    m.params.w2 = matrix_from_json(p.at("w2"));
    m.params.b2 = vector_from_json(p.at("b2"));
    for (const json& h : p.at("heads")) {
      m.params.w_out.push_back(matrix_from_json(h.at("w")));
      m.params.b_out.push_back(vector_from_json(h.at("b")));
    }
    m.train_loss = doc.at("train_loss").get<std::vector<double>>();
    m.val_loss = doc.at("val_loss").get<std::vector<double>>();
    m.stopped_epoch = doc.at("stopped_epoch").get<int>();
    m.best_epoch = doc.at("best_epoch").get<int>();
    f.config = doc.at("config");
    m.stats_fingerprint = std::stoull(doc.at("stats_fingerprint").get<std::string>(), nullptr, 16);
    f.graph_hash = std::stoull(doc.at("graph_hash").get<std::string>(), nullptr, 16);
    f.entity_ids = doc.at("entity_ids").get<std::vector<std::string>>();
    m.train_entities = doc.at("train_entities").get<std::vector<int>>();
    m.val_entities = doc.at("val_entities").get<std::vector<int>>();
    f.test_entities = doc.at("test_entities").get<std::vector<int>>();
    const int n = static_cast<int>(f.entity_ids.size());
    for (const auto* list : {&m.train_entities, &m.val_entities, &f.test_entities}) {
      for (int i : *list) {
        if (i < 0 || i >= n) throw contract_error("container", "model entity index out of range");
      }
    }
    if (m.params.w_out.size() != m.task.targets.size()) {
      throw contract_error("container", "model heads do not match its targets");
    }
    return f;
  } catch (const json::exception& e) {
    throw contract_error("container", std::string("malformed model container: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw contract_error("container", "malformed hash in model container");
  }
}

std::string metrics_to_csv(const std::vector<pipeline::MetricRow>& rows) {
  std::string out = "task,target,seed,metric,value\n";
  for (const auto& r : rows) {
    out += quote_csv(r.task) + "," + quote_csv(r.target) + "," + std::to_string(r.seed) + "," +
           quote_csv(r.metric) + "," + format_double(r.value) + "\n";
  }
  return out;
}

std::string losses_to_csv(const gcn::TrainedModel& m) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < m.train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(m.train_loss[e]) + "," +
           format_double(m.val_loss[e]) + "\n";
  }
  return out;
}

std::string predictions_to_csv(const std::vector<pipeline::TargetPrediction>& preds,
                               const embedding::EmbeddedTensor& x) {
  std::string out = "entity_id,feature,time,value\n";
  for (const auto& p : preds) {
    const std::string name = quote_csv(x.feature_names.at(static_cast<std::size_t>(p.feature)));
    if (p.kind == pipeline::TaskKind::classification) {
      const auto& labels = x.level_labels.at(static_cast<std::size_t>(p.feature));
      for (std::size_t r = 0; r < p.entities.size(); ++r) {
        out += quote_csv(x.entity_ids[p.entities[r]]) + "," + name + ",," +
               quote_csv(labels.at(static_cast<std::size_t>(p.levels[r]))) + "\n";
      }
      continue;
    }
    if (!x.basis) throw contract_error("io", "tensor has no basis");
    const auto grid = fda::QuadratureGrid::simpson(x.basis->domain());
    const Eigen::MatrixXd values = pipeline::curve_values(p.coeffs, *x.basis, grid);
    for (std::size_t r = 0; r < p.entities.size(); ++r) {
      const std::string id = quote_csv(x.entity_ids[p.entities[r]]);
      for (Eigen::Index a = 0; a < grid.size(); ++a) {
        out += id + "," + name + "," + format_double(grid.points[a]) + "," +
               format_double(values(static_cast<Eigen::Index>(r), a)) + "\n";
      }
    }
  }
  return out;
}

PredictionRows parse_predictions_csv(const std::string& text, const embedding::EmbeddedTensor& x) {
  const auto lines = csv_lines(text);
  expect_header(lines, "entity_id,feature,time,value", "predictions CSV");
  std::map<std::string, int> entity, feature;
  for (int i = 0; i < x.n(); ++i) entity[x.entity_ids[i]] = i;
  for (int j = 0; j < x.p(); ++j) feature[x.feature_names[j]] = j;

  std::map<int, std::map<int, std::vector<std::pair<double, double>>>> curves;
  std::map<int, std::map<int, int>> levels;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string where = "predictions line " + std::to_string(ln + 1);
    const auto fields = split_csv_line(lines[ln]);
    if (fields.size() != 4) throw contract_error("ingestion", where + ": expected 4 fields");
    const auto eit = entity.find(fields[0]);
    const auto fit = feature.find(fields[1]);
    if (eit == entity.end()) throw contract_error("ingestion", where + ": unknown entity '" + fields[0] + "'");
    if (fit == feature.end()) throw contract_error("ingestion", where + ": unknown feature '" + fields[1] + "'");
    const int j = fit->second;
    switch (x.modalities[j].kind) {
      case ModalityKind::categorical: {
        const auto& labels = x.level_labels[j];
        const auto lit = std::find(labels.begin(), labels.end(), fields[3]);
        if (lit == labels.end()) throw contract_error("ingestion", where + ": unknown level '" + fields[3] + "'");
        if (!levels[j].emplace(eit->second, static_cast<int>(lit - labels.begin())).second) {
          throw contract_error("ingestion", where + ": duplicate prediction");
        }
        break;
      }
      case ModalityKind::longitudinal:
        curves[j][eit->second].emplace_back(parse_double(fields[2], where), parse_double(fields[3], where));
        break;
      case ModalityKind::scalar:
        throw contract_error("ingestion", where + ": scalar targets are not supported");
    }
  }

  PredictionRows out;
  if (!curves.empty()) {
    if (!x.basis) throw contract_error("io", "tensor has no basis");
    const auto grid = fda::QuadratureGrid::simpson(x.basis->domain());
    for (auto& [j, per_entity] : curves) {
      std::vector<std::pair<int, std::vector<double>>> rows;
      for (auto& [i, pts] : per_entity) {
        std::sort(pts.begin(), pts.end());
        if (static_cast<Eigen::Index>(pts.size()) != grid.size()) {
          throw contract_error("ingestion", "prediction for entity '" + x.entity_ids[i] +
                                                "' must have one value per quadrature node");
        }
        std::vector<double> values;
        for (Eigen::Index a = 0; a < grid.size(); ++a) {
          if (std::abs(pts[a].first - grid.points[a]) > 1e-9 * std::max(1.0, std::abs(grid.points[a]))) {
            throw contract_error("ingestion", "prediction times do not match the quadrature nodes");
          }
          values.push_back(pts[a].second);
        }
        rows.emplace_back(i, std::move(values));
      }
      out.curves.emplace_back(j, std::move(rows));
    }
  }
  for (auto& [j, per_entity] : levels) {
    out.levels.emplace_back(j, std::vector<std::pair<int, int>>(per_entity.begin(), per_entity.end()));
  }
  return out;
}

std::vector<pipeline::MetricRow> score_predictions(const PredictionRows& rows,
                                                   const embedding::EmbeddedTensor& x,
                                                   const std::string& task, std::uint64_t seed) {
  std::vector<pipeline::MetricRow> out;
  for (const auto& [j, per_entity] : rows.curves) {
    const auto grid = fda::QuadratureGrid::simpson(x.basis->domain());
    std::vector<int> entities;
    Eigen::MatrixXd pred(static_cast<Eigen::Index>(per_entity.size()), grid.size());
    for (std::size_t r = 0; r < per_entity.size(); ++r) {
      entities.push_back(per_entity[r].first);
      pred.row(static_cast<Eigen::Index>(r)) =
          Eigen::Map<const Eigen::RowVectorXd>(per_entity[r].second.data(), grid.size());
    }
    const Eigen::MatrixXd truth = pipeline::curve_values(pipeline::true_coeffs(x, j, entities), *x.basis, grid);
    const auto s = decode::std_rmse_grid(truth, pred, grid);
    out.push_back({task, x.feature_names[j], seed, "std_rmse", s.value});
    out.push_back({task, x.feature_names[j], seed, "skipped", static_cast<double>(s.skipped)});
  }
  for (const auto& [j, per_entity] : rows.levels) {
    std::vector<int> entities, pred;
    for (auto [i, l] : per_entity) {
      entities.push_back(i);
      pred.push_back(l);
    }
    const std::vector<int> truth = pipeline::true_levels(x, j, entities);
    out.push_back({task, x.feature_names[j], seed, "accuracy", decode::accuracy(truth, pred)});
  }
  return out;
}

}  // namespace fungcn::io
