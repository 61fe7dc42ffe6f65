#include <sstream>

#include "inet/csv.hpp"
#include "inet/trees.hpp"

namespace inet {

namespace {

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.emplace_back();
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.back().push_back(m(r, c));
  }
  return out;
}

Matrix matrix_of(const nlohmann::json& doc, Eigen::Index cols, const char* field) {
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != cols) {
      throw DataError(std::string("tree json: ragged '") + field + "'");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return m;
}

Vector vector_of(const nlohmann::json& doc) {
  const auto v = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> std_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string leaf_label(double p) {
  return "p=" + fmt(p) + "\\nclass " + (p >= 0.5 ? "1" : "0");
}

}  // namespace

nlohmann::json tree_to_json(const TreeModel& tree) {
  nlohmann::json doc = {{"format_version", kTreeFormatVersion},
                        {"family", to_string(family_of(tree))}};
  if (const auto* t = std::get_if<StandardTree>(&tree)) {
    doc["depth"] = t->depth;
    doc["n"] = t->n;
    doc["features"] = t->features;
    doc["splits"] = t->splits;
    doc["leaf_probs"] = t->leaf_probs;
  } else if (const auto* s = std::get_if<SoftTree>(&tree)) {
    doc["depth"] = s->depth;
    doc["n"] = s->n;
    doc["filters"] = rows_of(s->filters);
    doc["biases"] = std_vector(s->biases);
    doc["leaf_logits"] = rows_of(s->leaf_logits);
  } else {
    const auto& u = std::get<UnivariateSoftTree>(tree);
    doc["depth"] = u.depth;
    doc["n"] = u.n;
    doc["features"] = u.features;
    doc["filter_values"] = std_vector(u.filter_values);
    doc["biases"] = std_vector(u.biases);
    doc["leaf_logits"] = rows_of(u.leaf_logits);
  }
  return doc;
}

TreeModel tree_from_json(const nlohmann::json& doc) {
  if (doc.value("format_version", 0) != kTreeFormatVersion) {
    throw ConfigError("tree json: unsupported or missing format_version");
  }
  const TreeFamily family = family_from_string(doc.at("family").get<std::string>());
  const int depth = doc.at("depth").get<int>();
  const auto n = doc.at("n").get<Eigen::Index>();
  switch (family) {
    case TreeFamily::standard_dt: {
      StandardTree t;
      t.depth = depth;
      t.n = n;
      t.features = doc.at("features").get<std::vector<Eigen::Index>>();
      t.splits = doc.at("splits").get<std::vector<double>>();
      t.leaf_probs = doc.at("leaf_probs").get<std::vector<double>>();
      t.validate();
      return t;
    }
    case TreeFamily::standard_sdt: {
      SoftTree t;
      t.depth = depth;
      t.n = n;
      t.filters = matrix_of(doc.at("filters"), n, "filters");
      t.biases = vector_of(doc.at("biases"));
      t.leaf_logits = matrix_of(doc.at("leaf_logits"), 2, "leaf_logits");
      t.validate();
      return t;
    }
    case TreeFamily::univariate_sdt: {
      UnivariateSoftTree t;
      t.depth = depth;
      t.n = n;
      t.features = doc.at("features").get<std::vector<Eigen::Index>>();
      t.filter_values = vector_of(doc.at("filter_values"));
      t.biases = vector_of(doc.at("biases"));
      t.leaf_logits = matrix_of(doc.at("leaf_logits"), 2, "leaf_logits");
      t.validate();
      return t;
    }
  }
  throw ConfigError("tree json: unknown family");
}

std::string to_dot(const TreeModel& tree) {
  const int depth = std::visit([](const auto& t) { return t.depth; }, tree);
  const std::size_t internal = internal_count(depth);
  const std::size_t total = internal + leaf_count(depth);
  const bool standard = std::holds_alternative<StandardTree>(tree);
  std::ostringstream out;
  out << "digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t k = 0; k < total; ++k) {
    std::string label;
    std::string shape;
    if (k < internal) {
      if (const auto* t = std::get_if<StandardTree>(&tree)) {
        label = "f" + std::to_string(t->features[k]) + " < " + fmt(t->splits[k]);
      } else if (const auto* s = std::get_if<SoftTree>(&tree)) {
        const auto j = static_cast<Eigen::Index>(k);
        label = "w=[";
        for (Eigen::Index i = 0; i < s->n; ++i) label += (i ? ", " : "") + fmt(s->filters(j, i));
        label += "]\\nb=" + fmt(s->biases[j]);
      } else {
        const auto& u = std::get<UnivariateSoftTree>(tree);
        const auto j = static_cast<Eigen::Index>(k);
        label = "f" + std::to_string(u.features[k]) + ": w=" + fmt(u.filter_values[j]) +
                "\\nb=" + fmt(u.biases[j]);
      }
    } else {
      const std::size_t l = k - internal;
      double p = 0.0;
      if (const auto* t = std::get_if<StandardTree>(&tree)) {
        p = t->leaf_probs[l];
      } else {
        const Matrix& logits = std::holds_alternative<SoftTree>(tree)
                                   ? std::get<SoftTree>(tree).leaf_logits
                                   : std::get<UnivariateSoftTree>(tree).leaf_logits;
        p = leaf_class1(logits(static_cast<Eigen::Index>(l), 0), logits(static_cast<Eigen::Index>(l), 1));
      }
      label = leaf_label(p);
      shape = ", shape=ellipse";
    }
    out << "  n" << k << " [label=\"" << label << "\"" << shape << "];\n";
  }
  for (std::size_t j = 0; j < internal; ++j) {
    out << "  n" << j << " -> n" << 2 * j + 1 << " [label=\"" << (standard ? "true" : "left")
        << "\"];\n";
    out << "  n" << j << " -> n" << 2 * j + 2 << " [label=\"" << (standard ? "false" : "right")
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace inet
