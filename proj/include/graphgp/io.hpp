#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "graphgp/dataset.hpp"
#include "graphgp/errors.hpp"
#include "graphgp/graph.hpp"
#include "graphgp/kernels.hpp"
#include "graphgp/matrix.hpp"

namespace graphgp {

// ---------------------------------------------------------------------------
// Output JSON document: insertion-ordered keys, floats at 17 significant
// digits, so repeated runs serialize byte-identically.
// ---------------------------------------------------------------------------

class JsonValue {
 public:
  JsonValue() : node_(nullptr) {}
  JsonValue(bool b) : node_(b) {}
  JsonValue(int v) : node_(static_cast<std::int64_t>(v)) {}
  JsonValue(std::int64_t v) : node_(v) {}
  JsonValue(std::uint64_t v) : node_(static_cast<std::int64_t>(v)) {}
  JsonValue(double v) : node_(v) {}
  JsonValue(const char* s) : node_(std::string(s)) {}
  JsonValue(std::string s) : node_(std::move(s)) {}

  static JsonValue object() {
    JsonValue v;
    v.node_ = Object{};
    return v;
  }
  static JsonValue array() {
    JsonValue v;
    v.node_ = Array{};
    return v;
  }
  static JsonValue array_of(const Vector& values) {
    JsonValue v = array();
    for (double x : values) v.push_back(JsonValue(x));
    return v;
  }
  static JsonValue array_of(const Matrix& m) {
    JsonValue rows = array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      JsonValue row = array();
      for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(JsonValue(m(i, j)));
      rows.push_back(std::move(row));
    }
    return rows;
  }

  JsonValue& operator[](const std::string& key) {
    auto& obj = std::get<Object>(node_);
    for (auto& [k, v] : obj)
      if (k == key) return v;
    obj.emplace_back(key, JsonValue());
    return obj.back().second;
  }

  void push_back(JsonValue v) { std::get<Array>(node_).push_back(std::move(v)); }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    if (indent >= 0) out.push_back('\n');
    return out;
  }

 private:
  struct Object;
  struct Array;
  using Node = std::variant<std::nullptr_t, bool, std::int64_t, double, std::string,
                            Array, Object>;
  struct Array : std::vector<JsonValue> {};
  struct Object : std::vector<std::pair<std::string, JsonValue>> {};

  static void write_escaped(std::string& out, const std::string& s) {
    out.push_back('"');
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out.push_back(c);
          }
      }
    }
    out.push_back('"');
  }

  void write(std::string& out, int indent, int depth) const {
    const std::string pad = indent >= 0 ? std::string(indent * (depth + 1), ' ') : "";
    const std::string close_pad = indent >= 0 ? std::string(indent * depth, ' ') : "";
    const char* nl = indent >= 0 ? "\n" : "";
    if (std::holds_alternative<std::nullptr_t>(node_)) {
      out += "null";
    } else if (const bool* b = std::get_if<bool>(&node_)) {
      out += *b ? "true" : "false";
    } else if (const std::int64_t* i = std::get_if<std::int64_t>(&node_)) {
      out += std::to_string(*i);
    } else if (const double* d = std::get_if<double>(&node_)) {
      if (std::isfinite(*d)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        out += buf;
      } else {
        out += "null";
      }
    } else if (const std::string* s = std::get_if<std::string>(&node_)) {
      write_escaped(out, *s);
    } else if (const Array* a = std::get_if<Array>(&node_)) {
      if (a->empty()) {
        out += "[]";
        return;
      }
      out += "[";
      for (std::size_t k = 0; k < a->size(); ++k) {
        out += nl;
        out += pad;
        (*a)[k].write(out, indent, depth + 1);
        if (k + 1 < a->size()) out += ",";
      }
      out += nl;
      out += close_pad;
      out += "]";
    } else if (const Object* o = std::get_if<Object>(&node_)) {
      if (o->empty()) {
        out += "{}";
        return;
      }
      out += "{";
      for (std::size_t k = 0; k < o->size(); ++k) {
        out += nl;
        out += pad;
        write_escaped(out, (*o)[k].first);
        out += indent >= 0 ? ": " : ":";
        (*o)[k].second.write(out, indent, depth + 1);
        if (k + 1 < o->size()) out += ",";
      }
      out += nl;
      out += close_pad;
      out += "}";
    }
  }

  Node node_;
};

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  out << contents;
}

// FNV-1a over raw bytes; used to tie trained models to their inputs.
inline std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& obj,
                                  std::initializer_list<const char*> allowed,
                                  const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ParseError(context + ": unknown field \"" + key + "\"");
  }
}

inline double require_number(const nlohmann::json& obj, const char* key,
                             const std::string& context) {
  if (!obj.contains(key) || !obj[key].is_number())
    throw ParseError(context + ": missing numeric field \"" + key + "\"");
  return obj[key].get<double>();
}

inline Vector number_array(const nlohmann::json& arr, const std::string& context) {
  if (!arr.is_array()) throw ParseError(context + ": expected an array of numbers");
  Vector out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw ParseError(context + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph JSON: {"num_vertices": M, "edges": [[i,j], ...], "weights": [...]}
// ---------------------------------------------------------------------------

inline Graph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("graph: expected a JSON object");
  detail::reject_unknown_fields(j, {"num_vertices", "edges", "weights"}, "graph");
  if (!j.contains("num_vertices") || !j["num_vertices"].is_number_unsigned())
    throw ParseError("graph: missing non-negative integer \"num_vertices\"");
  const std::size_t m = j["num_vertices"].get<std::size_t>();
  std::vector<Edge> edges;
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw ParseError("graph: \"edges\" must be an array");
    std::size_t index = 0;
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ParseError("graph: edge " + std::to_string(index) +
                         " must be a pair of integers");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
      ++index;
    }
  }
  Vector weights;
  if (j.contains("weights")) weights = detail::number_array(j["weights"], "graph weights");
  try {
    return Graph(m, std::move(edges), std::move(weights));
  } catch (const InputError& err) {
    throw ParseError(std::string("graph: ") + err.what());
  }
}

inline Graph read_graph_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("graph file " + path + ": " + e.what());
  }
  return graph_from_json(j);
}

inline JsonValue graph_to_json(const Graph& g) {
  JsonValue out = JsonValue::object();
  out["num_vertices"] = JsonValue(g.num_vertices());
  JsonValue edges = JsonValue::array();
  for (const auto& [i, j] : g.edges()) {
    JsonValue e = JsonValue::array();
    e.push_back(JsonValue(std::int64_t{i}));
    e.push_back(JsonValue(std::int64_t{j}));
    edges.push_back(std::move(e));
  }
  out["edges"] = std::move(edges);
  bool unit = true;
  for (double w : g.weights()) unit = unit && w == 1.0;
  if (!unit) out["weights"] = JsonValue::array_of(g.weights());
  return out;
}

// ---------------------------------------------------------------------------
// Kernel spec JSON
// ---------------------------------------------------------------------------

inline DataKernelSpec data_kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw ParseError("data kernel: expected an object with a \"family\" string");
  const std::string family = j["family"].get<std::string>();
  DataKernelSpec spec;
  if (family == "se") {
    detail::reject_unknown_fields(j, {"family", "v2", "ell"}, "data kernel (se)");
    spec.family = DataKernelFamily::SquaredExponential;
  } else if (family == "matern") {
    detail::reject_unknown_fields(j, {"family", "v2", "ell", "nu"}, "data kernel (matern)");
    spec.family = DataKernelFamily::Matern;
    spec.nu = detail::require_number(j, "nu", "data kernel (matern)");
  } else {
    throw ParseError("data kernel: unknown family \"" + family + "\"");
  }
  spec.v2 = detail::require_number(j, "v2", "data kernel");
  spec.ell = detail::require_number(j, "ell", "data kernel");
  spec.validate();
  return spec;
}

inline JsonValue data_kernel_to_json(const DataKernelSpec& spec) {
  JsonValue out = JsonValue::object();
  if (spec.family == DataKernelFamily::SquaredExponential) {
    out["family"] = JsonValue("se");
  } else {
    out["family"] = JsonValue("matern");
    out["nu"] = JsonValue(spec.nu);
  }
  out["v2"] = JsonValue(spec.v2);
  out["ell"] = JsonValue(spec.ell);
  return out;
}

inline GraphKernelSpec graph_kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw ParseError("graph kernel: expected an object with a \"family\" string");
  const std::string family = j["family"].get<std::string>();
  GraphKernelSpec spec;
  const std::string ctx = "graph kernel (" + family + ")";
  if (family == "laplacian") {
    detail::reject_unknown_fields(j, {"family"}, ctx);
    spec.family = GraphKernelFamily::Laplacian;
  } else if (family == "global_filtering") {
    detail::reject_unknown_fields(j, {"family", "alpha"}, ctx);
    spec.family = GraphKernelFamily::GlobalFiltering;
    spec.alpha = detail::require_number(j, "alpha", ctx);
  } else if (family == "local_averaging") {
    detail::reject_unknown_fields(j, {"family", "alpha"}, ctx);
    spec.family = GraphKernelFamily::LocalAveraging;
    spec.alpha = detail::require_number(j, "alpha", ctx);
  } else if (family == "regularized_laplacian") {
    detail::reject_unknown_fields(j, {"family", "alpha"}, ctx);
    spec.family = GraphKernelFamily::RegularizedLaplacian;
    spec.alpha = detail::require_number(j, "alpha", ctx);
  } else if (family == "diffusion") {
    detail::reject_unknown_fields(j, {"family", "alpha"}, ctx);
    spec.family = GraphKernelFamily::Diffusion;
    spec.alpha = detail::require_number(j, "alpha", ctx);
  } else if (family == "p_step_random_walk") {
    detail::reject_unknown_fields(j, {"family", "alpha", "p"}, ctx);
    spec.family = GraphKernelFamily::PStepRandomWalk;
    spec.alpha = detail::require_number(j, "alpha", ctx);
    spec.p = static_cast<int>(detail::require_number(j, "p", ctx));
  } else if (family == "cosine") {
    detail::reject_unknown_fields(j, {"family"}, ctx);
    spec.family = GraphKernelFamily::Cosine;
  } else if (family == "graph_matern") {
    detail::reject_unknown_fields(j, {"family", "alpha", "nu", "laplacian"}, ctx);
    spec.family = GraphKernelFamily::GraphMatern;
    spec.alpha = detail::require_number(j, "alpha", ctx);
    spec.nu = static_cast<int>(detail::require_number(j, "nu", ctx));
    if (j.contains("laplacian")) {
      const std::string lap = j["laplacian"].get<std::string>();
      if (lap == "unnormalized")
        spec.laplacian_choice = LaplacianChoice::Unnormalized;
      else if (lap == "normalized")
        spec.laplacian_choice = LaplacianChoice::Normalized;
      else
        throw ParseError(ctx + ": laplacian must be \"unnormalized\" or \"normalized\"");
    }
  } else if (family == "polynomial") {
    detail::reject_unknown_fields(j, {"family", "beta"}, ctx);
    spec.family = GraphKernelFamily::Polynomial;
    if (!j.contains("beta")) throw ParseError(ctx + ": missing \"beta\"");
    spec.beta = detail::number_array(j["beta"], ctx);
  } else if (family == "icm") {
    detail::reject_unknown_fields(j, {"family", "w", "kappa"}, ctx);
    spec.family = GraphKernelFamily::Icm;
    if (j.contains("w")) spec.w = detail::number_array(j["w"], ctx);
    if (j.contains("kappa")) spec.kappa = detail::number_array(j["kappa"], ctx);
  } else {
    throw ParseError("graph kernel: unknown family \"" + family + "\"");
  }
  return spec;
}

inline JsonValue graph_kernel_to_json(const GraphKernelSpec& spec) {
  JsonValue out = JsonValue::object();
  switch (spec.family) {
    case GraphKernelFamily::Laplacian:
      out["family"] = JsonValue("laplacian");
      break;
    case GraphKernelFamily::GlobalFiltering:
      out["family"] = JsonValue("global_filtering");
      out["alpha"] = JsonValue(spec.alpha);
      break;
    case GraphKernelFamily::LocalAveraging:
      out["family"] = JsonValue("local_averaging");
      out["alpha"] = JsonValue(spec.alpha);
      break;
    case GraphKernelFamily::RegularizedLaplacian:
      out["family"] = JsonValue("regularized_laplacian");
      out["alpha"] = JsonValue(spec.alpha);
      break;
    case GraphKernelFamily::Diffusion:
      out["family"] = JsonValue("diffusion");
      out["alpha"] = JsonValue(spec.alpha);
      break;
    case GraphKernelFamily::PStepRandomWalk:
      out["family"] = JsonValue("p_step_random_walk");
      out["alpha"] = JsonValue(spec.alpha);
      out["p"] = JsonValue(spec.p);
      break;
    case GraphKernelFamily::Cosine:
      out["family"] = JsonValue("cosine");
      break;
    case GraphKernelFamily::GraphMatern:
      out["family"] = JsonValue("graph_matern");
      out["alpha"] = JsonValue(spec.alpha);
      out["nu"] = JsonValue(spec.nu);
      out["laplacian"] = JsonValue(spec.laplacian_choice == LaplacianChoice::Normalized
                                       ? "normalized"
                                       : "unnormalized");
      break;
    case GraphKernelFamily::Polynomial:
      out["family"] = JsonValue("polynomial");
      out["beta"] = JsonValue::array_of(spec.beta);
      break;
    case GraphKernelFamily::Icm:
      out["family"] = JsonValue("icm");
      out["w"] = JsonValue::array_of(spec.w);
      out["kappa"] = JsonValue::array_of(spec.kappa);
      break;
  }
  return out;
}

inline MogpKernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variant") || !j["variant"].is_string())
    throw ParseError("kernel spec: expected an object with a \"variant\" string");
  const std::string variant = j["variant"].get<std::string>();
  MogpKernelSpec spec;
  if (variant == "sogp") {
    detail::reject_unknown_fields(j, {"variant", "data"}, "kernel spec (sogp)");
    spec.variant = MogpKernelSpec::Variant::SogpDiag;
    if (!j.contains("data")) throw ParseError("kernel spec (sogp): missing \"data\"");
    spec.data = data_kernel_from_json(j["data"]);
  } else if (variant == "separable") {
    detail::reject_unknown_fields(j, {"variant", "data", "graph"}, "kernel spec (separable)");
    spec.variant = MogpKernelSpec::Variant::Separable;
    if (!j.contains("data") || !j.contains("graph"))
      throw ParseError("kernel spec (separable): needs \"data\" and \"graph\"");
    spec.data = data_kernel_from_json(j["data"]);
    spec.graph = graph_kernel_from_json(j["graph"]);
  } else if (variant == "sos") {
    detail::reject_unknown_fields(j, {"variant", "terms"}, "kernel spec (sos)");
    spec.variant = MogpKernelSpec::Variant::SumOfSeparable;
    if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty())
      throw ParseError("kernel spec (sos): needs a non-empty \"terms\" array");
    for (const auto& t : j["terms"]) {
      detail::reject_unknown_fields(t, {"data", "graph"}, "kernel spec (sos term)");
      if (!t.contains("data") || !t.contains("graph"))
        throw ParseError("kernel spec (sos term): needs \"data\" and \"graph\"");
      spec.terms.push_back({data_kernel_from_json(t["data"]),
                            graph_kernel_from_json(t["graph"])});
    }
  } else if (variant == "graph_pc") {
    detail::reject_unknown_fields(j, {"variant", "v", "ell", "graph1", "graph2"},
                                  "kernel spec (graph_pc)");
    spec.variant = MogpKernelSpec::Variant::GraphPc;
    spec.pc.v = detail::require_number(j, "v", "kernel spec (graph_pc)");
    spec.pc.ell = detail::require_number(j, "ell", "kernel spec (graph_pc)");
    if (!j.contains("graph1") || !j.contains("graph2"))
      throw ParseError("kernel spec (graph_pc): needs \"graph1\" and \"graph2\"");
    spec.pc.graph1 = graph_kernel_from_json(j["graph1"]);
    if (j["graph2"].is_string() && j["graph2"].get<std::string>() == "degrees")
      spec.pc.degree_based = true;
    else
      spec.pc.graph2 = graph_kernel_from_json(j["graph2"]);
  } else {
    throw ParseError("kernel spec: unknown variant \"" + variant + "\"");
  }
  return spec;
}

inline MogpKernelSpec read_kernel_spec_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("kernel file " + path + ": " + e.what());
  }
  return kernel_spec_from_json(j);
}

inline JsonValue kernel_spec_to_json(const MogpKernelSpec& spec) {
  JsonValue out = JsonValue::object();
  switch (spec.variant) {
    case MogpKernelSpec::Variant::SogpDiag:
      out["variant"] = JsonValue("sogp");
      out["data"] = data_kernel_to_json(spec.data);
      break;
    case MogpKernelSpec::Variant::Separable:
      out["variant"] = JsonValue("separable");
      out["data"] = data_kernel_to_json(spec.data);
      out["graph"] = graph_kernel_to_json(spec.graph);
      break;
    case MogpKernelSpec::Variant::SumOfSeparable: {
      out["variant"] = JsonValue("sos");
      JsonValue terms = JsonValue::array();
      for (const auto& t : spec.terms) {
        JsonValue term = JsonValue::object();
        term["data"] = data_kernel_to_json(t.data);
        term["graph"] = graph_kernel_to_json(t.graph);
        terms.push_back(std::move(term));
      }
      out["terms"] = std::move(terms);
      break;
    }
    case MogpKernelSpec::Variant::GraphPc:
      out["variant"] = JsonValue("graph_pc");
      out["v"] = JsonValue(spec.pc.v);
      out["ell"] = JsonValue(spec.pc.ell);
      out["graph1"] = graph_kernel_to_json(spec.pc.graph1);
      if (spec.pc.degree_based)
        out["graph2"] = JsonValue("degrees");
      else
        out["graph2"] = graph_kernel_to_json(spec.pc.graph2);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header "vertex,x0,...,x{D-1},y", one observation per row.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct CsvRows {
  std::size_t input_dim = 0;
  bool has_outputs = false;
  std::vector<int> vertex;
  std::vector<Vector> x;
  Vector y;
};

inline CsvRows parse_dataset_csv(const std::string& text, const std::string& context) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(context + ": empty file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "vertex")
    throw ParseError(context + ": header must start with \"vertex\"");
  CsvRows rows;
  rows.has_outputs = header.back() == "y";
  rows.input_dim = header.size() - 1 - (rows.has_outputs ? 1 : 0);
  for (std::size_t d = 0; d < rows.input_dim; ++d)
    if (header[1 + d] != "x" + std::to_string(d))
      throw ParseError(context + ": expected column \"x" + std::to_string(d) + "\"");
  if (rows.input_dim == 0) throw ParseError(context + ": no input columns");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       " has the wrong field count");
    try {
      std::size_t pos = 0;
      rows.vertex.push_back(std::stoi(fields[0], &pos));
      Vector xi(rows.input_dim);
      for (std::size_t d = 0; d < rows.input_dim; ++d) xi[d] = std::stod(fields[1 + d]);
      rows.x.push_back(std::move(xi));
      if (rows.has_outputs) rows.y.push_back(std::stod(fields.back()));
    } catch (const std::exception&) {
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       " has a malformed number");
    }
    if (rows.vertex.back() < 0)
      throw ParseError(context + ": line " + std::to_string(line_no) +
                       " has a negative vertex id");
  }
  if (rows.vertex.empty()) throw ParseError(context + ": no data rows");
  return rows;
}

}  // namespace detail

inline MultiDataset dataset_from_csv(const std::string& text, std::size_t num_vertices,
                                     const std::string& context = "dataset") {
  const auto rows = detail::parse_dataset_csv(text, context);
  if (!rows.has_outputs) throw ParseError(context + ": missing \"y\" column");
  std::vector<VertexBlock> blocks(num_vertices);
  std::vector<std::vector<std::size_t>> per_vertex(num_vertices);
  for (std::size_t r = 0; r < rows.vertex.size(); ++r) {
    if (static_cast<std::size_t>(rows.vertex[r]) >= num_vertices)
      throw ParseError(context + ": vertex id " + std::to_string(rows.vertex[r]) +
                       " exceeds the graph size");
    per_vertex[rows.vertex[r]].push_back(r);
  }
  for (std::size_t m = 0; m < num_vertices; ++m) {
    const auto& idx = per_vertex[m];
    Matrix x(idx.size(), rows.input_dim);
    Vector y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t d = 0; d < rows.input_dim; ++d) x(i, d) = rows.x[idx[i]][d];
      y[i] = rows.y[idx[i]];
    }
    blocks[m] = VertexBlock{std::move(x), std::move(y)};
  }
  return MultiDataset(std::move(blocks));
}

inline MultiDataset read_dataset_csv(const std::string& path, std::size_t num_vertices) {
  return dataset_from_csv(read_file(path), num_vertices, "dataset " + path);
}

// Query CSV may omit the y column; when present the outputs come back as
// vertex-major truths.
inline TestQuery query_from_csv(const std::string& text, std::size_t num_vertices,
                                Vector* truths, const std::string& context = "query") {
  const auto rows = detail::parse_dataset_csv(text, context);
  std::vector<std::vector<std::size_t>> per_vertex(num_vertices);
  for (std::size_t r = 0; r < rows.vertex.size(); ++r) {
    if (static_cast<std::size_t>(rows.vertex[r]) >= num_vertices)
      throw ParseError(context + ": vertex id " + std::to_string(rows.vertex[r]) +
                       " exceeds the graph size");
    per_vertex[rows.vertex[r]].push_back(r);
  }
  std::vector<int> vertices;
  std::vector<Matrix> inputs;
  if (truths) truths->clear();
  for (std::size_t m = 0; m < num_vertices; ++m) {
    const auto& idx = per_vertex[m];
    if (idx.empty()) continue;
    Matrix x(idx.size(), rows.input_dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t d = 0; d < rows.input_dim; ++d) x(i, d) = rows.x[idx[i]][d];
      if (truths && rows.has_outputs) truths->push_back(rows.y[idx[i]]);
    }
    vertices.push_back(static_cast<int>(m));
    inputs.push_back(std::move(x));
  }
  if (truths && !rows.has_outputs)
    throw ParseError(context + ": missing \"y\" column with truth values");
  return TestQuery(std::move(vertices), std::move(inputs));
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string dataset_to_csv(const MultiDataset& data) {
  std::string out = "vertex";
  for (std::size_t d = 0; d < data.input_dim(); ++d) out += ",x" + std::to_string(d);
  out += ",y\n";
  for (std::size_t m = 0; m < data.num_vertices(); ++m) {
    const auto& b = data.block(m);
    for (std::size_t i = 0; i < b.size(); ++i) {
      out += std::to_string(m);
      for (std::size_t d = 0; d < data.input_dim(); ++d)
        out += "," + format_double(b.inputs(i, d));
      out += "," + format_double(b.outputs[i]) + "\n";
    }
  }
  return out;
}

inline std::string query_to_csv(const TestQuery& q, const Vector* truths) {
  std::string out = "vertex";
  for (std::size_t d = 0; d < q.input_dim(); ++d) out += ",x" + std::to_string(d);
  if (truths) out += ",y";
  out += "\n";
  std::size_t row = 0;
  for (std::size_t k = 0; k < q.vertices.size(); ++k) {
    for (std::size_t i = 0; i < q.inputs[k].rows(); ++i) {
      out += std::to_string(q.vertices[k]);
      for (std::size_t d = 0; d < q.input_dim(); ++d)
        out += "," + format_double(q.inputs[k](i, d));
      if (truths) out += "," + format_double((*truths)[row]);
      out += "\n";
      ++row;
    }
  }
  return out;
}

}  // namespace graphgp
