#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/eval.hpp"
#include "zsldict/inference.hpp"
#include "zsldict/matrix.hpp"

namespace zsldict::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view model_format_version = "tstd-model/1";

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::invalid_input, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::invalid_input, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  require(out.good(), ErrorKind::invalid_input, "write to '" + path.string() + "' failed");
}

// ---- DMAT ----

inline std::string format_dmat(const DenseMatrix& m) {
  std::string out = "dmat " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ' ';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline DenseMatrix parse_dmat(std::string_view text, const std::string& source) {
  auto bad = [&](std::size_t line, const std::string& what) {
    fail(ErrorKind::invalid_input, source + ":" + std::to_string(line) + ": " + what);
  };
  std::vector<std::vector<std::string_view>> rows;
  Index n_rows = -1;
  Index n_cols = -1;
  std::size_t line_no = 0;
  std::size_t header_line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (n_rows < 0) {
      header_line = line_no;
      if (tokens.size() != 3 || tokens[0] != "dmat") bad(line_no, "expected header 'dmat <rows> <cols>'");
      auto parse_count = [&](std::string_view t) {
        Index v = 0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size() || v < 1) bad(line_no, "invalid dimension '" + std::string(t) + "'");
        return v;
      };
      n_rows = parse_count(tokens[1]);
      n_cols = parse_count(tokens[2]);
      continue;
    }
    if (static_cast<Index>(tokens.size()) != n_cols)
      bad(line_no, "expected " + std::to_string(n_cols) + " values, found " + std::to_string(tokens.size()));
    rows.push_back(std::move(tokens));
    if (static_cast<Index>(rows.size()) > n_rows) bad(line_no, "more rows than the header declares");
  }
  if (n_rows < 0) fail(ErrorKind::invalid_input, source + ": missing 'dmat' header");
  if (static_cast<Index>(rows.size()) != n_rows)
    bad(header_line, "header declares " + std::to_string(n_rows) + " rows, found " + std::to_string(rows.size()));

  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(n_rows * n_cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto t : rows[r]) {
      if (!t.empty() && t.front() == '+') t.remove_prefix(1);
      double v = 0.0;
      const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
        fail(ErrorKind::invalid_input, source + ": row " + std::to_string(r) + ": invalid value '" + std::string(t) + "'");
      data.push_back(v);
    }
  }
  return DenseMatrix(n_rows, n_cols, std::move(data));
}

inline DenseMatrix read_dmat(const fs::path& path) { return parse_dmat(read_text(path), path.string()); }

inline void write_dmat(const fs::path& path, const DenseMatrix& m) { write_text(path, format_dmat(m)); }

// Non-empty lines with surrounding whitespace trimmed.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

inline void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(path, text);
}

inline json parse_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_input, path.string() + ": invalid JSON: " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- dataset manifests ----

struct Manifest {
  fs::path features;
  std::optional<fs::path> labels;
  fs::path embeddings;
  std::vector<std::string> classes;
};

inline Manifest read_manifest(const fs::path& path) {
  const json j = parse_json(path);
  const std::string src = path.string();
  require(j.is_object(), ErrorKind::invalid_input, src + ": manifest must be a JSON object");
  static const std::set<std::string> known{"features", "labels", "embeddings", "classes"};
  for (const auto& [key, _] : j.items())
    require(known.count(key) > 0, ErrorKind::invalid_input, src + ": unknown manifest key '" + key + "'");
  const fs::path base = path.parent_path();
  auto path_key = [&](const char* key) {
    require(j.contains(key), ErrorKind::invalid_input, src + ": missing manifest key '" + std::string(key) + "'");
    require(j[key].is_string(), ErrorKind::invalid_input, src + ": manifest key '" + std::string(key) + "' must be a path string");
    const fs::path p = j[key].get<std::string>();
    const fs::path resolved = p.is_absolute() ? p : base / p;
    require(fs::is_regular_file(resolved), ErrorKind::invalid_input,
            src + ": manifest key '" + std::string(key) + "' names missing file '" + resolved.string() + "'");
    return resolved;
  };
  Manifest m;
  m.features = path_key("features");
  m.embeddings = path_key("embeddings");
  if (j.contains("labels")) m.labels = path_key("labels");
  require(j.contains("classes"), ErrorKind::invalid_input, src + ": missing manifest key 'classes'");
  require(j["classes"].is_array() && !j["classes"].empty(), ErrorKind::invalid_input,
          src + ": manifest key 'classes' must be a non-empty list of names");
  for (const auto& c : j["classes"]) {
    require(c.is_string(), ErrorKind::invalid_input, src + ": class names must be strings");
    m.classes.push_back(c.get<std::string>());
  }
  std::set<std::string> unique(m.classes.begin(), m.classes.end());
  require(unique.size() == m.classes.size(), ErrorKind::invalid_input, src + ": duplicate class names in 'classes'");
  return m;
}

inline std::vector<int> labels_to_indices(const std::vector<std::string>& names,
                                          const std::vector<std::string>& classes,
                                          const std::string& source) {
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index[classes[c]] = static_cast<int>(c);
  std::vector<int> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = index.find(names[i]);
    require(it != index.end(), ErrorKind::invalid_input,
            source + ": line " + std::to_string(i + 1) + ": unknown class '" + names[i] + "'");
    out.push_back(it->second);
  }
  return out;
}

inline DenseMatrix maybe_normalize(DenseMatrix x, bool normalize) {
  return normalize ? l2_normalize_columns(x) : x;
}

inline SeenDataset load_seen(const fs::path& manifest_path, bool normalize = false) {
  const Manifest m = read_manifest(manifest_path);
  require(m.labels.has_value(), ErrorKind::invalid_input,
          manifest_path.string() + ": missing manifest key 'labels' (required for seen data)");
  DenseMatrix x = maybe_normalize(read_dmat(m.features), normalize);
  DenseMatrix a = read_dmat(m.embeddings);
  const auto names = read_lines(*m.labels);
  const auto labels = labels_to_indices(names, m.classes, m.labels->string());
  require(static_cast<Index>(labels.size()) == x.cols(), ErrorKind::dimension_mismatch,
          "instance count m: features have " + std::to_string(x.cols()) + " columns, labels file has " +
              std::to_string(labels.size()) + " entries");
  require(a.cols() == static_cast<Index>(m.classes.size()), ErrorKind::dimension_mismatch,
          "class count M: embeddings have " + std::to_string(a.cols()) + " columns, manifest lists " +
              std::to_string(m.classes.size()) + " classes");
  SeenDataset ds{std::move(x), one_hot_pm(labels, a.cols()), std::move(a), m.classes};
  require_valid(ds);
  return ds;
}

inline UnseenDataset load_unseen(const fs::path& manifest_path, bool normalize = false) {
  const Manifest m = read_manifest(manifest_path);
  DenseMatrix x = maybe_normalize(read_dmat(m.features), normalize);
  DenseMatrix a = read_dmat(m.embeddings);
  require(a.cols() == static_cast<Index>(m.classes.size()), ErrorKind::dimension_mismatch,
          "class count N: embeddings have " + std::to_string(a.cols()) + " columns, manifest lists " +
              std::to_string(m.classes.size()) + " classes");
  std::optional<std::vector<int>> truth;
  if (m.labels) {
    truth = labels_to_indices(read_lines(*m.labels), m.classes, m.labels->string());
    require(static_cast<Index>(truth->size()) == x.cols(), ErrorKind::dimension_mismatch,
            "instance count n: features have " + std::to_string(x.cols()) + " columns, labels file has " +
                std::to_string(truth->size()) + " entries");
  }
  return UnseenDataset{std::move(x), std::move(a), m.classes, std::move(truth)};
}

// Writes features.dmat, embeddings.dmat, labels.txt (when labels are given) and
// manifest.json into dir.
inline void write_dataset(const fs::path& dir, const DenseMatrix& x, const DenseMatrix& emb,
                          const std::vector<std::string>& classes, const std::vector<int>* labels) {
  write_dmat(dir / "features.dmat", x);
  write_dmat(dir / "embeddings.dmat", emb);
  json j{{"features", "features.dmat"}, {"embeddings", "embeddings.dmat"}, {"classes", classes}};
  if (labels) {
    std::vector<std::string> names;
    for (int c : *labels) names.push_back(classes[static_cast<std::size_t>(c)]);
    write_lines(dir / "labels.txt", names);
    j["labels"] = "labels.txt";
  }
  write_json(dir / "manifest.json", j);
}

// ---- hyperparameters and models ----

inline json to_json(const Hyperparams& h) {
  return json{{"alpha", h.alpha},
              {"beta", h.beta},
              {"lambda", h.lambda},
              {"mu", h.mu},
              {"latent_dim", h.latent_dim},
              {"ridge_eps", h.ridge_eps},
              {"max_outer_iters", h.max_outer_iters},
              {"outer_tol", h.outer_tol},
              {"admm", {{"rho", h.admm.rho}, {"tol", h.admm.tol}, {"max_iters", h.admm.max_iters}}}};
}

// Reads the keys present in j over h; unknown keys are rejected.
inline Hyperparams hyperparams_from_json(const json& j, Hyperparams h, const std::string& source) {
  require(j.is_object(), ErrorKind::invalid_input, source + ": hyperparameters must be a JSON object");
  auto num = [&](const json& v, const std::string& key) {
    require(v.is_number(), ErrorKind::invalid_input, source + ": '" + key + "' must be a number");
    return v.get<double>();
  };
  auto count = [&](const json& v, const std::string& key) {
    require(v.is_number_integer(), ErrorKind::invalid_input, source + ": '" + key + "' must be an integer");
    return v.get<long long>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "alpha") h.alpha = num(v, key);
    else if (key == "beta") h.beta = num(v, key);
    else if (key == "lambda") h.lambda = num(v, key);
    else if (key == "mu") h.mu = num(v, key);
    else if (key == "latent_dim") h.latent_dim = static_cast<Index>(count(v, key));
    else if (key == "ridge_eps") h.ridge_eps = num(v, key);
    else if (key == "max_outer_iters") h.max_outer_iters = static_cast<int>(count(v, key));
    else if (key == "outer_tol") h.outer_tol = num(v, key);
    else if (key == "admm") {
      require(v.is_object(), ErrorKind::invalid_input, source + ": 'admm' must be an object");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "rho") h.admm.rho = num(v2, "admm." + k2);
        else if (k2 == "tol") h.admm.tol = num(v2, "admm." + k2);
        else if (k2 == "max_iters") h.admm.max_iters = static_cast<int>(count(v2, "admm." + k2));
        else fail(ErrorKind::invalid_input, source + ": unknown key 'admm." + k2 + "'");
      }
    } else {
      fail(ErrorKind::invalid_input, source + ": unknown key '" + key + "'");
    }
  }
  return h;
}

struct SavedModel {
  JedmModel model;
  std::vector<std::string> seen_classes;
};

inline void save_model(const fs::path& dir, const JedmModel& m, const std::vector<std::string>& seen_classes) {
  write_dmat(dir / "D_s.dmat", m.dictionary);
  write_dmat(dir / "V.dmat", m.compat);
  const json j{{"format_version", model_format_version},
               {"hyperparams", to_json(m.hyper)},
               {"seed", m.seed},
               {"feature_dim", m.feature_dim()},
               {"latent_dim", m.latent_dim()},
               {"embedding_dim", m.embedding_dim()},
               {"converged", m.converged},
               {"objective_trace", m.objective_trace},
               {"seen_classes", seen_classes}};
  write_json(dir / "model.json", j);
}

inline SavedModel load_model(const fs::path& dir) {
  const fs::path meta = dir / "model.json";
  require(fs::is_regular_file(meta), ErrorKind::invalid_input,
          "model directory '" + dir.string() + "' has no model.json");
  const json j = parse_json(meta);
  const std::string src = meta.string();
  require(j.is_object() && j.contains("format_version") && j["format_version"] == model_format_version,
          ErrorKind::invalid_input, src + ": format_version must be '" + std::string(model_format_version) + "'");
  SavedModel out{JedmModel{read_dmat(dir / "D_s.dmat"), read_dmat(dir / "V.dmat"), {}, 0, {}, false}, {}};
  try {
    out.model.hyper = hyperparams_from_json(j.at("hyperparams"), Hyperparams{}, src);
    out.model.seed = j.at("seed").get<std::uint64_t>();
    out.model.converged = j.at("converged").get<bool>();
    out.model.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    out.seen_classes = j.at("seen_classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, src + ": " + e.what());
  }
  require(out.model.dictionary.cols() == out.model.compat.rows(), ErrorKind::dimension_mismatch,
          "latent dimension d: D_s.dmat has " + std::to_string(out.model.dictionary.cols()) +
              " columns but V.dmat has " + std::to_string(out.model.compat.rows()) + " rows");
  return out;
}

// ---- reports ----

inline json to_json(const EvalReport& r, const std::vector<std::string>& classes) {
  json per_class = json::array();
  for (const auto& c : r.per_class_accuracy)
    per_class.push_back({{"class", classes[static_cast<std::size_t>(c.label)]},
                         {"count", c.count},
                         {"correct", c.correct},
                         {"accuracy", c.accuracy}});
  return json{{"mean_per_class_accuracy", r.mean_per_class_accuracy},
              {"n_instances", r.n_instances},
              {"per_class_accuracy", per_class}};
}

inline std::string format_report(const EvalReport& r, const std::vector<std::string>& classes) {
  std::size_t width = 5;
  for (const auto& c : r.per_class_accuracy)
    width = std::max(width, classes[static_cast<std::size_t>(c.label)].size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "class" << "  " << std::right << std::setw(7)
      << "count" << "  " << std::setw(7) << "correct" << "  " << std::setw(8) << "accuracy\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& c : r.per_class_accuracy) {
    out << std::left << std::setw(static_cast<int>(width)) << classes[static_cast<std::size_t>(c.label)] << "  "
        << std::right << std::setw(7) << c.count << "  " << std::setw(7) << c.correct << "  " << std::setw(8)
        << c.accuracy << "\n";
  }
  out << "mean per-class top-1 accuracy: " << r.mean_per_class_accuracy << " over "
      << r.per_class_accuracy.size() << " classes, " << r.n_instances << " instances\n";
  return out.str();
}

}  // namespace zsldict::io
