#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "zsldict/errors.hpp"
#include "zsldict/matrix.hpp"

namespace zsldict {

// Labeled seen-class data.
//   features:    p x m, one instance per column
//   targets:     m x M, +1 at the true class and -1 elsewhere
//   embeddings:  q x M, one label embedding per seen class
struct SeenDataset {
  DenseMatrix features;
  DenseMatrix targets;
  DenseMatrix embeddings;
  std::vector<std::string> class_names;

  Index feature_dim() const { return features.rows(); }
  Index num_instances() const { return features.cols(); }
  Index num_classes() const { return embeddings.cols(); }
};

// Unseen-class data. truth_labels is for evaluation only; nothing in training
// or transduction reads it.
struct UnseenDataset {
  DenseMatrix features;    // p x n
  DenseMatrix embeddings;  // q x N
  std::vector<std::string> class_names;
  std::optional<std::vector<int>> truth_labels;

  Index num_instances() const { return features.cols(); }
  Index num_classes() const { return embeddings.cols(); }
};

struct AdmmOptions {
  double rho = 0.5;  // multiplier of the mean eigenvalue of C C^T
  double tol = 1e-6;
  int max_iters = 100;

  friend bool operator==(const AdmmOptions&, const AdmmOptions&) = default;
};

struct Hyperparams {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 1.0;
  double mu = 1.0;
  Index latent_dim = 0;  // 0 resolves to min(p, m) at training time
  double ridge_eps = 1e-8;
  int max_outer_iters = 100;
  double outer_tol = 1e-5;
  AdmmOptions admm;

  double gamma() const { return beta / alpha; }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline void validate(const Hyperparams& h) {
  auto positive = [](double v, const char* name) {
    require(std::isfinite(v) && v > 0.0, ErrorKind::invalid_input,
            std::string(name) + " must be finite and > 0, got " + std::to_string(v));
  };
  positive(h.alpha, "alpha");
  positive(h.beta, "beta");
  positive(h.lambda, "lambda");
  positive(h.mu, "mu");
  positive(h.ridge_eps, "ridge_eps");
  positive(h.outer_tol, "outer_tol");
  positive(h.admm.rho, "admm rho");
  positive(h.admm.tol, "admm tol");
  require(h.latent_dim >= 0, ErrorKind::invalid_input, "latent_dim must be >= 1 (or 0 for auto)");
  require(h.max_outer_iters >= 1, ErrorKind::invalid_input, "max_outer_iters must be >= 1");
  require(h.admm.max_iters >= 1, ErrorKind::invalid_input, "admm max_iters must be >= 1");
  require(std::isfinite(h.gamma()) && h.gamma() > 0.0, ErrorKind::invalid_input,
          "beta/alpha must be finite and positive");
}

// A trained joint embedding dictionary model.
struct JedmModel {
  DenseMatrix dictionary;  // p x d, every column inside the unit ball
  DenseMatrix compat;      // d x q
  Hyperparams hyper;
  std::uint64_t seed = 0;
  std::vector<double> objective_trace;  // one entry per outer iteration
  bool converged = false;

  Index feature_dim() const { return dictionary.rows(); }
  Index latent_dim() const { return dictionary.cols(); }
  Index embedding_dim() const { return compat.cols(); }
};

// Builds the {-1,+1} target matrix: row i is +1 at column labels[i].
inline DenseMatrix one_hot_pm(std::span<const int> labels, Index num_classes) {
  require(!labels.empty(), ErrorKind::invalid_input, "label list is empty");
  require(num_classes >= 1, ErrorKind::invalid_input, "number of classes must be >= 1");
  RowMatrix y = RowMatrix::Constant(static_cast<Index>(labels.size()), num_classes, -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) {
      fail(ErrorKind::invalid_input, "label " + std::to_string(c) + " >= M=" +
                                         std::to_string(num_classes) + " at position " +
                                         std::to_string(i));
    }
    y(static_cast<Index>(i), c) = 1.0;
  }
  return DenseMatrix(y);
}

// Index of the +1 entry in each target row. Assumes a validated dataset.
inline std::vector<int> labels_from_targets(const DenseMatrix& targets) {
  std::vector<int> out(static_cast<std::size_t>(targets.rows()));
  for (Index i = 0; i < targets.rows(); ++i) {
    Index best = 0;
    targets.mat().row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// Every invariant violation of a seen dataset, human-readable. Empty means valid.
inline std::vector<std::string> validate_seen(const SeenDataset& ds) {
  std::vector<std::string> issues;
  const auto& y = ds.targets.mat();
  if (ds.features.cols() != ds.targets.rows()) {
    issues.push_back("shape mismatch: features have " + std::to_string(ds.features.cols()) +
                     " instances (columns) but targets have " + std::to_string(ds.targets.rows()) +
                     " rows");
  }
  if (ds.embeddings.cols() != ds.targets.cols()) {
    issues.push_back("shape mismatch: embeddings have " + std::to_string(ds.embeddings.cols()) +
                     " columns but targets have " + std::to_string(ds.targets.cols()) + " classes");
  }
  if (static_cast<Index>(ds.class_names.size()) != ds.embeddings.cols()) {
    issues.push_back("class name count " + std::to_string(ds.class_names.size()) +
                     " does not match embedding columns " + std::to_string(ds.embeddings.cols()));
  }
  std::unordered_set<std::string> seen_names;
  for (const auto& name : ds.class_names) {
    if (!seen_names.insert(name).second) issues.push_back("duplicate class name '" + name + "'");
  }
  for (Index i = 0; i < y.rows(); ++i) {
    int plus = 0;
    bool bad_value = false;
    for (Index c = 0; c < y.cols(); ++c) {
      const double v = y(i, c);
      if (v == 1.0) {
        ++plus;
      } else if (v != -1.0) {
        bad_value = true;
      }
    }
    if (bad_value) issues.push_back("target row " + std::to_string(i) + " has entries outside {-1,+1}");
    if (plus != 1) {
      issues.push_back("target row " + std::to_string(i) + " has " + std::to_string(plus) +
                       " entries equal to +1 (expected exactly one)");
    }
  }
  return issues;
}

inline void require_valid(const SeenDataset& ds) {
  const auto issues = validate_seen(ds);
  if (issues.empty()) return;
  std::string msg = "invalid seen dataset:";
  for (const auto& s : issues) msg += "\n  - " + s;
  fail(ErrorKind::invalid_input, msg);
}

// Scales every column (instance) to unit l2 norm; zero columns stay zero.
inline DenseMatrix l2_normalize_columns(const DenseMatrix& m) {
  RowMatrix out = m.mat();
  for (Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (n > 0.0) out.col(j) /= n;
  }
  return DenseMatrix(out);
}

}  // namespace zsldict
