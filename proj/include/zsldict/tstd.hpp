#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/inference.hpp"
#include "zsldict/jedm.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"

// Transductive self-training of the unseen dictionary. Each round predicts all
// unseen instances, promotes the top-scored fraction delta of every predicted
// class to pseudo-labels, and refits D_t on them by alternating
//
//   min_{D_t,C}  ||X - D_t C||_F^2 + lambda ||V A - C||_F^2 + mu ||D_t - D_prev||_F^2
//
// with V frozen from the seen-class model and D_prev the previous round's dictionary.
namespace zsldict {

inline const std::vector<double>& default_schedule() {
  static const std::vector<double> s{0.4, 0.6, 0.8, 1.0};
  return s;
}

// Number of self-labeled members for a class with n predicted instances:
// max(1, round-half-up(n * delta)) when n >= 1, else 0.
inline Index self_label_count(Index n, double delta) {
  if (n <= 0) return 0;
  const auto k = static_cast<Index>(std::floor(static_cast<double>(n) * delta + 0.5));
  return std::clamp<Index>(k, 1, n);
}

inline void validate_schedule(const std::vector<double>& schedule) {
  require(!schedule.empty(), ErrorKind::invalid_input, "self-labeled schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const double d = schedule[i];
    require(std::isfinite(d) && d > 0.0 && d <= 1.0, ErrorKind::invalid_input,
            "schedule entry " + std::to_string(d) + " is outside (0, 1]");
    require(i == 0 || d > schedule[i - 1], ErrorKind::invalid_input,
            "schedule must be strictly increasing (entry " + std::to_string(i) + ")");
  }
}

struct SelfLabeledSet {
  std::vector<Index> instance_indices;  // sorted, unique
  std::vector<int> assigned_labels;
  std::vector<double> scores;  // score of each member against its assigned class
  DenseMatrix features;        // p x k
  DenseMatrix embeddings;      // q x k, column j = embedding of assigned_labels[j]

  std::size_t size() const { return instance_indices.size(); }
};

// Ranks the instances predicted into each class by their score for that class
// (descending, lower index first on ties) and keeps the top self_label_count.
inline std::vector<Index> select_indices(const ScoreTable& table, double delta) {
  require(delta > 0.0 && delta <= 1.0, ErrorKind::invalid_input,
          "self-labeled rate must be in (0, 1], got " + std::to_string(delta));
  const Index n_classes = table.num_classes();
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(n_classes));
  for (Index i = 0; i < table.num_instances(); ++i)
    by_class[static_cast<std::size_t>(table.predictions[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<Index> chosen;
  for (Index c = 0; c < n_classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    const Index k = self_label_count(static_cast<Index>(members.size()), delta);
    std::stable_sort(members.begin(), members.end(), [&](Index a, Index b) {
      return table.scores(a, c) > table.scores(b, c);
    });
    chosen.insert(chosen.end(), members.begin(), members.begin() + k);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline SelfLabeledSet select_self_labeled(const ScoreTable& table, double delta,
                                          const UnseenDataset& ut) {
  require(table.num_instances() == ut.num_instances() && table.num_classes() == ut.num_classes(),
          ErrorKind::dimension_mismatch,
          "score table is " + table.scores.shape() + " but unseen data has " +
              std::to_string(ut.num_instances()) + " instances and " +
              std::to_string(ut.num_classes()) + " classes");
  std::vector<Index> idx = select_indices(table, delta);
  const auto k = static_cast<Index>(idx.size());
  const auto& xt = ut.features.mat();
  const auto& at = ut.embeddings.mat();
  RowMatrix x(xt.rows(), k);
  RowMatrix a(at.rows(), k);
  std::vector<int> labels(idx.size());
  std::vector<double> scores(idx.size());
  for (Index j = 0; j < k; ++j) {
    const Index i = idx[static_cast<std::size_t>(j)];
    const int c = table.predictions[static_cast<std::size_t>(i)];
    labels[static_cast<std::size_t>(j)] = c;
    scores[static_cast<std::size_t>(j)] = table.scores(i, c);
    x.col(j) = xt.col(i);
    a.col(j) = at.col(c);
  }
  return SelfLabeledSet{std::move(idx), std::move(labels), std::move(scores), DenseMatrix(x),
                        DenseMatrix(a)};
}

// C = (D_t^T D_t + lambda I)^{-1} (D_t^T X + lambda V A).
inline Mat refine_codes(const Mat& dict, const Mat& x, const Mat& emb, const Mat& compat, double lambda) {
  Mat lhs = dict.transpose() * dict;
  lhs.diagonal().array() += lambda;
  Mat rhs = dict.transpose() * x;
  rhs.noalias() += lambda * compat * emb;
  return linalg::solve_left(lhs, rhs, "refine codes");
}

// D_t = (X C^T + mu D_prev)(C C^T + mu I)^{-1}.
inline Mat refine_dictionary(const Mat& x, const Mat& codes, const Mat& anchor, double mu) {
  Mat gram = codes * codes.transpose();
  gram.diagonal().array() += mu;
  Mat rhs = x * codes.transpose();
  rhs.noalias() += mu * anchor;
  return linalg::solve_right(rhs, gram, "refine dictionary");
}

inline DenseMatrix refine_codes(const DenseMatrix& dict, const DenseMatrix& x, const DenseMatrix& emb,
                                const DenseMatrix& compat, double lambda) {
  require(lambda > 0.0, ErrorKind::invalid_input, "lambda must be > 0");
  require(dict.rows() == x.rows() && compat.rows() == dict.cols() && compat.cols() == emb.rows() &&
              emb.cols() == x.cols(),
          ErrorKind::dimension_mismatch,
          "refine codes: inconsistent shapes D " + dict.shape() + ", X " + x.shape() + ", A " +
              emb.shape() + ", V " + compat.shape());
  return DenseMatrix(refine_codes(dict.mat(), x.mat(), emb.mat(), compat.mat(), lambda));
}

inline DenseMatrix refine_dictionary(const DenseMatrix& x, const DenseMatrix& codes,
                                     const DenseMatrix& anchor, double mu) {
  require(mu > 0.0, ErrorKind::invalid_input, "mu must be > 0");
  require(codes.cols() == x.cols() && anchor.rows() == x.rows() && anchor.cols() == codes.rows(),
          ErrorKind::dimension_mismatch,
          "refine dictionary: inconsistent shapes X " + x.shape() + ", C " + codes.shape() +
              ", D_prev " + anchor.shape());
  return DenseMatrix(refine_dictionary(x.mat(), codes.mat(), anchor.mat(), mu));
}

inline double refine_objective(const Mat& x, const Mat& dict, const Mat& codes, const Mat& compat,
                               const Mat& emb, const Mat& anchor, double lambda, double mu) {
  return (x - dict * codes).squaredNorm() + lambda * (compat * emb - codes).squaredNorm() +
         mu * (dict - anchor).squaredNorm();
}

struct TstdState {
  int round = 0;  // 1-based
  double delta = 0.0;
  ScoreTable table;           // predictions that drove this round's selection
  SelfLabeledSet selection;
  DenseMatrix anchor;         // D_prev
  DenseMatrix dictionary;     // D_t after the refit
  DenseMatrix compat;         // V, never modified
  // Objective after every half-step: [codes, dictionary, codes, dictionary, ...].
  std::vector<double> refine_objective_trace;
  int inner_iterations = 0;
  bool inner_converged = false;
};

struct TstdResult {
  ScoreTable final_table;
  std::vector<TstdState> rounds;
};

inline void check_unseen_compat(const JedmModel& model, const UnseenDataset& ut) {
  require(ut.features.rows() == model.feature_dim(), ErrorKind::dimension_mismatch,
          "feature dimension p: model expects " + std::to_string(model.feature_dim()) +
              ", unseen features have " + std::to_string(ut.features.rows()));
  require(ut.embeddings.rows() == model.embedding_dim(), ErrorKind::dimension_mismatch,
          "embedding dimension q: model expects " + std::to_string(model.embedding_dim()) +
              ", unseen embeddings have " + std::to_string(ut.embeddings.rows()));
  require(static_cast<Index>(ut.class_names.size()) == ut.num_classes(), ErrorKind::invalid_input,
          "unseen class name count " + std::to_string(ut.class_names.size()) +
              " does not match embedding columns " + std::to_string(ut.num_classes()));
}

inline TstdResult run_tstd(const JedmModel& model, const UnseenDataset& ut, const Hyperparams& h,
                           const std::vector<double>& schedule) {
  validate(h);
  validate_schedule(schedule);
  check_unseen_compat(model, ut);

  const Mat compat = model.compat.mat();
  Mat dict = model.dictionary.mat();
  TstdResult out{score_all(model.dictionary, model.compat, ut.features, ut.embeddings), {}};

  for (std::size_t r = 0; r < schedule.size(); ++r) {
    const int round = static_cast<int>(r) + 1;
    const double delta = schedule[r];
    ScoreTable table = std::move(out.final_table);
    SelfLabeledSet sel = select_self_labeled(table, delta, ut);
    const Mat anchor = dict;
    std::vector<double> trace;
    int inner = 0;
    bool converged = false;
    try {
      const Mat x = sel.features.mat();
      const Mat emb = sel.embeddings.mat();
      double prev = 0.0;
      for (int it = 0; it < h.max_outer_iters; ++it) {
        const Mat codes = refine_codes(dict, x, emb, compat, h.lambda);
        trace.push_back(refine_objective(x, dict, codes, compat, emb, anchor, h.lambda, h.mu));
        dict = refine_dictionary(x, codes, anchor, h.mu);
        const double obj = refine_objective(x, dict, codes, compat, emb, anchor, h.lambda, h.mu);
        trace.push_back(obj);
        inner = it + 1;
        if (it > 0 && relative_change_below(prev, obj, h.outer_tol)) {
          converged = true;
          break;
        }
        prev = obj;
      }
    } catch (const Error& e) {
      fail(e.kind(), "TSTD round " + std::to_string(round) + ": " + e.what());
    }
    DenseMatrix refit{RowMatrix(dict)};
    out.final_table = score_all(refit, model.compat, ut.features, ut.embeddings);
    out.rounds.push_back(TstdState{round, delta, std::move(table), std::move(sel),
                                   DenseMatrix(RowMatrix(anchor)), std::move(refit), model.compat,
                                   std::move(trace), inner, converged});
  }
  return out;
}

}  // namespace zsldict
