#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/inference.hpp"
#include "zsldict/jedm.hpp"
#include "zsldict/matrix.hpp"
#include "zsldict/random.hpp"
#include "zsldict/tstd.hpp"

namespace zsldict {

struct ClassAccuracy {
  int label = 0;
  Index count = 0;
  Index correct = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::vector<ClassAccuracy> per_class_accuracy;  // classes with at least one instance
  double mean_per_class_accuracy = 0.0;
  DenseMatrix confusion;  // N x N, row = truth, column = prediction
  Index n_instances = 0;
};

inline EvalReport per_class_top1(const std::vector<int>& predictions, const std::vector<int>& truth,
                                 Index num_classes) {
  require(num_classes >= 1, ErrorKind::invalid_input, "number of classes must be >= 1");
  require(predictions.size() == truth.size(), ErrorKind::invalid_input,
          "prediction count " + std::to_string(predictions.size()) + " differs from truth count " +
              std::to_string(truth.size()));
  require(!truth.empty(), ErrorKind::invalid_input, "no instances to evaluate");
  RowMatrix conf = RowMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predictions[i];
    require(t >= 0 && t < num_classes, ErrorKind::invalid_input,
            "truth label " + std::to_string(t) + " out of range at position " + std::to_string(i));
    require(p >= 0 && p < num_classes, ErrorKind::invalid_input,
            "predicted label " + std::to_string(p) + " out of range at position " + std::to_string(i));
    conf(t, p) += 1.0;
  }
  std::vector<ClassAccuracy> per_class;
  double sum = 0.0;
  for (Index c = 0; c < num_classes; ++c) {
    const auto count = static_cast<Index>(conf.row(c).sum());
    if (count == 0) continue;
    const auto correct = static_cast<Index>(conf(c, c));
    const double acc = static_cast<double>(correct) / static_cast<double>(count);
    per_class.push_back({static_cast<int>(c), count, correct, acc});
    sum += acc;
  }
  const double mean = sum / static_cast<double>(per_class.size());
  return EvalReport{std::move(per_class), mean, DenseMatrix(conf), static_cast<Index>(truth.size())};
}

// ---- class-wise cross-validation ----

struct CvFold {
  std::vector<int> train_classes;    // sorted
  std::vector<int> holdout_classes;  // sorted
};

// Shuffles the classes once ("cv-shuffle" stream) and holds out consecutive
// blocks of round(M * holdout_frac) classes, wrapping around the permutation.
inline std::vector<CvFold> make_class_folds(Index num_classes, int folds, double holdout_frac,
                                            std::uint64_t seed) {
  require(folds >= 2, ErrorKind::invalid_input, "CV needs at least 2 folds");
  require(holdout_frac > 0.0 && holdout_frac < 1.0, ErrorKind::invalid_input,
          "holdout fraction must be in (0, 1)");
  const auto h = static_cast<Index>(std::floor(static_cast<double>(num_classes) * holdout_frac + 0.5));
  require(h >= 2, ErrorKind::invalid_input,
          "degenerate split: " + std::to_string(num_classes) + " classes x " +
              std::to_string(holdout_frac) + " holds out " + std::to_string(h) +
              " class(es) per fold, need >= 2");
  require(h < num_classes, ErrorKind::invalid_input,
          "degenerate split: holding out " + std::to_string(h) + " of " +
              std::to_string(num_classes) + " classes leaves none to train on");
  std::vector<int> order(static_cast<std::size_t>(num_classes));
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_stream(seed, "cv-shuffle");
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<CvFold> out;
  for (int f = 0; f < folds; ++f) {
    std::vector<char> held(static_cast<std::size_t>(num_classes), 0);
    for (Index j = 0; j < h; ++j)
      held[static_cast<std::size_t>(order[static_cast<std::size_t>((f * h + j) % num_classes)])] = 1;
    CvFold fold;
    for (int c = 0; c < num_classes; ++c) (held[static_cast<std::size_t>(c)] ? fold.holdout_classes : fold.train_classes).push_back(c);
    out.push_back(std::move(fold));
  }
  return out;
}

// Instances of the given classes, relabelled 0..k-1 in the order of `classes`.
inline SeenDataset restrict_seen(const SeenDataset& ds, const std::vector<int>& classes) {
  const std::vector<int> labels = labels_from_targets(ds.targets);
  std::vector<int> remap(static_cast<std::size_t>(ds.num_classes()), -1);
  for (std::size_t j = 0; j < classes.size(); ++j) remap[static_cast<std::size_t>(classes[j])] = static_cast<int>(j);
  std::vector<Index> keep;
  std::vector<int> new_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (remap[static_cast<std::size_t>(labels[i])] < 0) continue;
    keep.push_back(static_cast<Index>(i));
    new_labels.push_back(remap[static_cast<std::size_t>(labels[i])]);
  }
  require(!keep.empty(), ErrorKind::invalid_input, "selected classes have no instances");
  const auto& x = ds.features.mat();
  const auto& a = ds.embeddings.mat();
  RowMatrix xs(x.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) xs.col(static_cast<Index>(j)) = x.col(keep[j]);
  RowMatrix as(a.rows(), static_cast<Index>(classes.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    as.col(static_cast<Index>(j)) = a.col(classes[j]);
    names.push_back(ds.class_names[static_cast<std::size_t>(classes[j])]);
  }
  return SeenDataset{DenseMatrix(xs), one_hot_pm(new_labels, static_cast<Index>(classes.size())),
                     DenseMatrix(as), std::move(names)};
}

inline UnseenDataset as_unseen(const SeenDataset& ds) {
  return UnseenDataset{ds.features, ds.embeddings, ds.class_names, labels_from_targets(ds.targets)};
}

enum class CvScoring {
  inductive,     // zero-shot accuracy of the JEDM model on held-out classes
  transductive,  // accuracy after run_tstd on held-out classes
};

struct CvOptions {
  int folds = 5;
  double holdout_frac = 0.2;
  std::uint64_t seed = 42;
  CvScoring scoring = CvScoring::inductive;
  std::vector<double> schedule = default_schedule();
  int threads = 1;
};

struct CvEntry {
  Hyperparams hyper;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct CvResult {
  Hyperparams best;
  double best_score = 0.0;
  std::vector<CvEntry> entries;  // in grid order
  std::vector<CvFold> folds;
};

inline auto hyper_key(const Hyperparams& h) { return std::make_tuple(h.alpha, h.beta, h.lambda, h.mu); }

// Higher mean wins; equal means go to the lexicographically smaller (alpha, beta, lambda, mu).
inline std::size_t best_entry(const std::vector<CvEntry>& entries) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto& a = entries[i];
    const auto& b = entries[best];
    if (a.mean_score > b.mean_score ||
        (a.mean_score == b.mean_score && hyper_key(a.hyper) < hyper_key(b.hyper)))
      best = i;
  }
  return best;
}

namespace detail {

// Runs task(i) for i in [0, n) on up to `threads` workers. Each task writes only
// its own slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Hyperparameters with lambda and mu neutralised: grid points sharing this key
// share their JEDM models.
inline Hyperparams jedm_key(Hyperparams h) {
  h.lambda = 1.0;
  h.mu = 1.0;
  return h;
}

}  // namespace detail

inline CvResult cv_grid_search(const SeenDataset& ds, const std::vector<Hyperparams>& grid,
                               const CvOptions& opt) {
  require_valid(ds);
  require(!grid.empty(), ErrorKind::invalid_input, "hyperparameter grid is empty");
  for (const auto& h : grid) validate(h);
  if (opt.scoring == CvScoring::transductive) validate_schedule(opt.schedule);
  std::vector<CvFold> folds = make_class_folds(ds.num_classes(), opt.folds, opt.holdout_frac, opt.seed);
  const std::size_t nf = folds.size();

  std::vector<SeenDataset> train_sets;
  std::vector<UnseenDataset> val_sets;
  for (const auto& f : folds) {
    train_sets.push_back(restrict_seen(ds, f.train_classes));
    val_sets.push_back(as_unseen(restrict_seen(ds, f.holdout_classes)));
  }

  std::vector<Hyperparams> configs;
  std::vector<std::size_t> config_of(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Hyperparams key = detail::jedm_key(grid[g]);
    const auto it = std::find(configs.begin(), configs.end(), key);
    config_of[g] = static_cast<std::size_t>(it - configs.begin());
    if (it == configs.end()) configs.push_back(key);
  }

  std::vector<std::optional<JedmModel>> models(configs.size() * nf);
  detail::parallel_for(models.size(), opt.threads, [&](std::size_t t) {
    models[t] = train_jedm(train_sets[t % nf], configs[t / nf], opt.seed);
  });

  std::vector<CvEntry> entries(grid.size());
  for (auto& e : entries) e.fold_scores.resize(nf);
  detail::parallel_for(grid.size() * nf, opt.threads, [&](std::size_t t) {
    const std::size_t g = t / nf;
    const std::size_t f = t % nf;
    const JedmModel& model = *models[config_of[g] * nf + f];
    const UnseenDataset& val = val_sets[f];
    const ScoreTable table = opt.scoring == CvScoring::inductive
                                 ? score_all(model.dictionary, model.compat, val.features, val.embeddings)
                                 : run_tstd(model, val, grid[g], opt.schedule).final_table;
    const double acc = per_class_top1(table.predictions, *val.truth_labels, val.num_classes())
                           .mean_per_class_accuracy;
    entries[g].fold_scores[f] = acc;
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    entries[g].hyper = grid[g];
    entries[g].mean_score = std::accumulate(entries[g].fold_scores.begin(), entries[g].fold_scores.end(), 0.0) /
                            static_cast<double>(nf);
  }
  const std::size_t b = best_entry(entries);
  return CvResult{entries[b].hyper, entries[b].mean_score, std::move(entries), std::move(folds)};
}

inline const std::vector<double>& default_grid_values() {
  static const std::vector<double> v{0.01, 0.1, 1.0, 10.0, 100.0};
  return v;
}

inline std::vector<Hyperparams> product_grid(const Hyperparams& base, const std::vector<double>& alphas,
                                             const std::vector<double>& betas,
                                             const std::vector<double>& lambdas,
                                             const std::vector<double>& mus) {
  std::vector<Hyperparams> grid;
  for (double a : alphas)
    for (double b : betas)
      for (double l : lambdas)
        for (double m : mus) {
          Hyperparams h = base;
          h.alpha = a;
          h.beta = b;
          h.lambda = l;
          h.mu = m;
          grid.push_back(h);
        }
  return grid;
}

enum class SearchMode { staged, full };

struct GridSearchResult {
  Hyperparams best;
  double best_score = 0.0;
  std::vector<CvResult> stages;  // staged: [alpha/beta, lambda/mu]; full: one entry
};

// Staged: (alpha, beta) by inductive CV with base lambda/mu, then (lambda, mu) by
// transductive CV with the chosen (alpha, beta). Full: the whole product, scored
// transductively.
inline GridSearchResult grid_search(const SeenDataset& ds, const Hyperparams& base,
                                    const std::vector<double>& values, SearchMode mode, CvOptions opt) {
  require(!values.empty(), ErrorKind::invalid_input, "grid value list is empty");
  GridSearchResult out;
  if (mode == SearchMode::full) {
    opt.scoring = CvScoring::transductive;
    out.stages.push_back(cv_grid_search(ds, product_grid(base, values, values, values, values), opt));
  } else {
    opt.scoring = CvScoring::inductive;
    out.stages.push_back(cv_grid_search(ds, product_grid(base, values, values, {base.lambda}, {base.mu}), opt));
    const Hyperparams& ab = out.stages.back().best;
    opt.scoring = CvScoring::transductive;
    out.stages.push_back(cv_grid_search(ds, product_grid(ab, {ab.alpha}, {ab.beta}, values, values), opt));
  }
  out.best = out.stages.back().best;
  out.best_score = out.stages.back().best_score;
  return out;
}

}  // namespace zsldict
