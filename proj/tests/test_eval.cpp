#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "zsldict/eval.hpp"
#include "zsldict/synth.hpp"

using namespace zsldict;

TEST(PerClassTop1, SpecExamples) {
  const EvalReport a = per_class_top1({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  ASSERT_EQ(a.per_class_accuracy.size(), 2u);
  EXPECT_DOUBLE_EQ(a.per_class_accuracy[0].accuracy, 0.5);
  EXPECT_DOUBLE_EQ(a.per_class_accuracy[1].accuracy, 1.0);
  EXPECT_DOUBLE_EQ(a.mean_per_class_accuracy, 0.75);

  const EvalReport b = per_class_top1({2, 0, 1}, {2, 0, 1}, 3);
  for (const auto& c : b.per_class_accuracy) EXPECT_EQ(c.accuracy, 1.0);
  EXPECT_EQ(b.mean_per_class_accuracy, 1.0);

  EXPECT_DOUBLE_EQ(per_class_top1({0, 0, 0, 0}, {0, 0, 0, 1}, 2).mean_per_class_accuracy, 0.5);
}

TEST(PerClassTop1, EmptyClassesAreExcluded) {
  const EvalReport r = per_class_top1({0, 2}, {0, 2}, 4);
  EXPECT_EQ(r.per_class_accuracy.size(), 2u);
  EXPECT_EQ(r.mean_per_class_accuracy, 1.0);
}

TEST(PerClassTop1, ConfusionRowsSumToClassCounts) {
  const EvalReport r = per_class_top1({0, 1, 2, 2, 1, 0}, {0, 0, 1, 2, 2, 2}, 3);
  EXPECT_EQ(r.confusion.mat().row(0).sum(), 2.0);
  EXPECT_EQ(r.confusion.mat().row(1).sum(), 1.0);
  EXPECT_EQ(r.confusion.mat().row(2).sum(), 3.0);
  EXPECT_EQ(r.confusion(2, 1), 1.0);
  EXPECT_EQ(r.n_instances, 6);
}

TEST(PerClassTop1, InvalidInputsRejected) {
  EXPECT_THROW(per_class_top1({0, 1}, {0}, 2), Error);
  EXPECT_THROW(per_class_top1({0, 2}, {0, 1}, 2), Error);
  EXPECT_THROW(per_class_top1({0}, {-1}, 2), Error);
  EXPECT_THROW(per_class_top1({}, {}, 2), Error);
}

TEST(PerClassTop1, InstancePermutationInvariance) {
  std::mt19937_64 rng(1);
  std::vector<int> pred(200), truth(200);
  for (std::size_t i = 0; i < 200; ++i) {
    truth[i] = static_cast<int>(rng() % 7);
    pred[i] = rng() % 3 == 0 ? static_cast<int>(rng() % 7) : truth[i];
  }
  const EvalReport base = per_class_top1(pred, truth, 7);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> p2(200), t2(200);
    for (std::size_t i = 0; i < 200; ++i) {
      p2[i] = pred[perm[i]];
      t2[i] = truth[perm[i]];
    }
    const EvalReport r = per_class_top1(p2, t2, 7);
    EXPECT_EQ(r.mean_per_class_accuracy, base.mean_per_class_accuracy);
    EXPECT_EQ(r.confusion, base.confusion);
  }
}

TEST(ClassFolds, PartitionArithmetic) {
  const auto folds = make_class_folds(10, 5, 0.2, 42);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> held_count(10, 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.holdout_classes.size(), 2u);
    EXPECT_EQ(f.train_classes.size(), 8u);
    std::set<int> all(f.train_classes.begin(), f.train_classes.end());
    for (int c : f.holdout_classes) {
      EXPECT_FALSE(all.count(c)) << "class " << c << " both trained and held out";
      ++held_count[static_cast<std::size_t>(c)];
    }
  }
  for (int n : held_count) EXPECT_EQ(n, 1);
}

TEST(ClassFolds, DegenerateSplitsRejected) {
  EXPECT_THROW(make_class_folds(5, 5, 0.2, 1), Error);   // one class per fold
  EXPECT_THROW(make_class_folds(10, 1, 0.2, 1), Error);  // one fold
  EXPECT_THROW(make_class_folds(3, 2, 0.9, 1), Error);   // nothing left to train
}

TEST(ClassFolds, SeedControlsTheShuffle) {
  const auto a = make_class_folds(20, 5, 0.2, 1);
  const auto b = make_class_folds(20, 5, 0.2, 1);
  const auto c = make_class_folds(20, 5, 0.2, 2);
  EXPECT_EQ(a[0].holdout_classes, b[0].holdout_classes);
  bool differs = false;
  for (std::size_t f = 0; f < a.size(); ++f) differs |= a[f].holdout_classes != c[f].holdout_classes;
  EXPECT_TRUE(differs);
}

namespace {

SynthData cv_fixture(std::uint64_t seed = 3) {
  SynthSpec s;
  s.M = 20;
  s.N = 2;
  s.m_per_class = 8;
  s.n_per_class = 2;
  s.p = 24;
  s.q = 12;
  s.d = 8;
  s.noise_sigma = 0.15;
  s.seed = seed;
  return generate_synthetic(s);
}

Hyperparams cv_base() {
  Hyperparams h;
  h.latent_dim = 8;
  h.max_outer_iters = 30;
  return h;
}

}  // namespace

TEST(RestrictSeen, KeepsOnlyRequestedClasses) {
  const SynthData data = cv_fixture();
  const SeenDataset sub = restrict_seen(data.seen, {3, 7});
  EXPECT_EQ(sub.num_classes(), 2);
  EXPECT_EQ(sub.num_instances(), 16);
  EXPECT_EQ(sub.class_names, (std::vector<std::string>{"seen_3", "seen_7"}));
  EXPECT_TRUE(validate_seen(sub).empty());
  const auto labels = labels_from_targets(data.seen.targets);
  Index j = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 3 && labels[i] != 7) continue;
    EXPECT_EQ(RowMatrix(sub.features.mat().col(j)), RowMatrix(data.seen.features.mat().col(static_cast<Index>(i))));
    ++j;
  }
}

TEST(CvGridSearch, SingletonGridReturnsItsPoint) {
  const SynthData data = cv_fixture();
  Hyperparams h = cv_base();
  h.alpha = 0.1;
  const CvResult r = cv_grid_search(data.seen, {h}, CvOptions{});
  EXPECT_EQ(r.best, h);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].fold_scores.size(), 5u);
  EXPECT_DOUBLE_EQ(r.best_score, r.entries[0].mean_score);
}

TEST(CvGridSearch, FoldsAreClassDisjoint) {
  const SynthData data = cv_fixture();
  const CvResult r = cv_grid_search(data.seen, {cv_base()}, CvOptions{});
  for (const auto& f : r.folds) {
    const std::set<int> train(f.train_classes.begin(), f.train_classes.end());
    for (int c : f.holdout_classes) EXPECT_FALSE(train.count(c));
    const SeenDataset tr = restrict_seen(data.seen, f.train_classes);
    for (int c : f.holdout_classes)
      EXPECT_EQ(std::count(tr.class_names.begin(), tr.class_names.end(), data.seen.class_names[static_cast<std::size_t>(c)]), 0);
  }
}

TEST(CvGridSearch, DominantPointWins) {
  const SynthData data = cv_fixture();
  Hyperparams good = cv_base();
  good.alpha = 0.01;
  good.beta = 1.0;
  Hyperparams bad = cv_base();
  bad.alpha = 100.0;
  bad.beta = 100.0;
  bad.latent_dim = 1;
  const CvResult r = cv_grid_search(data.seen, {bad, good}, CvOptions{});
  for (std::size_t f = 0; f < r.folds.size(); ++f)
    ASSERT_GT(r.entries[1].fold_scores[f], r.entries[0].fold_scores[f]) << "fixture is not dominant on fold " << f;
  EXPECT_EQ(r.best, good);
}

TEST(CvGridSearch, TiesGoToLexicographicallySmallerPoint) {
  CvEntry a{Hyperparams{}, {0.5}, 0.5};
  CvEntry b = a;
  b.hyper.alpha = 0.1;
  CvEntry c = a;
  c.hyper.alpha = 0.1;
  c.hyper.mu = 0.01;
  EXPECT_EQ(best_entry({a, b, c}), 2u);
  c.mean_score = 0.4;
  EXPECT_EQ(best_entry({a, b, c}), 1u);
}

TEST(CvGridSearch, ThreadsDoNotChangeResults) {
  const SynthData data = cv_fixture();
  const auto grid = product_grid(cv_base(), {0.01, 1.0}, {0.1, 1.0}, {1.0}, {1.0});
  CvOptions one;
  CvOptions many;
  many.threads = 3;
  const CvResult a = cv_grid_search(data.seen, grid, one);
  const CvResult b = cv_grid_search(data.seen, grid, many);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) EXPECT_EQ(a.entries[i].fold_scores, b.entries[i].fold_scores);
  EXPECT_EQ(a.best, b.best);
}

TEST(CvGridSearch, TransductiveScoringUsesLambdaAndMu) {
  const SynthData data = cv_fixture();
  CvOptions opt;
  opt.scoring = CvScoring::transductive;
  const auto grid = product_grid(cv_base(), {0.01}, {1.0}, {0.01, 1.0}, {1.0, 100.0});
  const CvResult r = cv_grid_search(data.seen, grid, opt);
  EXPECT_EQ(r.entries.size(), 4u);
  for (const auto& e : r.entries)
    for (double s : e.fold_scores) EXPECT_TRUE(s >= 0.0 && s <= 1.0);
}

TEST(GridSearch, StagedAgreesWithFullProductOnSmallGrid) {
  const SynthData data = cv_fixture();
  const std::vector<double> values{0.01, 1.0};
  const GridSearchResult staged = grid_search(data.seen, cv_base(), values, SearchMode::staged, CvOptions{});
  const GridSearchResult full = grid_search(data.seen, cv_base(), values, SearchMode::full, CvOptions{});
  EXPECT_EQ(staged.stages.size(), 2u);
  EXPECT_EQ(full.stages.size(), 1u);
  EXPECT_EQ(full.stages[0].entries.size(), 16u);
  EXPECT_EQ(hyper_key(staged.best), hyper_key(full.best));
}

TEST(Synth, Deterministic) {
  SynthSpec s;
  s.noise_sigma = 0.3;
  s.shift_magnitude = 0.5;
  const SynthData a = generate_synthetic(s);
  const SynthData b = generate_synthetic(s);
  EXPECT_EQ(a.seen.features, b.seen.features);
  EXPECT_EQ(a.seen.embeddings, b.seen.embeddings);
  EXPECT_EQ(a.unseen.features, b.unseen.features);
  EXPECT_EQ(a.unseen.embeddings, b.unseen.embeddings);
  EXPECT_EQ(a.unseen.truth_labels, b.unseen.truth_labels);
  s.seed = 43;
  EXPECT_NE(generate_synthetic(s).seen.features, a.seen.features);
}

TEST(Synth, ShapesAndValidation) {
  SynthSpec s;
  const SynthData data = generate_synthetic(s);
  EXPECT_EQ(data.seen.features.rows(), s.p);
  EXPECT_EQ(data.seen.features.cols(), s.M * s.m_per_class);
  EXPECT_EQ(data.seen.embeddings.rows(), s.q);
  EXPECT_EQ(data.unseen.embeddings.cols(), s.N);
  EXPECT_TRUE(validate_seen(data.seen).empty());
  s.d = s.p + 1;
  EXPECT_THROW(generate_synthetic(s), Error);
  s.d = 4;
  s.M = 0;
  EXPECT_THROW(generate_synthetic(s), Error);
}

TEST(Synth, GeneratingModelRecoversTruth) {
  SynthSpec s;
  s.noise_sigma = 0.0;
  const SynthData data = generate_synthetic(s);
  const ScoreTable t = score_all(data.truth.dictionary, data.truth.compat, data.unseen.features, data.unseen.embeddings);
  EXPECT_EQ(t.predictions, *data.unseen.truth_labels);
  const ScoreTable ts = score_all(data.truth.dictionary, data.truth.compat, data.seen.features, data.seen.embeddings);
  EXPECT_EQ(ts.predictions, labels_from_targets(data.seen.targets));
}

TEST(Synth, JedmRecoversNoiseFreeUnseenClasses) {
  SynthSpec s;
  s.M = 64;
  s.N = 10;
  s.m_per_class = 20;
  s.n_per_class = 50;
  s.p = 64;
  s.q = 24;
  s.d = 16;
  const SynthData data = generate_synthetic(s);
  Hyperparams h;
  h.alpha = 0.01;
  h.latent_dim = 16;
  const JedmModel m = train_jedm(data.seen, h, s.seed);
  const ScoreTable t = score_all(m.dictionary, m.compat, data.unseen.features, data.unseen.embeddings);
  EXPECT_GE(per_class_top1(t.predictions, *data.unseen.truth_labels, s.N).mean_per_class_accuracy, 0.99);
}

TEST(Synth, LargeShiftHurtsInductiveAccuracy) {
  SynthSpec s;
  s.M = 64;
  s.N = 10;
  s.m_per_class = 20;
  s.n_per_class = 50;
  s.p = 64;
  s.q = 24;
  s.d = 16;
  s.noise_sigma = 0.05;
  Hyperparams h;
  h.alpha = 0.01;
  h.latent_dim = 16;
  auto acc = [&](const SynthData& d) {
    const JedmModel m = train_jedm(d.seen, h, s.seed);
    const ScoreTable t = score_all(m.dictionary, m.compat, d.unseen.features, d.unseen.embeddings);
    return per_class_top1(t.predictions, *d.unseen.truth_labels, s.N).mean_per_class_accuracy;
  };
  const SynthData base = generate_synthetic(s);
  s.shift_magnitude = 3.0 * unseen_prototype_spacing(base);
  const SynthData shifted = generate_synthetic(s);
  EXPECT_GE(acc(base) - acc(shifted), 0.10);
}

TEST(Synth, CommonShiftModeMovesEveryClassTheSameWay) {
  SynthSpec s;
  s.shift_magnitude = 2.0;
  s.shift_mode = ShiftMode::common;
  const SynthData data = generate_synthetic(s);
  const auto& sh = data.truth.shift.mat();
  for (Index c = 1; c < sh.cols(); ++c) EXPECT_EQ(RowMatrix(sh.col(c)), RowMatrix(sh.col(0)));
  EXPECT_NEAR(sh.col(0).norm(), 2.0, 1e-12);
}
