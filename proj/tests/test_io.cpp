#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "test_support.hpp"
#include "zsldict/io.hpp"
#include "zsldict/synth.hpp"

using namespace zsldict;
namespace fs = std::filesystem;

TEST(Dmat, FormatIsHeaderPlusRowMajorLines) {
  const DenseMatrix m(2, 2, {1.5, -2.0, 0.1, 1e-300});
  EXPECT_EQ(io::format_dmat(m), "dmat 2 2\n1.5 -2\n0.1 1e-300\n");
}

TEST(Dmat, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1e3);
  RowMatrix m(7, 5);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) / 7.0;
  const DenseMatrix a(m);
  const DenseMatrix b = io::parse_dmat(io::format_dmat(a), "mem");
  EXPECT_EQ(a, b);
  EXPECT_EQ(io::format_dmat(a), io::format_dmat(b));
}

TEST(Dmat, CommentsBlankLinesAndTabsAreIgnored) {
  const DenseMatrix m = io::parse_dmat("# produced by hand\n\ndmat 2 1\n# mid comment\n\t3.0\n+4e0\r\n", "mem");
  EXPECT_EQ(m, DenseMatrix(2, 1, {3.0, 4.0}));
}

TEST(Dmat, MalformedInputsAreRejected) {
  auto kind_of = [](const std::string& text) {
    try {
      io::parse_dmat(text, "mem");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::solver_failure;
  };
  EXPECT_EQ(kind_of("dmat 2 2\n1 2\n3\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("dmat 2 1\n1\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("dmat 1 1\nnan\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("dmat 1 1\n1x\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("matrix 1 1\n1\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("# only a comment\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("dmat 0 1\n"), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of("dmat 1 1\n1\n2\n"), ErrorKind::invalid_input);
}

TEST(Manifest, SyntheticDatasetRoundTrips) {
  const test::TempDir dir("manifest");
  SynthSpec s;
  s.M = 4;
  s.N = 2;
  s.m_per_class = 3;
  s.n_per_class = 2;
  const SynthData data = generate_synthetic(s);
  const std::vector<int> labels = labels_from_targets(data.seen.targets);
  io::write_dataset(dir.path, data.seen.features, data.seen.embeddings, data.seen.class_names, &labels);
  const SeenDataset back = io::load_seen(dir.path / "manifest.json");
  EXPECT_EQ(back.features, data.seen.features);
  EXPECT_EQ(back.targets, data.seen.targets);
  EXPECT_EQ(back.embeddings, data.seen.embeddings);
  EXPECT_EQ(back.class_names, data.seen.class_names);
}

TEST(Manifest, UnknownKeysAreRejected) {
  const test::TempDir dir("manifest_unknown");
  io::write_dmat(dir.path / "x.dmat", DenseMatrix(1, 1, {1.0}));
  io::write_json(dir.path / "m.json", {{"features", "x.dmat"}, {"embeddings", "x.dmat"}, {"classes", {"a"}},
                                       {"extra", 1}});
  try {
    io::load_unseen(dir.path / "m.json");
    FAIL() << "unknown key accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    EXPECT_NE(std::string(e.what()).find("'extra'"), std::string::npos);
  }
}

TEST(Manifest, MissingFileNamesTheKey) {
  const test::TempDir dir("manifest_missing");
  io::write_dmat(dir.path / "x.dmat", DenseMatrix(1, 1, {1.0}));
  io::write_json(dir.path / "m.json", {{"features", "x.dmat"}, {"embeddings", "nope.dmat"}, {"classes", {"a"}}});
  try {
    io::load_unseen(dir.path / "m.json");
    FAIL() << "missing file accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    EXPECT_NE(std::string(e.what()).find("'embeddings'"), std::string::npos);
  }
}

TEST(Manifest, UnknownClassInLabelsFile) {
  const test::TempDir dir("manifest_labels");
  io::write_dmat(dir.path / "x.dmat", DenseMatrix(1, 2, {1.0, 2.0}));
  io::write_dmat(dir.path / "a.dmat", DenseMatrix(1, 2, {1.0, 2.0}));
  io::write_lines(dir.path / "labels.txt", {"a", "zebra"});
  io::write_json(dir.path / "m.json", {{"features", "x.dmat"}, {"embeddings", "a.dmat"}, {"labels", "labels.txt"},
                                       {"classes", {"a", "b"}}});
  try {
    io::load_seen(dir.path / "m.json");
    FAIL() << "unknown class accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zebra"), std::string::npos);
  }
}

TEST(Model, SaveLoadRoundTrip) {
  const test::TempDir dir("model");
  Hyperparams h;
  h.alpha = 0.1;
  h.latent_dim = 2;
  const JedmModel m{DenseMatrix(3, 2, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}), DenseMatrix(2, 1, {1.0, -1.0}), h, 99,
                    {3.0, 2.0, 1.5}, true};
  io::save_model(dir.path, m, {"x", "y"});
  const io::SavedModel back = io::load_model(dir.path);
  EXPECT_EQ(back.model.dictionary, m.dictionary);
  EXPECT_EQ(back.model.compat, m.compat);
  EXPECT_EQ(back.model.hyper, m.hyper);
  EXPECT_EQ(back.model.seed, 99u);
  EXPECT_EQ(back.model.objective_trace, m.objective_trace);
  EXPECT_EQ(back.seen_classes, (std::vector<std::string>{"x", "y"}));
  const auto meta = io::parse_json(dir.path / "model.json");
  EXPECT_EQ(meta["format_version"], "tstd-model/1");
}

TEST(Model, WrongFormatVersionIsRejected) {
  const test::TempDir dir("model_version");
  io::write_json(dir.path / "model.json", {{"format_version", "tstd-model/0"}});
  EXPECT_THROW(io::load_model(dir.path), Error);
}

TEST(Hyperparams, JsonRejectsUnknownKeys) {
  const nlohmann::json j{{"alpha", 0.5}, {"gamma", 2}};
  EXPECT_THROW(io::hyperparams_from_json(j, Hyperparams{}, "cfg"), Error);
  const Hyperparams h = io::hyperparams_from_json({{"alpha", 0.5}, {"admm", {{"rho", 2.0}}}}, Hyperparams{}, "cfg");
  EXPECT_EQ(h.alpha, 0.5);
  EXPECT_EQ(h.admm.rho, 2.0);
  EXPECT_EQ(io::hyperparams_from_json(io::to_json(h), Hyperparams{}, "cfg"), h);
}
