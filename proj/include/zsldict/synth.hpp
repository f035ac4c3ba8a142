#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"
#include "zsldict/random.hpp"

// Synthetic zero-shot benchmark with a known generating model. Latent class
// prototypes P (d x (M+N), unit columns) are realised through a random map V*
// (d x q) by embeddings A = pinv(V*) P; instances are X = D* (P_y + noise) with
// an orthonormal D* (p x d). Unseen instances can be translated in latent space
// to simulate domain shift.
namespace zsldict {

enum class ShiftMode {
  per_class,  // each unseen class moves along its own random unit direction
  common,     // every unseen instance moves along one shared direction
};

struct SynthSpec {
  Index M = 10;
  Index N = 5;
  Index m_per_class = 20;
  Index n_per_class = 20;
  Index p = 32;
  Index q = 16;
  Index d = 8;
  double noise_sigma = 0.0;      // per-coordinate latent noise std
  double shift_magnitude = 0.0;  // length of the latent translation of unseen instances
  ShiftMode shift_mode = ShiftMode::per_class;
  std::uint64_t seed = 42;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

inline void validate(const SynthSpec& s) {
  const std::pair<const char*, Index> counts[] = {{"M", s.M}, {"N", s.N},
                                                  {"m_per_class", s.m_per_class},
                                                  {"n_per_class", s.n_per_class},
                                                  {"p", s.p}, {"q", s.q}, {"d", s.d}};
  for (const auto& [name, v] : counts)
    require(v >= 1, ErrorKind::invalid_input, std::string(name) + " must be >= 1");
  require(s.d <= s.p, ErrorKind::invalid_input,
          "latent dimension d=" + std::to_string(s.d) + " exceeds feature dimension p=" +
              std::to_string(s.p));
  require(std::isfinite(s.noise_sigma) && s.noise_sigma >= 0.0, ErrorKind::invalid_input,
          "noise_sigma must be finite and >= 0");
  require(std::isfinite(s.shift_magnitude) && s.shift_magnitude >= 0.0, ErrorKind::invalid_input,
          "shift_magnitude must be finite and >= 0");
}

struct SynthTruth {
  std::vector<int> seen_labels;
  std::vector<int> unseen_labels;
  DenseMatrix dictionary;  // D*, p x d, orthonormal columns
  DenseMatrix compat;      // V*, d x q
  DenseMatrix prototypes;  // V* A, d x (M+N); seen classes first
  DenseMatrix shift;       // d x N, latent translation of each unseen class
};

struct SynthData {
  SeenDataset seen;
  UnseenDataset unseen;
  SynthTruth truth;
};

namespace detail {

inline linalg::Mat gaussian(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  linalg::Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * normal(rng);
  return m;
}

inline linalg::Mat unit_columns(linalg::Mat m) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n > 0.0) m.col(j) /= n;
  }
  return m;
}

inline std::vector<std::string> class_names(const std::string& prefix, Index count) {
  std::vector<std::string> names;
  for (Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

}  // namespace detail

inline SynthData generate_synthetic(const SynthSpec& s) {
  validate(s);
  const Index k = s.M + s.N;

  auto dict_rng = make_stream(s.seed, "synth/dictionary");
  const Eigen::HouseholderQR<linalg::Mat> qr(detail::gaussian(s.p, s.d, dict_rng));
  const linalg::Mat dstar = qr.householderQ() * linalg::Mat::Identity(s.p, s.d);

  auto proto_rng = make_stream(s.seed, "synth/prototypes");
  const linalg::Mat target = detail::unit_columns(detail::gaussian(s.d, k, proto_rng));

  auto compat_rng = make_stream(s.seed, "synth/compat");
  const linalg::Mat vstar = detail::gaussian(s.d, s.q, compat_rng);

  // Embeddings realising the target prototypes as closely as V* allows, then
  // rescaled so each realised prototype has unit norm.
  const Eigen::CompleteOrthogonalDecomposition<linalg::Mat> cod(vstar);
  linalg::Mat emb = cod.solve(target);
  linalg::Mat proto = vstar * emb;
  for (Index c = 0; c < k; ++c) {
    const double n = proto.col(c).norm();
    require(n > 0.0, ErrorKind::solver_failure, "synthetic prototype collapsed to zero");
    emb.col(c) /= n;
    proto.col(c) /= n;
  }

  auto shift_rng = make_stream(s.seed, "synth/shift");
  linalg::Mat shift(s.d, s.N);
  if (s.shift_mode == ShiftMode::common) {
    const linalg::Mat u = detail::unit_columns(detail::gaussian(s.d, 1, shift_rng));
    shift = u.replicate(1, s.N) * s.shift_magnitude;
  } else {
    shift = detail::unit_columns(detail::gaussian(s.d, s.N, shift_rng)) * s.shift_magnitude;
  }

  auto noise_rng = make_stream(s.seed, "synth/noise");
  std::vector<int> ys;
  for (Index c = 0; c < s.M; ++c) ys.insert(ys.end(), static_cast<std::size_t>(s.m_per_class), static_cast<int>(c));
  std::vector<int> yt;
  for (Index c = 0; c < s.N; ++c) yt.insert(yt.end(), static_cast<std::size_t>(s.n_per_class), static_cast<int>(c));

  linalg::Mat zs = detail::gaussian(s.d, static_cast<Index>(ys.size()), noise_rng, s.noise_sigma);
  for (Index i = 0; i < zs.cols(); ++i) zs.col(i) += proto.col(ys[static_cast<std::size_t>(i)]);
  linalg::Mat zt = detail::gaussian(s.d, static_cast<Index>(yt.size()), noise_rng, s.noise_sigma);
  for (Index i = 0; i < zt.cols(); ++i) {
    const Index c = yt[static_cast<std::size_t>(i)];
    zt.col(i) += proto.col(s.M + c) + shift.col(c);
  }

  SeenDataset seen{DenseMatrix(dstar * zs), one_hot_pm(ys, s.M),
                   DenseMatrix(emb.leftCols(s.M)), detail::class_names("seen_", s.M)};
  UnseenDataset unseen{DenseMatrix(dstar * zt), DenseMatrix(emb.rightCols(s.N)),
                       detail::class_names("unseen_", s.N), yt};
  SynthTruth truth{std::move(ys), std::move(yt), DenseMatrix(dstar), DenseMatrix(vstar),
                   DenseMatrix(proto), DenseMatrix(shift)};
  return SynthData{std::move(seen), std::move(unseen), std::move(truth)};
}

// Smallest pairwise distance between the latent prototypes of the unseen classes
// (0 when N = 1).
inline double unseen_prototype_spacing(const SynthData& data) {
  const auto& proto = data.truth.prototypes.mat();
  const Index first = data.seen.num_classes();
  const Index n = data.unseen.num_classes();
  if (n < 2) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      best = std::min(best, (proto.col(first + a) - proto.col(first + b)).norm());
  return best;
}

}  // namespace zsldict
