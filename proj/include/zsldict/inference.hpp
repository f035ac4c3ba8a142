#pragma once

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

#include "zsldict/errors.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"

namespace zsldict {

// Compatibility scores of n instances against N classes, with the argmax
// prediction and best-minus-runner-up margin of every row.
struct ScoreTable {
  DenseMatrix scores;  // n x N
  std::vector<int> predictions;
  std::vector<double> margins;

  Index num_instances() const { return scores.rows(); }
  Index num_classes() const { return scores.cols(); }
};

// Ties go to the lowest class index. With a single class the margin is 0.
inline ScoreTable table_from_scores(DenseMatrix scores) {
  const auto& s = scores.mat();
  std::vector<int> pred(static_cast<std::size_t>(s.rows()));
  std::vector<double> margin(static_cast<std::size_t>(s.rows()), 0.0);
  for (Index i = 0; i < s.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < s.cols(); ++c)
      if (s(i, c) > s(i, best)) best = c;
    double runner_up = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < s.cols(); ++c)
      if (c != best && s(i, c) > runner_up) runner_up = s(i, c);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
    if (s.cols() > 1) margin[static_cast<std::size_t>(i)] = s(i, best) - runner_up;
  }
  return ScoreTable{std::move(scores), std::move(pred), std::move(margin)};
}

// Latent embedding of each instance: D^T X (d x n).
inline DenseMatrix embed_instances(const DenseMatrix& dict, const DenseMatrix& x) {
  require(dict.rows() == x.rows(), ErrorKind::dimension_mismatch,
          "feature dimension p: dictionary has " + std::to_string(dict.rows()) +
              " rows but instances have " + std::to_string(x.rows()));
  return DenseMatrix(dict.mat().transpose() * x.mat());
}

// Class prototypes in the latent space: V A (d x N).
inline DenseMatrix embed_prototypes(const DenseMatrix& compat, const DenseMatrix& emb) {
  require(compat.cols() == emb.rows(), ErrorKind::dimension_mismatch,
          "embedding dimension q: compatibility matrix has " + std::to_string(compat.cols()) +
              " columns but label embeddings have " + std::to_string(emb.rows()) + " rows");
  return DenseMatrix(compat.mat() * emb.mat());
}

// s(x, a_c) = x^T D V a_c for every instance/class pair.
inline ScoreTable score_all(const DenseMatrix& dict, const DenseMatrix& compat, const DenseMatrix& x,
                            const DenseMatrix& emb) {
  require(dict.cols() == compat.rows(), ErrorKind::dimension_mismatch,
          "latent dimension d: dictionary has " + std::to_string(dict.cols()) +
              " columns but compatibility matrix has " + std::to_string(compat.rows()) + " rows");
  const DenseMatrix inst = embed_instances(dict, x);
  const DenseMatrix proto = embed_prototypes(compat, emb);
  return table_from_scores(DenseMatrix(inst.mat().transpose() * proto.mat()));
}

}  // namespace zsldict
