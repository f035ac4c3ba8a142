#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/dict_admm.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"
#include "zsldict/random.hpp"

// Joint embedding dictionary model:
//
//   min_{D,C,V}  ||X - D C||_F^2 + alpha ||C^T V A - Y||_F^2 + beta ||V A||_F^2
//   s.t.         ||d_i||_2 <= 1
//
// with X the p x m seen features, A the q x M seen embeddings, Y the m x M
// {-1,+1} targets. Solved by block-coordinate descent: codes and compatibility
// in closed form, the dictionary through ADMM.
namespace zsldict {

using linalg::Mat;

struct TrainState {
  DenseMatrix dictionary;  // p x d
  DenseMatrix codes;       // d x m
  DenseMatrix compat;      // d x q
  int iter = 0;
  double objective = 0.0;
};

inline double jedm_objective(const Mat& dict, const Mat& codes, const Mat& compat, const Mat& x,
                             const Mat& emb, const Mat& y, double alpha, double beta) {
  const Mat proto = compat * emb;  // d x M
  return (x - dict * codes).squaredNorm() +
         alpha * (codes.transpose() * proto - y).squaredNorm() + beta * proto.squaredNorm();
}

inline void check_train_shapes(Index p, Index d, Index m, Index q, const Mat& dict, const Mat& codes,
                               const Mat& compat) {
  require(dict.rows() == p && dict.cols() == d, ErrorKind::dimension_mismatch,
          "dictionary is " + dims(dict.rows(), dict.cols()) + ", expected " + dims(p, d));
  require(codes.rows() == d && codes.cols() == m, ErrorKind::dimension_mismatch,
          "codes are " + dims(codes.rows(), codes.cols()) + ", expected " + dims(d, m));
  require(compat.rows() == d && compat.cols() == q, ErrorKind::dimension_mismatch,
          "compatibility matrix is " + dims(compat.rows(), compat.cols()) + ", expected " + dims(d, q));
}

inline double jedm_objective(const TrainState& s, const SeenDataset& ds, const Hyperparams& h) {
  require(ds.features.cols() == ds.targets.rows() && ds.embeddings.cols() == ds.targets.cols(),
          ErrorKind::dimension_mismatch, "seen dataset shapes are inconsistent");
  const Mat dict = s.dictionary.mat();
  const Mat codes = s.codes.mat();
  const Mat compat = s.compat.mat();
  check_train_shapes(ds.feature_dim(), dict.cols(), ds.num_instances(), ds.embeddings.rows(), dict,
                     codes, compat);
  return jedm_objective(dict, codes, compat, ds.features.mat(), ds.embeddings.mat(),
                        ds.targets.mat(), h.alpha, h.beta);
}

// C = (D^T D + alpha W W^T)^{-1} (D^T X + alpha W Y^T),  W = V A.
inline Mat update_codes(const Mat& dict, const Mat& compat, const Mat& x, const Mat& emb, const Mat& y,
                        double alpha, double ridge_eps) {
  const Mat proto = compat * emb;
  Mat lhs = dict.transpose() * dict;
  lhs.noalias() += alpha * proto * proto.transpose();
  Mat rhs = dict.transpose() * x;
  rhs.noalias() += alpha * proto * y.transpose();
  return linalg::solve_left(linalg::with_ridge(std::move(lhs), ridge_eps), rhs, "code update");
}

inline DenseMatrix update_codes(const DenseMatrix& dict, const DenseMatrix& compat,
                                const SeenDataset& ds, const Hyperparams& h) {
  require(dict.rows() == ds.feature_dim(), ErrorKind::dimension_mismatch,
          "code update: dictionary has " + std::to_string(dict.rows()) + " rows, features have " +
              std::to_string(ds.feature_dim()));
  require(compat.rows() == dict.cols() && compat.cols() == ds.embeddings.rows(),
          ErrorKind::dimension_mismatch,
          "code update: compatibility matrix is " + compat.shape() + ", expected " +
              dims(dict.cols(), ds.embeddings.rows()));
  return DenseMatrix(update_codes(dict.mat(), compat.mat(), ds.features.mat(), ds.embeddings.mat(),
                                  ds.targets.mat(), h.alpha, h.ridge_eps));
}

// V = (C C^T + gamma I)^{-1} (C Y A^T) (A A^T)^{-1},  gamma = beta / alpha.
inline Mat update_compat(const Mat& codes, const Mat& y, const Mat& emb, double gamma, double ridge_eps) {
  Mat left = codes * codes.transpose();
  left.diagonal().array() += gamma;
  const Mat cya = codes * (y * emb.transpose());
  const Mat partial = linalg::solve_left(linalg::with_ridge(std::move(left), ridge_eps), cya,
                                         "compatibility update (code Gram)");
  const Mat aat = emb * emb.transpose();
  if (aat.diagonal().cwiseAbs().maxCoeff() == 0.0) {
    fail(ErrorKind::solver_failure,
         "compatibility update: label embeddings have rank 0; A A^T is singular");
  }
  try {
    return linalg::solve_right(partial, linalg::with_ridge(aat, ridge_eps),
                               "compatibility update (embedding Gram)");
  } catch (const Error& e) {
    const Eigen::ColPivHouseholderQR<Mat> qr(emb);
    fail(ErrorKind::solver_failure, std::string(e.what()) + "; embedding rank " +
                                        std::to_string(qr.rank()) + " of " +
                                        std::to_string(emb.rows()));
  }
}

inline DenseMatrix update_compat(const DenseMatrix& codes, const SeenDataset& ds, const Hyperparams& h) {
  require(codes.cols() == ds.num_instances(), ErrorKind::dimension_mismatch,
          "compatibility update: codes have " + std::to_string(codes.cols()) +
              " columns, dataset has " + std::to_string(ds.num_instances()) + " instances");
  return DenseMatrix(update_compat(codes.mat(), ds.targets.mat(), ds.embeddings.mat(), h.gamma(),
                                   h.ridge_eps));
}

enum class TrainStage { codes, compat, dictionary };

struct TrainEvent {
  int iter = 0;  // 0-based outer iteration
  TrainStage stage = TrainStage::codes;
  double objective = 0.0;
  int admm_iterations = 0;  // dictionary stage only
};

using TrainObserver = std::function<void(const TrainEvent&)>;

inline Index resolve_latent_dim(const Hyperparams& h, Index p, Index m) {
  const Index d = h.latent_dim > 0 ? h.latent_dim : std::min(p, m);
  require(d >= 1 && d <= p, ErrorKind::invalid_input,
          "latent_dim " + std::to_string(d) + " must satisfy 1 <= d <= p = " + std::to_string(p));
  return d;
}

inline bool relative_change_below(double prev, double cur, double tol) {
  const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
  return std::abs(prev - cur) / denom < tol;
}

// Random dictionary with columns projected into the unit ball.
inline Mat initial_dictionary(Index p, Index d, std::uint64_t seed) {
  auto rng = make_stream(seed, "init");
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat dict(p, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < p; ++i) dict(i, j) = normal(rng);
  return project_unit_ball(std::move(dict));
}

inline JedmModel train_jedm(const SeenDataset& ds, const Hyperparams& h, std::uint64_t seed,
                            const TrainObserver& observer = {}) {
  require_valid(ds);
  validate(h);
  const Mat x = ds.features.mat();
  const Mat emb = ds.embeddings.mat();
  const Mat y = ds.targets.mat();
  const Index p = x.rows();
  const Index d = resolve_latent_dim(h, p, x.cols());

  Mat dict = initial_dictionary(p, d, seed);
  Mat compat = Mat::Zero(d, emb.rows());
  Mat codes;

  Hyperparams resolved = h;
  resolved.latent_dim = d;
  std::vector<double> trace;
  bool converged = false;
  auto notify = [&](int it, TrainStage stage, int admm_its) {
    if (!observer) return;
    observer({it, stage, jedm_objective(dict, codes, compat, x, emb, y, h.alpha, h.beta), admm_its});
  };

  for (int it = 0; it < h.max_outer_iters; ++it) {
    try {
      codes = update_codes(dict, compat, x, emb, y, h.alpha, h.ridge_eps);
      notify(it, TrainStage::codes, 0);
      compat = update_compat(codes, y, emb, h.gamma(), h.ridge_eps);
      notify(it, TrainStage::compat, 0);
      const DictionaryResult dr = solve_dictionary(x, codes, dict, h.admm);
      dict = dr.dictionary.mat();
      notify(it, TrainStage::dictionary, dr.iterations);
    } catch (const Error& e) {
      fail(e.kind(), "JEDM outer iteration " + std::to_string(it) + ": " + e.what());
    }
    trace.push_back(jedm_objective(dict, codes, compat, x, emb, y, h.alpha, h.beta));
    if (trace.size() >= 2 && relative_change_below(trace[trace.size() - 2], trace.back(), h.outer_tol)) {
      converged = true;
      break;
    }
  }

  return JedmModel{DenseMatrix(RowMatrix(dict)), DenseMatrix(RowMatrix(compat)), resolved, seed,
                   std::move(trace), converged};
}

}  // namespace zsldict
