#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "zsldict/errors.hpp"

namespace zsldict::linalg {

using Mat = Eigen::MatrixXd;

// Adds eps times the mean absolute diagonal to the diagonal of a symmetric matrix.
inline Mat with_ridge(Mat s, double eps) {
  if (eps <= 0.0 || s.rows() == 0) return s;
  const double scale = s.diagonal().cwiseAbs().mean();
  if (scale > 0.0) s.diagonal().array() += eps * scale;
  return s;
}

// Cholesky factor of a symmetric positive definite system. Fails with the
// reciprocal condition estimate when the factorization breaks down.
inline Eigen::LLT<Mat> factor_spd(const Mat& s, const std::string& what) {
  Eigen::LLT<Mat> llt(s);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (llt.info() != Eigen::Success || !(rcond > std::numeric_limits<double>::epsilon())) {
    std::ostringstream msg;
    msg << what << ": system is singular (reciprocal condition estimate " << rcond << ", size "
        << s.rows() << ")";
    fail(ErrorKind::solver_failure, msg.str());
  }
  return llt;
}

// S^{-1} B for symmetric positive definite S.
inline Mat solve_left(const Mat& s, const Mat& b, const std::string& what) {
  return factor_spd(s, what).solve(b);
}

// B S^{-1} for symmetric positive definite S, via (S^{-1} B^T)^T.
inline Mat solve_right(const Mat& b, const Mat& s, const std::string& what) {
  return factor_spd(s, what).solve(b.transpose()).transpose();
}

}  // namespace zsldict::linalg
