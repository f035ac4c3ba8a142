#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "zsldict/dataset.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"

// Dictionary subproblem:  min_D ||X - D C||_F^2  s.t.  ||d_i||_2 <= 1 for every column,
// solved with scaled-dual ADMM on the split D = R, where R carries the constraint.
namespace zsldict {

// Column-wise r_i <- r_i / max(1, ||r_i||).
inline linalg::Mat project_unit_ball(linalg::Mat r) {
  for (Index j = 0; j < r.cols(); ++j) {
    const double n = r.col(j).norm();
    if (n > 1.0) r.col(j) /= n;
  }
  return r;
}

inline DenseMatrix project_unit_ball(const DenseMatrix& r) {
  return DenseMatrix(project_unit_ball(linalg::Mat(r.mat())));
}

namespace admm {

struct AdmmState {
  linalg::Mat D;  // p x d, least-squares iterate
  linalg::Mat R;  // p x d, feasible copy
  linalg::Mat U;  // p x d, scaled dual
  double rho = 0.0;
  int iter = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
};

// Precomputed pieces of one dictionary subproblem. The D-step system
// D (C C^T + rho I) = X C^T + rho (R - U) is factored once.
class DictionaryProblem {
 public:
  DictionaryProblem(const linalg::Mat& x, const linalg::Mat& c, double rho_multiplier)
      : x_sq_(x.squaredNorm()), xct_(x * c.transpose()), cct_(c * c.transpose()) {
    require(x.cols() == c.cols(), ErrorKind::dimension_mismatch,
            "dictionary problem: X has " + std::to_string(x.cols()) + " columns but C has " +
                std::to_string(c.cols()));
    require(rho_multiplier > 0.0, ErrorKind::invalid_input, "ADMM rho must be > 0");
    const double mean_eig = cct_.trace() / static_cast<double>(cct_.rows());
    rho_ = rho_multiplier * (mean_eig > 0.0 ? mean_eig : 1.0);
    linalg::Mat sys = cct_;
    sys.diagonal().array() += rho_;
    llt_.compute(sys);
    // rho > 0 makes the system positive definite.
    require(llt_.info() == Eigen::Success, ErrorKind::solver_failure,
            "ADMM D-step factorization failed");
  }

  double rho() const { return rho_; }
  Index rows() const { return xct_.rows(); }
  Index cols() const { return xct_.cols(); }
  const linalg::Mat& xct() const { return xct_; }
  const linalg::Mat& cct() const { return cct_; }

  // ||X - D C||_F^2 expanded through the cached products.
  double objective(const linalg::Mat& d) const {
    const double v = x_sq_ - 2.0 * (d.cwiseProduct(xct_)).sum() + (d * cct_).cwiseProduct(d).sum();
    return std::max(v, 0.0);
  }

  linalg::Mat solve_d_step(const linalg::Mat& rhs) const {
    return llt_.solve(rhs.transpose()).transpose();
  }

 private:
  double x_sq_;
  linalg::Mat xct_;
  linalg::Mat cct_;
  double rho_ = 1.0;
  Eigen::LLT<linalg::Mat> llt_;
};

inline AdmmState init_state(const DictionaryProblem& prob, const linalg::Mat& d_init) {
  AdmmState s;
  s.R = project_unit_ball(d_init);
  s.D = s.R;
  s.U = linalg::Mat::Zero(d_init.rows(), d_init.cols());
  s.rho = prob.rho();
  return s;
}

inline void step(const DictionaryProblem& prob, AdmmState& s) {
  s.D = prob.solve_d_step(prob.xct() + s.rho * (s.R - s.U));
  linalg::Mat r_prev = std::move(s.R);
  s.R = project_unit_ball(linalg::Mat(s.D + s.U));
  s.U += s.D - s.R;
  const double scale = std::max(1.0, s.R.norm());
  s.primal_res = (s.D - s.R).norm() / scale;
  s.dual_res = (s.R - r_prev).norm() / scale;
  ++s.iter;
}

}  // namespace admm

struct DictionaryResult {
  DenseMatrix dictionary;  // feasible: every column inside the unit ball
  int iterations = 0;
  bool converged = false;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // ||X - R C||^2 per iteration
};

// Solves the constrained dictionary problem from a warm start. Returns the
// feasible iterate with the lowest objective (the projected warm start counts).
inline DictionaryResult solve_dictionary(const linalg::Mat& x, const linalg::Mat& c,
                                         const linalg::Mat& d_init, const AdmmOptions& opt) {
  require(d_init.rows() == x.rows() && d_init.cols() == c.rows(), ErrorKind::dimension_mismatch,
          "solve_dictionary: initial dictionary is " + dims(d_init.rows(), d_init.cols()) +
              ", expected " + dims(x.rows(), c.rows()));
  require(opt.max_iters >= 1 && opt.tol > 0.0, ErrorKind::invalid_input,
          "solve_dictionary: max_iters must be >= 1 and tol > 0");
  const admm::DictionaryProblem prob(x, c, opt.rho);
  admm::AdmmState s = admm::init_state(prob, d_init);

  linalg::Mat best = s.R;
  double best_obj = prob.objective(best);
  DictionaryResult res{DenseMatrix(RowMatrix(best)), 0, false, 0.0, 0.0, 0.0, {}};
  while (s.iter < opt.max_iters) {
    admm::step(prob, s);
    const double obj = prob.objective(s.R);
    res.objective_trace.push_back(obj);
    if (obj <= best_obj) {
      best_obj = obj;
      best = s.R;
    }
    if (std::max(s.primal_res, s.dual_res) < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.dictionary = DenseMatrix(RowMatrix(best));
  res.iterations = s.iter;
  res.primal_res = s.primal_res;
  res.dual_res = s.dual_res;
  res.objective = best_obj;
  return res;
}

inline DictionaryResult solve_dictionary(const DenseMatrix& x, const DenseMatrix& c,
                                         const DenseMatrix& d_init, const AdmmOptions& opt = {}) {
  return solve_dictionary(linalg::Mat(x.mat()), linalg::Mat(c.mat()), linalg::Mat(d_init.mat()), opt);
}

}  // namespace zsldict
