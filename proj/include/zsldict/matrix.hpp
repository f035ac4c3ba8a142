#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsldict/errors.hpp"

namespace zsldict {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Immutable row-major real matrix. Construction rejects empty shapes and any
// non-finite entry, so every DenseMatrix in the system is finite.
class DenseMatrix {
 public:
  DenseMatrix(Index rows, Index cols, std::vector<double> data) {
    require(rows >= 1 && cols >= 1, ErrorKind::invalid_input,
            "matrix must have at least one row and one column, got " + dims(rows, cols));
    require(static_cast<Index>(data.size()) == rows * cols, ErrorKind::invalid_input,
            "matrix data length " + std::to_string(data.size()) + " does not match " +
                dims(rows, cols));
    m_ = Eigen::Map<const RowMatrix>(data.data(), rows, cols);
    check_finite();
  }

  template <typename Derived>
  explicit DenseMatrix(const Eigen::MatrixBase<Derived>& expr) : m_(expr) {
    require(m_.rows() >= 1 && m_.cols() >= 1, ErrorKind::invalid_input,
            "matrix must have at least one row and one column, got " + dims(m_.rows(), m_.cols()));
    check_finite();
  }

  static DenseMatrix zeros(Index rows, Index cols) { return DenseMatrix(RowMatrix::Zero(rows, cols)); }
  static DenseMatrix identity(Index n) { return DenseMatrix(RowMatrix::Identity(n, n)); }

  Index rows() const noexcept { return m_.rows(); }
  Index cols() const noexcept { return m_.cols(); }
  double operator()(Index r, Index c) const { return m_(r, c); }

  const RowMatrix& mat() const noexcept { return m_; }
  std::span<const double> data() const noexcept {
    return {m_.data(), static_cast<std::size_t>(m_.size())};
  }

  std::string shape() const { return dims(rows(), cols()); }

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.m_ == b.m_;
  }

 private:
  void check_finite() const {
    for (Index i = 0; i < m_.size(); ++i) {
      if (!std::isfinite(m_.data()[i])) {
        fail(ErrorKind::invalid_input, "non-finite entry at (" + std::to_string(i / m_.cols()) +
                                           ", " + std::to_string(i % m_.cols()) + ")");
      }
    }
  }

  RowMatrix m_;
};

}  // namespace zsldict
