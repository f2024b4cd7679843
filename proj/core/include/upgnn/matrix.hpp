#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "upgnn/errors.hpp"

namespace upgnn {

// Dense row-major matrix of a floating-point scalar type.
template <typename T>
class Matrix {
 public:
  Matrix() = default;

  // Zero-initialized matrix of the given shape.
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, T{0}) {}

  // Construct from a row-major value buffer.
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: value buffer size does not match shape");
    }
  }

  // Build from nested initializer lists; rows must have equal lengths.
  static Matrix FromRows(std::initializer_list<std::initializer_list<T>> rows) {
    Matrix out;
    out.rows_ = rows.size();
    out.cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
    out.values_.reserve(out.rows_ * out.cols_);
    for (const auto& row : rows) {
      if (row.size() != out.cols_) {
        throw ShapeError("Matrix::FromRows: ragged rows");
      }
      out.values_.insert(out.values_.end(), row.begin(), row.end());
    }
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           values_ == other.values_;
  }

  // Elementwise copy into another scalar type.
  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out.values()[i] = static_cast<U>(values_[i]);
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

}  // namespace upgnn
