#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace hgtok {

// Non-owning row-major view.
template <class T>
struct MatrixView {
  T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> row(std::size_t r) const { return {data + r * cols, cols}; }
  std::span<T> flat() const { return {data, rows * cols}; }
  bool empty() const { return data == nullptr; }
  operator MatrixView<const T>() const { return {data, rows, cols}; }
};

template <class T>
using ConstMatrixView = MatrixView<const T>;

// Owning row-major matrix.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  MatrixView<T> view() { return {data_.data(), rows_, cols_}; }
  ConstMatrixView<T> view() const { return {data_.data(), rows_, cols_}; }
  ConstMatrixView<T> cview() const { return {data_.data(), rows_, cols_}; }

  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, T{});
  }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace hgtok
