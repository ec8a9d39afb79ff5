#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tagrade::ml {

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  // The first pushed row fixes the column count.
  void push_row(std::span<const double> values);

  Matrix select_rows(std::span<const std::size_t> indices) const;
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Binary tasks use labels +1 / -1. The grader uses grades 1..4.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> subjects;

  std::size_t size() const { return y.size(); }
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  std::size_t count_label(int label) const;
};

}  // namespace tagrade::ml
