#include "tagrade/ml/matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace tagrade::ml {

void Matrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && data_.empty()) cols_ = values.size();
  if (values.size() != cols_) throw std::invalid_argument("row width does not match matrix");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw std::invalid_argument("dataset: feature rows and labels differ in length");
  if (!subjects.empty() && subjects.size() != y.size()) {
    throw std::invalid_argument("dataset: subject ids and labels differ in length");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.x = x.select_rows(indices);
  out.y.reserve(indices.size());
  for (auto i : indices) out.y.push_back(y[i]);
  if (!subjects.empty()) {
    out.subjects.reserve(indices.size());
    for (auto i : indices) out.subjects.push_back(subjects[i]);
  }
  return out;
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

}  // namespace tagrade::ml
