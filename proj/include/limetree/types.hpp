#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace limetree {

/// A binary vector in the interpretable space {0,1}^d. Bit i = 1 keeps
/// component i of the explained instance, 0 occludes or removes it.
///
/// The textual form writes bit 0 first, so "011" has bit 0 cleared. Integer
/// indices follow the same convention: bit 0 is the most significant digit,
/// which makes ascending index order equal to ascending string order.
class InterpretablePoint {
 public:
  InterpretablePoint() = default;
  explicit InterpretablePoint(std::vector<std::uint8_t> bits);

  static InterpretablePoint ones(std::size_t d);
  static InterpretablePoint zeros(std::size_t d);
  static InterpretablePoint from_string(std::string_view bits);
  static InterpretablePoint from_index(std::uint64_t index, std::size_t d);

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool value);

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count_ones() const noexcept;
  bool all_ones() const noexcept { return count_ones() == size(); }

  std::string to_string() const;
  std::uint64_t to_index() const;

  auto operator<=>(const InterpretablePoint&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

std::size_t hamming_distance(const InterpretablePoint& a, const InterpretablePoint& b);

/// Dense row-major matrix of doubles. Rows are samples, columns are classes.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  /// Rows of this matrix restricted to the given columns, in the given order.
  Matrix select_columns(std::span<const std::size_t> columns) const;
  std::vector<std::vector<double>> to_rows() const;

  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace limetree
