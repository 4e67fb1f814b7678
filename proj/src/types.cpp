#include "limetree/types.hpp"

#include <algorithm>

#include "limetree/error.hpp"

namespace limetree {

InterpretablePoint::InterpretablePoint(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) require(b <= 1, "interpretable point components must be 0 or 1");
}

InterpretablePoint InterpretablePoint::ones(std::size_t d) {
  InterpretablePoint p;
  p.bits_.assign(d, 1);
  return p;
}

InterpretablePoint InterpretablePoint::zeros(std::size_t d) {
  InterpretablePoint p;
  p.bits_.assign(d, 0);
  return p;
}

InterpretablePoint InterpretablePoint::from_string(std::string_view bits) {
  std::vector<std::uint8_t> out;
  out.reserve(bits.size());
  for (char c : bits) {
    require(c == '0' || c == '1', "bitstring may only contain '0' and '1'");
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return InterpretablePoint(std::move(out));
}

InterpretablePoint InterpretablePoint::from_index(std::uint64_t index, std::size_t d) {
  require(d <= 64, "index encoding supports at most 64 dimensions");
  InterpretablePoint p = zeros(d);
  for (std::size_t i = 0; i < d; ++i) p.bits_[i] = static_cast<std::uint8_t>((index >> (d - 1 - i)) & 1U);
  return p;
}

void InterpretablePoint::set(std::size_t i, bool value) {
  require(i < bits_.size(), "bit index out of range");
  bits_[i] = value ? 1 : 0;
}

std::size_t InterpretablePoint::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string InterpretablePoint::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

std::uint64_t InterpretablePoint::to_index() const {
  require(bits_.size() <= 64, "index encoding supports at most 64 dimensions");
  std::uint64_t index = 0;
  for (auto b : bits_) index = (index << 1) | b;
  return index;
}

std::size_t hamming_distance(const InterpretablePoint& a, const InterpretablePoint& b) {
  require(a.size() == b.size(), "hamming distance needs points of equal length");
  std::size_t distance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) distance += a[i] != b[i];
  return distance;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m.cols_, "ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  require(c < cols_, "column out of range");
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::select_columns(std::span<const std::size_t> columns) const {
  Matrix out(rows_, columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    require(columns[j] < cols_, "column out of range");
    for (std::size_t r = 0; r < rows_; ++r) out(r, j) = (*this)(r, columns[j]);
  }
  return out;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
  return out;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unsupported_instance: return "unsupported-instance";
    case ErrorCode::capacity: return "capacity-error";
    case ErrorCode::transport: return "transport-error";
    case ErrorCode::protocol: return "protocol-error";
    case ErrorCode::degenerate_fit: return "degenerate-fit";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::not_found: return "not-found";
  }
  return "unknown";
}

}  // namespace limetree
