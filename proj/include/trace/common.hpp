#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trace {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record parsed fine but violates a type invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string item_id, std::string field, const std::string& what);
  const std::string& item_id() const { return item_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string item_id_;
  std::string field_;
};

// Hyperparameters that cannot produce a usable configuration (e.g. empty window).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or undefined arithmetic (zero mean, zero divisor).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Inputs missing for the path an item takes through the engine.
class InputError : public Error {
 public:
  InputError(std::string item_id, const std::string& what);
  const std::string& item_id() const { return item_id_; }

 private:
  std::string item_id_;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles
// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const;

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Vector helpers shared by every module. All argmax-style helpers break ties
// toward the lowest index.
// ---------------------------------------------------------------------------

std::size_t argmax(std::span<const double> v);

// u_(1) - u_(2) for the sorted components; 0 when fewer than two entries.
double top_two_margin(std::span<const double> v);

double logsumexp(std::span<const double> v);

// log softmax(v), computed with the max subtracted first.
std::vector<double> log_softmax(std::span<const double> v);

bool all_finite(std::span<const double> v);

// floor(f * n) and ceil(f * n), snapping products that land within rounding
// noise of an integer (e.g. 0.29 * 100 = 28.999999999999996) onto it.
long floor_fraction(double f, long n);
long ceil_fraction(double f, long n);

// printf "%.17g": the fixed 17-significant-digit form used by every writer.
std::string format_double(double x);

}  // namespace trace
