#include "trace/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace trace {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

ValidationError::ValidationError(std::string item_id, std::string field, const std::string& what)
    : Error("item '" + item_id + "', field '" + field + "': " + what),
      item_id_(std::move(item_id)),
      field_(std::move(field)) {}

InputError::InputError(std::string item_id, const std::string& what)
    : Error("item '" + item_id + "': " + what), item_id_(std::move(item_id)) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data size does not match shape");
  }
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double top_two_margin(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double x : v) {
    if (x > first) {
      second = first;
      first = x;
    } else if (x > second) {
      second = x;
    }
  }
  return first - second;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<double> log_softmax(std::span<const double> v) {
  const double lse = logsumexp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

namespace {

constexpr double kSnap = 1e-9;

double snapped(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= kSnap * std::max(1.0, std::abs(x)) ? r : x;
}

}  // namespace

long floor_fraction(double f, long n) {
  return static_cast<long>(std::floor(snapped(f * static_cast<double>(n))));
}

long ceil_fraction(double f, long n) {
  return static_cast<long>(std::ceil(snapped(f * static_cast<double>(n))));
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace trace
