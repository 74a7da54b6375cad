#pragma once

// Minimal single-line JSON object writer. Keys come out in call order and
// every double is printed with 17 significant digits, so identical values
// always serialize to identical bytes. Non-finite doubles, which JSON cannot
// carry as numbers, are written as the strings "Infinity", "-Infinity", "NaN".

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "trace/common.hpp"

namespace trace::detail {

inline std::string json_number(double x) {
  if (std::isnan(x)) return "\"NaN\"";
  if (std::isinf(x)) return x > 0 ? "\"Infinity\"" : "\"-Infinity\"";
  return format_double(x);
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

// Inverse of json_number for values read back through nlohmann.
inline double json_to_double(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "Infinity") return INFINITY;
    if (s == "-Infinity") return -INFINITY;
    if (s == "NaN") return NAN;
  }
  throw std::invalid_argument("expected a number");
}

class JsonWriter {
 public:
  JsonWriter& field(const std::string& key, double v) { return raw_field(key, json_number(v)); }
  JsonWriter& field(const std::string& key, int v) { return raw_field(key, std::to_string(v)); }
  JsonWriter& field(const std::string& key, long v) { return raw_field(key, std::to_string(v)); }
  JsonWriter& field(const std::string& key, std::size_t v) { return raw_field(key, std::to_string(v)); }
  JsonWriter& field(const std::string& key, bool v) { return raw_field(key, v ? "true" : "false"); }
  JsonWriter& field(const std::string& key, const std::string& v) { return raw_field(key, json_string(v)); }
  JsonWriter& field(const std::string& key, const char* v) { return raw_field(key, json_string(v)); }

  JsonWriter& field(const std::string& key, const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += json_number(v[i]);
    }
    return raw_field(key, out + "]");
  }
  JsonWriter& field(const std::string& key, const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(v[i]);
    }
    return raw_field(key, out + "]");
  }
  JsonWriter& field(const std::string& key, const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += json_string(v[i]);
    }
    return raw_field(key, out + "]");
  }
  JsonWriter& null_field(const std::string& key) { return raw_field(key, "null"); }

  // `raw` must already be valid JSON.
  JsonWriter& raw_field(const std::string& key, const std::string& raw) {
    if (!body_.empty()) body_ += ',';
    body_ += json_string(key);
    body_ += ':';
    body_ += raw;
    return *this;
  }

  std::string str() const { return "{" + body_ + "}"; }

 private:
  std::string body_;
};

inline std::string json_array(const std::vector<std::string>& raw_items) {
  std::string out = "[";
  for (std::size_t i = 0; i < raw_items.size(); ++i) {
    if (i) out += ',';
    out += raw_items[i];
  }
  return out + "]";
}

}  // namespace trace::detail
