#include "trace/archive.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_writer.hpp"

namespace trace {

using nlohmann::json;

namespace {

const std::set<std::string> kItemKeys = {"schema",
                                         "item_id",
                                         "benchmark_id",
                                         "n",
                                         "L",
                                         "S",
                                         "candidate_texts",
                                         "candidate_token_counts",
                                         "truthful_indices",
                                         "position_depth_logits"};
const std::set<std::string> kPositionKeys = {"candidate_index", "position", "own_token_id", "depths"};
const std::set<std::string> kDepthKeys = {"depth", "topk_ids", "topk_logits", "logsumexp_full", "own_logit"};

void check_keys(const json& obj, const std::set<std::string>& known, std::size_t line, const char* where) {
  if (!obj.is_object()) throw ParseError(line, std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ParseError(line, std::string("unknown key '") + key + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& v, const char* key, std::size_t line) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParseError(line, std::string("field '") + key + "' has the wrong type");
  }
}

DepthLogits parse_depth(const json& d, std::size_t line) {
  check_keys(d, kDepthKeys, line, "depth record");
  DepthLogits out;
  out.depth = get_as<int>(require(d, "depth", line), "depth", line);
  out.topk_ids = get_as<std::vector<int>>(require(d, "topk_ids", line), "topk_ids", line);
  out.topk_logits = get_as<std::vector<double>>(require(d, "topk_logits", line), "topk_logits", line);
  out.logsumexp_full = get_as<double>(require(d, "logsumexp_full", line), "logsumexp_full", line);
  out.own_logit = get_as<double>(require(d, "own_logit", line), "own_logit", line);
  return out;
}

PositionDepthLogits parse_position(const json& p, std::size_t line) {
  check_keys(p, kPositionKeys, line, "position record");
  PositionDepthLogits out;
  out.candidate_index = get_as<int>(require(p, "candidate_index", line), "candidate_index", line);
  out.position = get_as<int>(require(p, "position", line), "position", line);
  out.own_token_id = get_as<int>(require(p, "own_token_id", line), "own_token_id", line);
  const json& depths = require(p, "depths", line);
  if (!depths.is_array()) throw ParseError(line, "field 'depths' must be an array");
  for (const auto& d : depths) out.depths.push_back(parse_depth(d, line));
  return out;
}

std::string serialize_depth(const DepthLogits& d) {
  detail::JsonWriter w;
  w.field("depth", d.depth)
      .field("topk_ids", d.topk_ids)
      .field("topk_logits", d.topk_logits)
      .field("logsumexp_full", d.logsumexp_full)
      .field("own_logit", d.own_logit);
  return w.str();
}

std::string serialize_position(const PositionDepthLogits& p) {
  std::vector<std::string> depths;
  depths.reserve(p.depths.size());
  for (const auto& d : p.depths) depths.push_back(serialize_depth(d));
  detail::JsonWriter w;
  w.field("candidate_index", p.candidate_index)
      .field("position", p.position)
      .field("own_token_id", p.own_token_id)
      .raw_field("depths", detail::json_array(depths));
  return w.str();
}

}  // namespace

ArchiveItem parse_archive_line(std::string_view text, std::size_t line) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed JSON: ") + e.what());
  }
  check_keys(doc, kItemKeys, line, "item record");
  if (get_as<std::string>(require(doc, "schema", line), "schema", line) != kTrajectorySchema) {
    throw ParseError(line, "unsupported schema version");
  }

  ArchiveItem item;
  auto& t = item.trajectory;
  t.item_id = get_as<std::string>(require(doc, "item_id", line), "item_id", line);
  t.benchmark_id = get_as<std::string>(require(doc, "benchmark_id", line), "benchmark_id", line);
  const int n = get_as<int>(require(doc, "n", line), "n", line);
  t.depth = get_as<int>(require(doc, "L", line), "L", line);
  auto flat = get_as<std::vector<double>>(require(doc, "S", line), "S", line);
  if (n < 0 || t.depth < 0 || flat.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(t.depth + 1)) {
    throw ParseError(line, "S has " + std::to_string(flat.size()) + " entries, expected n*(L+1)");
  }
  t.scores = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(t.depth + 1), std::move(flat));
  t.candidate_texts =
      get_as<std::vector<std::string>>(require(doc, "candidate_texts", line), "candidate_texts", line);
  t.candidate_token_counts =
      get_as<std::vector<int>>(require(doc, "candidate_token_counts", line), "candidate_token_counts", line);
  if (doc.contains("truthful_indices")) {
    t.truthful_indices = get_as<std::vector<int>>(doc["truthful_indices"], "truthful_indices", line);
  }
  if (doc.contains("position_depth_logits")) {
    const json& recs = doc["position_depth_logits"];
    if (!recs.is_array()) throw ParseError(line, "field 'position_depth_logits' must be an array");
    for (const auto& p : recs) item.logits.push_back(parse_position(p, line));
  }

  validate(item);
  return item;
}

std::vector<ArchiveItem> parse_trajectory_archive(std::string_view text) {
  std::vector<ArchiveItem> items;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      items.push_back(parse_archive_line(line, line_no));
    }
    start = end + 1;
  }
  return items;
}

std::vector<ArchiveItem> read_trajectory_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open archive '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_archive(ss.str());
}

std::string serialize_archive_item(const ArchiveItem& item) {
  const auto& t = item.trajectory;
  detail::JsonWriter w;
  w.field("schema", std::string(kTrajectorySchema))
      .field("item_id", t.item_id)
      .field("benchmark_id", t.benchmark_id)
      .field("n", t.candidate_count())
      .field("L", t.depth)
      .field("S", t.scores.data())
      .field("candidate_texts", t.candidate_texts)
      .field("candidate_token_counts", t.candidate_token_counts);
  if (t.truthful_indices) w.field("truthful_indices", *t.truthful_indices);
  if (!item.logits.empty()) {
    std::vector<std::string> recs;
    recs.reserve(item.logits.size());
    for (const auto& p : item.logits) recs.push_back(serialize_position(p));
    w.raw_field("position_depth_logits", detail::json_array(recs));
  }
  return w.str();
}

void write_trajectory_archive(const std::vector<ArchiveItem>& items, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write archive '" + path + "'");
  for (const auto& item : items) out << serialize_archive_item(item) << '\n';
  if (!out) throw Error("failed writing archive '" + path + "'");
}

}  // namespace trace
