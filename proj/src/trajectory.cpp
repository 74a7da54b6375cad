#include "trace/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trace {

const DepthLogits* PositionDepthLogits::at_depth(int d) const {
  for (const auto& rec : depths) {
    if (rec.depth == d) return &rec;
  }
  return nullptr;
}

void validate(const CandidateTrajectory& t) {
  auto fail = [&](const char* field, const std::string& what) {
    throw ValidationError(t.item_id, field, what);
  };

  if (t.item_id.empty()) fail("item_id", "empty item_id");
  const std::size_t n = t.scores.rows();
  if (n < 2) fail("n", "need at least 2 candidates");
  if (t.depth < 2) fail("L", "depth must be >= 2");
  if (t.scores.cols() != static_cast<std::size_t>(t.depth) + 1) fail("S", "S must have L+1 columns");

  for (double s : t.scores.data()) {
    if (!std::isfinite(s)) fail("S", "non-finite log-probability");
    if (s > 0.0) fail("S", "log-probability > 0");
  }

  if (t.candidate_texts.size() != n) fail("candidate_texts", "expected one text per candidate");
  if (t.candidate_token_counts.size() != n) {
    fail("candidate_token_counts", "expected one token count per candidate");
  }
  for (int m : t.candidate_token_counts) {
    if (m < 1) fail("candidate_token_counts", "token count must be >= 1");
  }

  if (t.truthful_indices) {
    const auto& idx = *t.truthful_indices;
    if (idx.empty()) fail("truthful_indices", "must be non-empty when present");
    if (idx.size() >= n) fail("truthful_indices", "must be a strict subset of the candidates");
    std::set<int> seen;
    for (int i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) fail("truthful_indices", "index out of range");
      if (!seen.insert(i).second) fail("truthful_indices", "duplicate index");
    }
  }
}

void validate(const ArchiveItem& item) {
  const auto& t = item.trajectory;
  validate(t);
  if (item.logits.empty()) return;

  auto fail = [&](const std::string& what) {
    throw ValidationError(t.item_id, "position_depth_logits", what);
  };

  const std::size_t n = t.candidate_count();
  // positions_seen[i] collects the positions recorded for candidate i
  std::vector<std::set<int>> positions_seen(n);
  std::size_t topk_size = item.logits.front().depths.empty() ? 0 : item.logits.front().depths.front().topk_ids.size();

  for (const auto& rec : item.logits) {
    if (rec.candidate_index < 0 || static_cast<std::size_t>(rec.candidate_index) >= n) {
      fail("candidate_index out of range");
    }
    const int m = t.candidate_token_counts[rec.candidate_index];
    if (rec.position < 1 || rec.position > m) fail("position outside 1..m_i");
    if (!positions_seen[rec.candidate_index].insert(rec.position).second) fail("duplicate position record");
    if (rec.depths.empty()) fail("position record without depth records");

    std::set<int> depths;
    for (const auto& d : rec.depths) {
      if (d.depth < 0 || d.depth > t.depth) fail("depth outside 0..L");
      if (!depths.insert(d.depth).second) fail("depth recorded twice");
      if (d.topk_ids.size() != d.topk_logits.size()) fail("topk_ids and topk_logits differ in length");
      if (d.topk_ids.size() != topk_size) fail("inconsistent top-k size across records");
      if (std::set<int>(d.topk_ids.begin(), d.topk_ids.end()).size() != d.topk_ids.size()) {
        fail("duplicate token in topk_ids");
      }
      if (!std::isfinite(d.logsumexp_full) || !std::isfinite(d.own_logit) || !all_finite(d.topk_logits)) {
        fail("non-finite logit");
      }
      if (d.own_logit > d.logsumexp_full) fail("own_logit exceeds logsumexp_full");
      for (double z : d.topk_logits) {
        if (z > d.logsumexp_full) fail("top-k logit exceeds logsumexp_full");
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (positions_seen[i].size() != static_cast<std::size_t>(t.candidate_token_counts[i])) {
      fail("candidate " + std::to_string(i) + " is missing continuation positions");
    }
  }
}

void validate_logit_layout(const ArchiveItem& item, std::span<const int> required_depths, int k) {
  const std::set<int> want(required_depths.begin(), required_depths.end());
  for (const auto& rec : item.logits) {
    std::set<int> have;
    for (const auto& d : rec.depths) {
      have.insert(d.depth);
      if (static_cast<int>(d.topk_ids.size()) != k) {
        throw ValidationError(item.trajectory.item_id, "position_depth_logits",
                              "top-k size " + std::to_string(d.topk_ids.size()) + " differs from cutoff k=" +
                                  std::to_string(k));
      }
    }
    if (have != want) {
      throw ValidationError(item.trajectory.item_id, "position_depth_logits",
                            "depth set does not match the scorer's anchor/feature/final depths");
    }
  }
}

}  // namespace trace
