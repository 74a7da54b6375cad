#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trace/common.hpp"

namespace trace {

// Cross-layer candidate trajectory S(x): row i is candidate i, column l is the
// length-normalized log-probability of that candidate read out at depth l.
// Column 0 is the embedding readout, column L the final layer (the base
// score vector b).
struct CandidateTrajectory {
  std::string item_id;
  std::string benchmark_id;
  int depth = 0;  // L, the number of transformer blocks
  Matrix scores;  // n x (L + 1)
  std::vector<std::string> candidate_texts;
  std::vector<int> candidate_token_counts;
  std::optional<std::vector<int>> truthful_indices;

  std::size_t candidate_count() const { return scores.rows(); }

  // Candidate scores at one depth (column l of S).
  std::vector<double> layer(int l) const { return scores.column(static_cast<std::size_t>(l)); }
  std::vector<double> base() const { return layer(depth); }

  bool operator==(const CandidateTrajectory&) const = default;
};

// Sparse logit-lens readout at one depth for one continuation position.
struct DepthLogits {
  int depth = 0;
  std::vector<int> topk_ids;
  std::vector<double> topk_logits;  // aligned with topk_ids
  double logsumexp_full = 0.0;      // over the full vocabulary
  double own_logit = 0.0;           // logit of the position's own token

  bool operator==(const DepthLogits&) const = default;
};

// Everything the trajectory scorer needs about one continuation position r
// (1-based) of one candidate.
struct PositionDepthLogits {
  int candidate_index = 0;
  int position = 1;
  int own_token_id = 0;
  std::vector<DepthLogits> depths;

  const DepthLogits* at_depth(int depth) const;

  bool operator==(const PositionDepthLogits&) const = default;
};

// One line of a trajectory archive.
struct ArchiveItem {
  CandidateTrajectory trajectory;
  std::vector<PositionDepthLogits> logits;  // empty when the item carries none

  bool operator==(const ArchiveItem&) const = default;
};

// Throws ValidationError naming the item and the offending field.
void validate(const CandidateTrajectory& t);
void validate(const ArchiveItem& item);

// Checks that every position record covers `required_depths` exactly and
// holds exactly `k` top-k entries; used once the model's L and |V| are known.
void validate_logit_layout(const ArchiveItem& item, std::span<const int> required_depths, int k);

}  // namespace trace
