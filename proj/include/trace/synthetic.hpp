#pragma once

// Seeded synthetic corpora with internally consistent trajectories and sparse
// logits: every S entry is recomputed from the same full-vocabulary logits the
// stored top-k records are cut from.

#include <cstdint>
#include <string>
#include <vector>

#include "trace/invariant.hpp"
#include "trace/trajectory.hpp"

namespace trace::synthetic {

enum class CorpusMode {
  // Random walks over depth; roughly half the items have a rank-one mid
  // window. Reaches every regime.
  mixed,
  // Built so that, under a mix-branch model and the default hyperparameters,
  // every item abstains: multi-directional items keep one candidate on top at
  // every depth, rank-one items get a scorer output that is a compressed copy
  // of b.
  abstaining,
};

struct CorpusSpec {
  std::size_t items = 200;
  int depth = 12;
  int vocab = 120;
  int topk = 50;
  std::uint64_t seed = 1;
  CorpusMode mode = CorpusMode::mixed;
  double scalar_share = 0.5;
  std::vector<std::string> benchmarks{"synthetic-a", "synthetic-b"};
};

std::vector<ArchiveItem> generate_corpus(const CorpusSpec& spec);

// Random row norms with final_norm_l1 chosen so that I(M) = target_I_M.
ModelStatsDocument generate_model_stats(const std::string& model_id, int depth, long vocab, double target_I_M,
                                        std::uint64_t seed);

}  // namespace trace::synthetic
