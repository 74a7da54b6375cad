#include "trace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trace/geometry.hpp"
#include "trace/hyperparameters.hpp"
#include "trace/scorer.hpp"

namespace trace::synthetic {

namespace {

using Logits = std::vector<double>;

struct Rng {
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  std::mt19937_64 gen;
};

Logits random_logits(Rng& rng, int vocab, double sd) {
  Logits z(static_cast<std::size_t>(vocab));
  for (double& x : z) x = rng.normal(sd);
  return z;
}

DepthLogits record_at(int depth, const Logits& z, int own, int k) {
  std::vector<int> ids(z.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return z[a] > z[b]; });
  ids.resize(static_cast<std::size_t>(k));
  DepthLogits d;
  d.depth = depth;
  d.topk_ids = ids;
  for (int v : ids) d.topk_logits.push_back(z[v]);
  d.logsumexp_full = logsumexp(z);
  d.own_logit = z[own];
  return d;
}

// logits[i][r][l] for candidate i, position r, depth l.
using Tensor = std::vector<std::vector<std::vector<Logits>>>;

ArchiveItem assemble(const std::string& id, const std::string& bench, int L, int k, const Tensor& logits,
                     const std::vector<std::vector<int>>& own, std::vector<int> truthful) {
  const std::size_t n = logits.size();
  const auto depths = scorer_depths(L, ScorerConstants{}).required();

  ArchiveItem item;
  auto& t = item.trajectory;
  t.item_id = id;
  t.benchmark_id = bench;
  t.depth = L;
  t.scores = Matrix(n, static_cast<std::size_t>(L) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = logits[i].size();
    t.candidate_texts.push_back("candidate " + std::to_string(i));
    t.candidate_token_counts.push_back(static_cast<int>(m));
    for (int l = 0; l <= L; ++l) {
      double sum = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        const auto& z = logits[i][r][l];
        sum += z[own[i][r]] - logsumexp(z);
      }
      t.scores(i, static_cast<std::size_t>(l)) = sum / static_cast<double>(m);
    }
    for (std::size_t r = 0; r < m; ++r) {
      PositionDepthLogits p;
      p.candidate_index = static_cast<int>(i);
      p.position = static_cast<int>(r) + 1;
      p.own_token_id = own[i][r];
      for (int d : depths) p.depths.push_back(record_at(d, logits[i][r][d], own[i][r], k));
      item.logits.push_back(std::move(p));
    }
  }
  std::sort(truthful.begin(), truthful.end());
  t.truthful_indices = std::move(truthful);
  return item;
}

std::vector<int> draw_truthful(Rng& rng, int n) {
  std::vector<int> out{rng.integer(0, n - 1)};
  if (n >= 4 && rng.uniform(0, 1) < 0.3) {
    int second = rng.integer(0, n - 1);
    if (second != out[0]) out.push_back(second);
  }
  return out;
}

// Random walk over depth; `mid` layers share one vector when rank_one is set.
ArchiveItem mixed_item(Rng& rng, const CorpusSpec& spec, const std::string& id, const std::string& bench,
                       bool rank_one) {
  const int L = spec.depth;
  const MidWindow mid = mid_window(L, HyperParameters{});
  const int n = rng.integer(2, 5);
  Tensor logits(n);
  std::vector<std::vector<int>> own(n);
  for (int i = 0; i < n; ++i) {
    const int m = rng.integer(1, 3);
    for (int r = 0; r < m; ++r) {
      const int token = rng.integer(0, spec.vocab - 1);
      own[i].push_back(token);
      std::vector<Logits> by_depth;
      Logits z = random_logits(rng, spec.vocab, 1.5);
      const double drift = rng.normal(0.6);
      for (int l = 0; l <= L; ++l) {
        if (l > 0) {
          for (double& x : z) x += rng.normal(0.35);
          z[token] += drift;
        }
        if (rank_one && l > mid.first && l < mid.end) {
          by_depth.push_back(by_depth.back());
          continue;
        }
        by_depth.push_back(z);
      }
      logits[i].push_back(std::move(by_depth));
    }
  }
  return assemble(id, bench, L, spec.topk, logits, own, draw_truthful(rng, n));
}

// A candidate that dominates the mid window loses a near-uniform final layer
// to another one: the pattern the candidate-space gate is meant to catch.
ArchiveItem late_flip_item(Rng& rng, const CorpusSpec& spec, const std::string& id, const std::string& bench) {
  const int L = spec.depth;
  const MidWindow mid = mid_window(L, HyperParameters{});
  const int n = rng.integer(3, 5);
  const int mid_leader = rng.integer(0, n - 1);
  const int final_leader = (mid_leader + rng.integer(1, n - 1)) % n;
  Tensor logits(n);
  std::vector<std::vector<int>> own(n);
  for (int i = 0; i < n; ++i) {
    const int token = rng.integer(0, spec.vocab - 1);
    own[i].push_back(token);
    std::vector<Logits> by_depth;
    const Logits z = random_logits(rng, spec.vocab, 1.0);
    for (int l = 0; l <= L; ++l) {
      Logits zl = z;
      for (double& x : zl) x += rng.normal(0.3);
      if (l == L) {
        zl[token] = 4.0 + (i == final_leader ? 0.05 : rng.uniform(-0.04, 0.0));
      } else if (mid.contains(l)) {
        zl[token] = (i == mid_leader ? 9.0 : 2.0) + rng.uniform(-1.0, 1.0);
      } else {
        zl[token] = rng.uniform(0.0, 3.0);
      }
      by_depth.push_back(std::move(zl));
    }
    logits[i].push_back(std::move(by_depth));
  }
  return assemble(id, bench, L, spec.topk, logits, own, draw_truthful(rng, n));
}

// One candidate stays on top at every depth, so the decisive layer never
// disagrees with the final layer.
ArchiveItem steady_leader_item(Rng& rng, const CorpusSpec& spec, const std::string& id, const std::string& bench) {
  const int L = spec.depth;
  const int n = rng.integer(3, 5);
  const int leader = rng.integer(0, n - 1);
  Tensor logits(n);
  std::vector<std::vector<int>> own(n);
  for (int i = 0; i < n; ++i) {
    const int m = rng.integer(1, 2);
    for (int r = 0; r < m; ++r) {
      const int token = rng.integer(0, spec.vocab - 1);
      own[i].push_back(token);
      std::vector<Logits> by_depth;
      Logits z = random_logits(rng, spec.vocab, 1.0);
      for (int l = 0; l <= L; ++l) {
        Logits zl = z;
        for (double& x : zl) x += rng.normal(0.5);
        zl[token] = (i == leader ? 12.0 : rng.uniform(-2.0, 2.0));
        by_depth.push_back(std::move(zl));
      }
      logits[i].push_back(std::move(by_depth));
    }
  }
  return assemble(id, bench, L, spec.topk, logits, own, draw_truthful(rng, n));
}

// Single-token candidates sharing one prediction position. Every depth below
// L reads out the same vector with all candidate tokens tied at the top, so
// the trajectory is flat there. At L the candidate tokens drop to distinct
// lower log-probabilities, which leaves their scorer evidence at zero: all get
// the same mixing weight and t becomes a positive contraction of b.
ArchiveItem contracted_item(Rng& rng, const CorpusSpec& spec, const std::string& id, const std::string& bench) {
  const int L = spec.depth;
  const int n = rng.integer(2, 5);

  std::vector<int> tokens(static_cast<std::size_t>(spec.vocab - 1));
  std::iota(tokens.begin(), tokens.end(), 1);  // token 0 is the final-layer sink
  std::shuffle(tokens.begin(), tokens.end(), rng.gen);
  tokens.resize(static_cast<std::size_t>(n));

  Logits u = random_logits(rng, spec.vocab, 1.0);
  const double c = *std::max_element(u.begin(), u.end()) + 3.0;
  for (int v : tokens) u[v] = c;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.gen);
  Logits zL = u;
  for (int i = 0; i < n; ++i) zL[tokens[i]] = c - 0.5 - 0.5 * order[i] - rng.uniform(0.0, 0.2);
  zL[0] = logsumexp(u) + 0.5;

  Tensor logits(n);
  std::vector<std::vector<int>> own(n);
  for (int i = 0; i < n; ++i) {
    own[i] = {tokens[i]};
    std::vector<Logits> by_depth(static_cast<std::size_t>(L), u);
    by_depth.push_back(zL);
    logits[i].push_back(std::move(by_depth));
  }
  return assemble(id, bench, L, spec.topk, logits, own, draw_truthful(rng, n));
}

}  // namespace

std::vector<ArchiveItem> generate_corpus(const CorpusSpec& spec) {
  if (spec.topk > spec.vocab) throw ConfigError("synthetic corpus: topk exceeds vocabulary");
  Rng rng(spec.seed);
  const HyperParameters theta;
  std::vector<ArchiveItem> out;
  out.reserve(spec.items);
  for (std::size_t k = 0; k < spec.items; ++k) {
    const std::string id = "syn-" + std::to_string(k);
    const std::string& bench = spec.benchmarks[k % spec.benchmarks.size()];
    const bool rank_one = rng.uniform(0.0, 1.0) < spec.scalar_share;
    if (spec.mode == CorpusMode::mixed) {
      if (!rank_one && rng.uniform(0.0, 1.0) < 0.3) {
        out.push_back(late_flip_item(rng, spec, id, bench));
      } else {
        out.push_back(mixed_item(rng, spec, id, bench, rank_one));
      }
    } else if (rank_one) {
      out.push_back(contracted_item(rng, spec, id, bench));
    } else {
      // redraw until the mid window is genuinely multi-directional
      for (;;) {
        auto item = steady_leader_item(rng, spec, id, bench);
        const auto mid = mid_window(spec.depth, theta);
        if (d_eff(center(item.trajectory, mid)) > theta.tau_dim) {
          out.push_back(std::move(item));
          break;
        }
      }
    }
  }
  return out;
}

ModelStatsDocument generate_model_stats(const std::string& model_id, int depth, long vocab, double target_I_M,
                                        std::uint64_t seed) {
  Rng rng(seed);
  auto norms = [&](int rows) {
    std::vector<double> v(static_cast<std::size_t>(rows));
    for (double& x : v) x = rng.uniform(0.5, 1.5);
    return v;
  };
  ModelStatsDocument doc;
  auto& s = doc.stats;
  s.model_id = model_id;
  s.depth = depth;
  s.vocab_size = vocab;
  s.row_norms_K_e = norms(64);
  s.row_norms_V_e = norms(64);
  s.row_norms_V_m = norms(64);
  s.row_norms_O_m = norms(64);
  s.final_norm_dim = 64;
  const double phi_K = rcv(s.row_norms_K_e);
  const double phi_V = rcv(s.row_norms_V_e) / rcv(s.row_norms_V_m);
  const double phi_O = rcv(s.row_norms_O_m);
  s.final_norm_l1 = target_I_M * phi_K * phi_V / phi_O * s.final_norm_dim;
  return doc;
}

}  // namespace trace::synthetic
