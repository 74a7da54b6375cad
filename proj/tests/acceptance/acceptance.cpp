// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "trace/archive.hpp"
#include "trace/engine.hpp"
#include "trace/evaluation.hpp"
#include "trace/geometry.hpp"
#include "trace/invariant.hpp"
#include "trace/master_grid.hpp"
#include "trace/operators.hpp"
#include "trace/scorer.hpp"
#include "trace/synthetic.hpp"

using namespace trace;

namespace {

// Tolerances and sizes.
constexpr int kPropMatrices = 10000;
constexpr double kPropSeconds = 10.0;
constexpr double kOracleRel = 1e-8;
constexpr double kBoundSlack = 1e-9;
constexpr double kSweepStep = 1e-3;
constexpr int kAffineDraws = 10000;
constexpr int kRcvDraws = 1000;
constexpr double kRcvRel = 1e-12;
constexpr double kMeanTol = 0.01;
constexpr double kBoundaryMargin = 0.05;
constexpr std::size_t kBootstrapB = 200000;
constexpr double kBootstrapLevel = 0.95;
constexpr std::uint64_t kBootstrapSeed = 20240601;
constexpr double kIntervalTol = 0.3;
constexpr double kStatsSeconds = 5.0;
constexpr std::size_t kAbstainItems = 1000;
constexpr double kScorerTol = 1e-9;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_argmax(const std::vector<double>& got, const std::vector<double>& ref) {
  const std::size_t a = argmax(got), r = argmax(ref);
  if (a == r) return true;
  return std::abs(ref[r] - ref[a]) <= 1e-9 * std::max(1.0, std::abs(ref[r]));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void proposition_and_oracle() {
  testing::RankControlledGenerator gen(7001);
  const auto t0 = std::chrono::steady_clock::now();
  int bound_bad = 0, binary_bad = 0, binary = 0, oracle_bad = 0;
  double worst_rel = 0;
  for (int k = 0; k < kPropMatrices; ++k) {
    const auto s = gen.next();
    const double d = d_eff(s.X);
    const int n = static_cast<int>(s.X.rows());
    if (!(d >= 1.0 - kBoundSlack && d <= s.rank + kBoundSlack && s.rank <= n - 1)) ++bound_bad;
    if (n == 2) {
      ++binary;
      if (std::abs(d - 1.0) > kBoundSlack) ++binary_bad;
    }
    const double o = testing::oracle_d_eff_svd(s.X);
    const double rel = std::abs(d - o) / o;
    worst_rel = std::max(worst_rel, rel);
    if (rel > kOracleRel) ++oracle_bad;
  }
  const double secs = seconds_since(t0);
  report("proposition_1", bound_bad == 0 && binary_bad == 0 && secs < kPropSeconds,
         fmt("%.0f matrices, %.0f bound violations, %.0f/%.0f binary cases off 1", kPropMatrices, bound_bad,
             binary_bad, binary) +
             fmt(", %.2f s", secs));
  report("d_eff_oracle_equivalence", oracle_bad == 0,
         fmt("worst relative gap %.3g over %.0f matrices", worst_rel, kPropMatrices));
}

void theorem_one() {
  const std::vector<double> b{3, 2, 1}, t{2, 3, 1};
  const auto reach = testing::oracle_scalar_sweep(b, t, -100.0, 100.0, kSweepStep);
  const bool sweep_ok = reach.count(2) == 0 && reach == std::set<std::size_t>{0, 1};

  // q = (1, 1, 5) up to a shift at layer 5; every other column is b = (-3, -4, -5).
  CandidateTrajectory item;
  item.item_id = "theorem";
  item.depth = 8;
  item.scores = Matrix(3, 9);
  for (int l = 0; l <= 8; ++l) {
    const double col[3] = {-3.0, -4.0, -5.0};
    for (int i = 0; i < 3; ++i) item.scores(i, l) = col[i];
  }
  item.scores(0, 5) = 1.0 - 6.0;
  item.scores(1, 5) = 1.0 - 6.0;
  item.scores(2, 5) = 5.0 - 6.0;
  item.candidate_texts.assign(3, "c");
  item.candidate_token_counts.assign(3, 1);
  EngineConfig cfg;
  cfg.I_M = 4.0;
  const auto v = run_item(item, {}, cfg);
  const bool engine_ok = v.regime == Regime::md_override && v.chosen_index == 2;

  std::mt19937_64 rng(7002);
  std::uniform_real_distribution<double> u(-10, 0), c(-5, 5);
  int draws = 0, bad = 0;
  while (draws < kAffineDraws) {
    const std::size_t n = 2 + draws % 8;
    std::vector<double> bb(n), tt(n);
    for (auto& x : bb) x = u(rng);
    for (auto& x : tt) x = u(rng);
    const double alpha = c(rng), beta = c(rng), gamma = c(rng);
    if (!(alpha + beta > 1e-6)) continue;
    std::vector<double> lhs(n);
    for (std::size_t i = 0; i < n; ++i) lhs[i] = alpha * bb[i] + beta * tt[i] + gamma;
    if (!same_argmax(scalar_mix(bb, tt, beta / (alpha + beta)), lhs)) ++bad;
    ++draws;
  }
  report("theorem_1", sweep_ok && engine_ok && bad == 0,
         fmt("sweep reaches %.0f of 3 candidates, engine picks %.0f via ", static_cast<double>(reach.size()),
             static_cast<double>(v.chosen_index)) +
             std::string(to_string(v.regime)) + fmt(", %.0f/%.0f affine draws disagree", bad, kAffineDraws));
}

void rcv_lemma() {
  std::mt19937_64 rng(7003);
  std::uniform_real_distribution<double> u(0.0, 5.0), a(0.01, 100.0);
  int scale_bad = 0, zero_bad = 0;
  for (int k = 0; k < kRcvDraws; ++k) {
    std::vector<double> v(2 + k % 60);
    for (double& x : v) x = u(rng);
    const double base = rcv(v);
    if (!(base > 0)) ++zero_bad;
    const double alpha = a(rng);
    for (double& x : v) x *= alpha;
    if (std::abs(rcv(v) - base) > kRcvRel * base) ++scale_bad;
    const std::vector<double> flat(2 + k % 60, u(rng) + 0.1);
    if (rcv(flat) != 0.0) ++zero_bad;
  }
  const double ex = rcv(std::vector<double>{1.0, 2.0, 3.0});
  report("rcv_lemma", scale_bad == 0 && zero_bad == 0 && std::abs(ex - 0.408248) <= 1e-6,
         fmt("%.0f scale failures, %.0f zero-iff-equal failures, rcv(1,2,3) = %.6f", scale_bad, zero_bad, ex));
}

std::vector<CellResult> fixture() {
  return cells_from_fixture(load_master_fixture(std::string(TRACE_SOURCE_DIR) + "/data/master_grid.csv"));
}

void fixture_reproduction() {
  const auto grid = load_master_fixture(std::string(TRACE_SOURCE_DIR) + "/data/master_grid.csv");
  const auto cells = cells_from_fixture(grid);
  const auto s = aggregate_grid(cells);
  bool partition = true;
  for (const auto& g : grid) {
    if (std::abs(g.I_M - 1.0) <= kBoundaryMargin) partition = false;
    if ((g.I_M > 1.0) != (g.branch == "mix")) partition = false;
  }
  const bool ok = std::abs(s.mean_mc1_delta - 12.26) <= kMeanTol && std::abs(s.mean_mc2_delta - 8.65) <= kMeanTol &&
                  s.regressions_mc1 == 0 && s.regressions_mc2 == 0 && std::abs(s.max_mc1_delta - 47.20) < 1e-9 &&
                  std::abs(s.max_mc2_delta - 43.38) < 1e-9 && partition;
  report("fixture_reproduction", ok,
         fmt("mean dMC1 %.4f, mean dMC2 %.4f, max %.2f / %.2f", s.mean_mc1_delta, s.mean_mc2_delta, s.max_mc1_delta,
             s.max_mc2_delta) +
             fmt(", regressions %.0f+%.0f/45, branch partition ", static_cast<double>(s.regressions_mc1),
                 static_cast<double>(s.regressions_mc2)) +
             (partition ? "ok" : "broken"));
}

void appendix_statistics() {
  const auto cells = fixture();
  std::vector<double> d1, d2;
  for (const auto& c : cells) {
    d1.push_back(c.mc1_delta());
    d2.push_back(c.mc2_delta());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto i1 = bootstrap_ci(d1, kBootstrapB, kBootstrapLevel, kBootstrapSeed);
  const auto i2 = bootstrap_ci(d2, kBootstrapB, kBootstrapLevel, kBootstrapSeed);
  const double p = sign_test(d1);
  const double secs = seconds_since(t0);
  const double closed = std::ldexp(1.0, -45);
  const double ulp = std::nextafter(closed, 1.0) - closed;
  const bool ok = std::abs(i1.lo - 9.25) <= kIntervalTol && std::abs(i1.hi - 15.64) <= kIntervalTol &&
                  std::abs(i2.lo - 6.22) <= kIntervalTol && std::abs(i2.hi - 11.52) <= kIntervalTol &&
                  std::abs(p - closed) <= ulp && secs < kStatsSeconds;
  report("appendix_statistics", ok,
         fmt("MC1 [%.2f, %.2f], MC2 [%.2f, %.2f]", i1.lo, i1.hi, i2.lo, i2.hi) +
             fmt(", sign test %.4g, %.2f s", p, secs));
}

void abstention_identity() {
  synthetic::CorpusSpec spec;
  spec.items = kAbstainItems;
  spec.mode = synthetic::CorpusMode::abstaining;
  spec.seed = 7004;
  const auto items = synthetic::generate_corpus(spec);
  EngineConfig cfg;
  cfg.I_M = 4.0;
  const auto verdicts = run_batch(items, cfg, 4);
  std::size_t agree = 0, abstained = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (verdicts[k].chosen_index == argmax(items[k].trajectory.base())) ++agree;
    if (verdicts[k].regime == Regime::md_abstain || verdicts[k].regime == Regime::scalar_abstain) ++abstained;
  }
  report("abstention_identity", agree == items.size() && abstained == items.size(),
         fmt("%.0f/%.0f abstained, %.0f/%.0f match the base argmax", static_cast<double>(abstained),
             static_cast<double>(items.size()), static_cast<double>(agree), static_cast<double>(items.size())));
}

void determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "trace_acceptance";
  std::filesystem::create_directories(dir);
  synthetic::CorpusSpec spec;
  spec.items = 300;
  spec.seed = 7005;
  write_trajectory_archive(synthetic::generate_corpus(spec), (dir / "archive.jsonl").string());

  auto pipeline = [&](const std::string& tag, int jobs) {
    const auto items = read_trajectory_archive((dir / "archive.jsonl").string());
    EngineConfig cfg;
    cfg.I_M = 4.0;
    const auto verdicts = run_batch(items, cfg, jobs);
    write_verdicts(verdicts, (dir / ("verdicts_" + tag + ".jsonl")).string());
    const auto cells = evaluate_cells("synthetic", items, read_verdicts((dir / ("verdicts_" + tag + ".jsonl")).string()));
    write_text_file((dir / ("cells_" + tag + ".csv")).string(), cells_csv(cells));
    return slurp((dir / ("verdicts_" + tag + ".jsonl")).string()) + slurp((dir / ("cells_" + tag + ".csv")).string());
  };
  const auto a = pipeline("a", 1);
  const auto b = pipeline("b", 1);
  const auto c = pipeline("c", 8);
  std::filesystem::remove_all(dir);
  report("determinism", !a.empty() && a == b && a == c,
         fmt("%.0f bytes, repeat run ", static_cast<double>(a.size())) + (a == b ? "identical" : "differs") +
             ", jobs 1 vs 8 " + (a == c ? "identical" : "differ"));
}

void scorer_suite() {
  ScorerConstants c;
  const bool midpoint = adaptive_alpha(0.5, c.lambda0, c.gamma_sig) == 0.75;
  bool tether = true;
  for (int i = 0; i <= 100000; ++i) {
    const double a = adaptive_alpha(i / 100000.0, c.lambda0, c.gamma_sig);
    if (!(a >= c.lambda0 && a < 1.0)) tether = false;
  }

  // Three-token vocabulary at depths {2, 3, 4} of a four-block model, top-2 stored.
  auto record = [](const std::map<int, std::vector<double>>& z, int own, int cand) {
    PositionDepthLogits rec{cand, 1, own, {}};
    for (const auto& [d, v] : z) {
      std::vector<int> ids{0, 1, 2};
      std::stable_sort(ids.begin(), ids.end(), [&](int x, int y) { return v[x] > v[y]; });
      ids.resize(2);
      const double m = *std::max_element(v.begin(), v.end());
      double s = 0;
      for (double x : v) s += std::exp(x - m);
      DepthLogits dl{d, ids, {v[ids[0]], v[ids[1]]}, m + std::log(s), v[own]};
      rec.depths.push_back(dl);
    }
    return rec;
  };
  const std::map<int, std::vector<double>> flat{{2, {1.0, 0.0, -1.0}}, {3, {1.0, 0.0, -1.0}}, {4, {1.0, 0.0, -1.0}}};
  CandidateTrajectory meta;
  meta.item_id = "tiny";
  meta.depth = 4;
  meta.scores = Matrix(3, 5, -1.0);
  meta.candidate_texts.assign(3, "x");
  meta.candidate_token_counts.assign(3, 1);
  const std::vector<PositionDepthLogits> recs{record(flat, 0, 0), record(flat, 1, 1), record(flat, 2, 2)};
  ScorerConstants off = c;
  off.lambda0 = 0.0;
  off.gamma_sig = INFINITY;
  off.r_omega = 2;
  const auto s = calibrated_candidate_scores(meta, recs, off);
  double reduce_gap = 0;
  for (int i = 0; i < 3; ++i) reduce_gap = std::max(reduce_gap, std::abs(s.t[i] - s.b_check[i]));

  const std::map<int, std::vector<double>> moving{{2, {1.0, 0.5, -1.0}}, {3, {1.5, 0.2, -0.5}}, {4, {2.0, 1.0, 0.0}}};
  ScorerConstants mix = c;
  mix.r_omega = 2;
  double sum_gap = 0;
  for (int own = 0; own < 3; ++own) {
    const auto cal = calibrate_position(record(moving, own, 0), scorer_depths(4, mix), mix);
    std::vector<double> z = moving.at(4);
    for (const auto& tok : cal.mixed) z[tok.token] = tok.z_calibrated;
    double total = 0;
    for (double x : z) total += std::exp(x - cal.log_denominator);
    sum_gap = std::max(sum_gap, std::abs(total - 1.0));
  }
  report("scorer_suite", midpoint && tether && reduce_gap <= kScorerTol && sum_gap <= kScorerTol,
         std::string("alpha(0.5) ") + (midpoint ? "= 0.75" : "!= 0.75") + ", tether " + (tether ? "holds" : "broken") +
             fmt(", |t - b| %.3g, |sum p - 1| %.3g", reduce_gap, sum_gap));
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> checks[] = {
      {"proposition_1", proposition_and_oracle}, {"theorem_1", theorem_one},
      {"rcv_lemma", rcv_lemma},                  {"fixture_reproduction", fixture_reproduction},
      {"appendix_statistics", appendix_statistics}, {"abstention_identity", abstention_identity},
      {"determinism", determinism},              {"scorer_suite", scorer_suite},
  };
  for (const auto& [name, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
