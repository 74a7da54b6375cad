#include <doctest.h>

#include <map>

#include "trace/engine.hpp"
#include "trace/hyperparameters.hpp"
#include "trace/invariant.hpp"
#include "trace/scorer.hpp"
#include "trace/synthetic.hpp"

using namespace trace;
using namespace trace::synthetic;

TEST_SUITE("synthetic") {
  TEST_CASE("corpora are seeded") {
    CorpusSpec spec;
    spec.items = 40;
    const auto a = generate_corpus(spec);
    CHECK(a.size() == 40);
    CHECK(generate_corpus(spec) == a);
    spec.seed = 2;
    CHECK_FALSE(generate_corpus(spec) == a);
  }

  TEST_CASE("items are valid and carry the scorer layout") {
    CorpusSpec spec;
    spec.items = 60;
    const ScorerConstants c;
    const auto depths = scorer_depths(spec.depth, c).required();
    for (const auto& item : generate_corpus(spec)) {
      CHECK_NOTHROW(validate(item));
      CHECK(item.trajectory.depth == spec.depth);
      CHECK(item.trajectory.truthful_indices.has_value());
      if (!item.logits.empty()) CHECK_NOTHROW(validate_logit_layout(item, depths, spec.topk));
    }
  }

  TEST_CASE("mixed corpus reaches every regime") {
    CorpusSpec spec;
    spec.items = 300;
    const auto items = generate_corpus(spec);
    std::map<Regime, int> seen;
    EngineConfig cfg;
    cfg.I_M = 4.0;
    for (const auto& v : run_batch(items, cfg, 4)) ++seen[v.regime];
    cfg.I_M = 0.2;
    for (const auto& v : run_batch(items, cfg, 4)) ++seen[v.regime];
    for (auto r : {Regime::md_override, Regime::md_abstain, Regime::scalar_trust, Regime::scalar_reverse,
                   Regime::scalar_abstain, Regime::early_fallback, Regime::base}) {
      CHECK_MESSAGE(seen[r] > 0, to_string(r));
    }
  }

  TEST_CASE("abstaining corpus only abstains") {
    CorpusSpec spec;
    spec.items = 200;
    spec.mode = CorpusMode::abstaining;
    const auto items = generate_corpus(spec);
    EngineConfig cfg;
    cfg.I_M = 4.0;
    const auto verdicts = run_batch(items, cfg, 4);
    int md = 0, scalar = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& v = verdicts[k];
      CHECK((v.regime == Regime::md_abstain || v.regime == Regime::scalar_abstain));
      CHECK(v.chosen_index == argmax(items[k].trajectory.base()));
      (v.regime == Regime::md_abstain ? md : scalar) += 1;
    }
    CHECK(md > 0);
    CHECK(scalar > 0);
  }

  TEST_CASE("model stats hit the requested invariant") {
    const auto doc = generate_model_stats("synthetic", 12, 120, 4.0, 3);
    CHECK_NOTHROW(validate(doc.stats));
    CHECK(doc.stats.depth == 12);
    const auto r = compute_invariant(doc.stats);
    CHECK(r.I_M == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(r.branch == ScalarBranch::mix);
  }
}
