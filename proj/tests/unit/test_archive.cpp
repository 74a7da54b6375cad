#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "trace/archive.hpp"
#include "trace/synthetic.hpp"

using namespace trace;

namespace {

CandidateTrajectory small_trajectory() {
  CandidateTrajectory t;
  t.item_id = "q1";
  t.benchmark_id = "bench";
  t.depth = 2;
  t.scores = Matrix(2, 3, std::vector<double>{-1.0, -0.5, -0.25, -2.0, -1.5, -3.0});
  t.candidate_texts = {"yes", "no, \"never\""};
  t.candidate_token_counts = {1, 2};
  t.truthful_indices = std::vector<int>{1};
  return t;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("trace_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ArchiveItem random_item(std::mt19937_64& rng, int k) {
  std::uniform_int_distribution<int> n_dist(2, 6), L_dist(2, 9), m_dist(1, 3);
  std::uniform_real_distribution<double> s_dist(-20.0, 0.0);
  ArchiveItem item;
  auto& t = item.trajectory;
  t.item_id = "item-" + std::to_string(k);
  t.benchmark_id = k % 2 ? "a" : "b";
  const int n = n_dist(rng);
  t.depth = L_dist(rng);
  t.scores = Matrix(n, t.depth + 1);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l <= t.depth; ++l) t.scores(i, l) = s_dist(rng);
    t.candidate_texts.push_back("c" + std::to_string(i) + " \xce\xbb");
    t.candidate_token_counts.push_back(m_dist(rng));
  }
  if (k % 3) t.truthful_indices = std::vector<int>{0};
  if (k % 2) {
    for (int i = 0; i < n; ++i) {
      for (int r = 1; r <= t.candidate_token_counts[i]; ++r) {
        PositionDepthLogits p{i, r, 7 + i, {}};
        for (int d : {1, t.depth}) {
          p.depths.push_back({d, {3, 1, 4}, {s_dist(rng), s_dist(rng), s_dist(rng)}, 2.5,
                              s_dist(rng)});
        }
        item.logits.push_back(p);
      }
    }
  }
  return item;
}

}  // namespace

TEST_SUITE("archive") {
  TEST_CASE("single item round-trips through text") {
    ArchiveItem item{small_trajectory(), {}};
    const auto line = serialize_archive_item(item);
    const auto back = parse_trajectory_archive(line + "\n");
    REQUIRE(back.size() == 1);
    CHECK(back[0] == item);
  }

  TEST_CASE("randomized items round-trip through a file") {
    std::mt19937_64 rng(11);
    std::vector<ArchiveItem> items;
    for (int k = 0; k < 60; ++k) items.push_back(random_item(rng, k));
    const auto path = temp_path("roundtrip.jsonl");
    write_trajectory_archive(items, path);
    CHECK(read_trajectory_archive(path) == items);
    std::filesystem::remove(path);
  }

  TEST_CASE("synthetic corpus round-trips") {
    trace::synthetic::CorpusSpec spec;
    spec.items = 20;
    const auto items = trace::synthetic::generate_corpus(spec);
    std::string text;
    for (const auto& it : items) text += serialize_archive_item(it) + "\n";
    CHECK(parse_trajectory_archive(text) == items);
  }

  TEST_CASE("writing is deterministic and an empty sequence gives an empty file") {
    std::mt19937_64 rng(3);
    std::vector<ArchiveItem> items{random_item(rng, 1), random_item(rng, 2)};
    const auto a = temp_path("det_a.jsonl");
    const auto b = temp_path("det_b.jsonl");
    write_trajectory_archive(items, a);
    write_trajectory_archive(items, b);
    CHECK(slurp(a) == slurp(b));
    write_trajectory_archive({}, a);
    CHECK(slurp(a).empty());
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }

  TEST_CASE("positive log-probability is a validation error naming the item and field") {
    auto t = small_trajectory();
    t.scores(0, 1) = 0.5;
    const auto line = serialize_archive_item({t, {}});
    try {
      parse_trajectory_archive(line);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.item_id() == "q1");
      CHECK(e.field() == "S");
      CHECK(std::string(e.what()).find("log-probability > 0") != std::string::npos);
    }
  }

  TEST_CASE("malformed lines report their line number") {
    const auto good = serialize_archive_item({small_trajectory(), {}});
    try {
      parse_trajectory_archive(good + "\n\n{not json}\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_trajectory_archive(R"({"schema":"trace.trajectory/2"})"), ParseError);
    auto with_extra = good;
    with_extra.insert(1, R"("color":"red",)");
    CHECK_THROWS_AS(parse_trajectory_archive(with_extra), ParseError);
  }

  TEST_CASE("type invariants are enforced") {
    auto check_field = [](CandidateTrajectory t, const std::string& field) {
      try {
        validate(t);
        FAIL("expected ValidationError for " << field);
      } catch (const ValidationError& e) {
        CHECK(e.field() == field);
      }
    };
    auto t = small_trajectory();
    t.truthful_indices = std::vector<int>{0, 1};
    check_field(t, "truthful_indices");
    t = small_trajectory();
    t.truthful_indices = std::vector<int>{};
    check_field(t, "truthful_indices");
    t = small_trajectory();
    t.truthful_indices = std::vector<int>{2};
    check_field(t, "truthful_indices");
    t = small_trajectory();
    t.candidate_token_counts = {1, 0};
    check_field(t, "candidate_token_counts");
    t = small_trajectory();
    t.scores(1, 2) = NAN;
    check_field(t, "S");
    t = small_trajectory();
    t.scores = Matrix(1, 3, -1.0);
    t.candidate_texts = {"a"};
    t.candidate_token_counts = {1};
    t.truthful_indices.reset();
    check_field(t, "n");
  }

  TEST_CASE("logit records are checked against the trajectory") {
    ArchiveItem item{small_trajectory(), {}};
    item.logits.push_back({0, 1, 5, {{2, {1, 2}, {0.5, 0.1}, 2.0, -1.0}}});
    item.logits.push_back({1, 1, 6, {{2, {1, 2}, {0.5, 0.1}, 2.0, -1.0}}});
    item.logits.push_back({1, 2, 6, {{2, {1, 2}, {0.5, 0.1}, 2.0, -1.0}}});
    CHECK_NOTHROW(validate(item));

    auto bad = item;
    bad.logits[0].depths[0].own_logit = 3.0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = item;
    bad.logits.pop_back();
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = item;
    bad.logits[1].depths[0].topk_ids = {1, 1};
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = item;
    bad.logits[2].position = 3;
    CHECK_THROWS_AS(validate(bad), ValidationError);

    const std::vector<int> depths{2};
    CHECK_NOTHROW(validate_logit_layout(item, depths, 2));
    CHECK_THROWS_AS(validate_logit_layout(item, depths, 50), ValidationError);
    const std::vector<int> more{1, 2};
    CHECK_THROWS_AS(validate_logit_layout(item, more, 2), ValidationError);
  }

  TEST_CASE("own token stays present even outside the top-k") {
    trace::synthetic::CorpusSpec spec;
    spec.items = 10;
    for (const auto& item : trace::synthetic::generate_corpus(spec)) {
      for (const auto& p : item.logits) {
        for (const auto& d : p.depths) CHECK(d.own_logit <= d.logsumexp_full);
      }
    }
  }
}
