// trace_synth: writes a seeded synthetic archive and matching model statistics.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trace/archive.hpp"
#include "trace/invariant.hpp"
#include "trace/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic trajectory corpus generator"};
  trace::synthetic::CorpusSpec spec;
  std::string mode = "mixed";
  std::string archive_path;
  std::string stats_path;
  std::string model_id = "synthetic";
  double target_I_M = 4.0;

  app.add_option("--items", spec.items)->check(CLI::NonNegativeNumber);
  app.add_option("--depth", spec.depth)->check(CLI::Range(4, 512));
  app.add_option("--vocab", spec.vocab)->check(CLI::Range(2, 1 << 20));
  app.add_option("--topk", spec.topk)->check(CLI::PositiveNumber);
  app.add_option("--seed", spec.seed);
  app.add_option("--mode", mode)->check(CLI::IsMember({"mixed", "abstaining"}));
  app.add_option("--scalar-share", spec.scalar_share)->check(CLI::Range(0.0, 1.0));
  app.add_option("--I-M", target_I_M, "Invariant value of the generated model")->check(CLI::PositiveNumber);
  app.add_option("--model-id", model_id);
  app.add_option("--archive", archive_path)->required();
  app.add_option("--model-stats", stats_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  spec.mode = mode == "mixed" ? trace::synthetic::CorpusMode::mixed : trace::synthetic::CorpusMode::abstaining;

  try {
    trace::write_trajectory_archive(trace::synthetic::generate_corpus(spec), archive_path);
    trace::write_model_stats(
        trace::synthetic::generate_model_stats(model_id, spec.depth, spec.vocab, target_I_M, spec.seed), stats_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
