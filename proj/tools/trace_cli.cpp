// trace: command-line front end for the correction engine.
//
// Exit codes: 0 success, 1 validation or domain error, 2 usage error.
// Errors are reported on stderr as one JSON object.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "trace/archive.hpp"
#include "trace/engine.hpp"
#include "trace/evaluation.hpp"
#include "trace/hyperparameters.hpp"
#include "trace/invariant.hpp"
#include "trace/master_grid.hpp"
#include "trace/scorer.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

void report_error(const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump() << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw trace::Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes to `path`, or stdout when empty or "-".
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    trace::write_text_file(path, content);
  }
}

trace::HyperParameters load_config(const std::string& path) {
  return path.empty() ? trace::HyperParameters{} : trace::load_hyperparameters(path);
}

struct RunOptions {
  std::string archive;
  std::string model_stats;
  std::string config;
  std::string out;
  std::string variant;
  int jobs = 1;
};

int run_engine(const RunOptions& o) {
  auto theta = load_config(o.config);
  if (!o.variant.empty()) {
    const auto v = trace::parse_variant(o.variant);
    if (!v) throw trace::ConfigError("unknown ablation variant '" + o.variant + "'");
    theta.ablation_variant = *v;
  }
  theta.validate();
  const auto doc = trace::load_model_stats(o.model_stats);
  const auto inv = trace::fetch_or_compute_invariant(doc, theta.tau_I);
  const auto items = trace::read_trajectory_archive(o.archive);
  for (const auto& item : items) {
    if (item.trajectory.depth != doc.stats.depth) {
      throw trace::ValidationError(item.trajectory.item_id, "L",
                                   "depth " + std::to_string(item.trajectory.depth) + " differs from model depth " +
                                       std::to_string(doc.stats.depth));
    }
  }

  trace::EngineConfig cfg{theta, inv.I_M, theta.ablation_variant};
  const auto verdicts = trace::run_batch(items, cfg, o.jobs);
  std::string text;
  for (const auto& v : verdicts) text += trace::serialize_verdict(v) + '\n';
  emit(o.out, text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-based hallucination correction for multiple-choice scoring"};
  app.require_subcommand(1);

  // validate
  std::string v_archive, v_stats, v_config;
  auto* validate = app.add_subcommand("validate", "Check an archive (and optionally stats and config)");
  validate->add_option("--archive", v_archive, "Trajectory archive (JSON lines)")->required();
  validate->add_option("--model-stats", v_stats, "Model weight statistics");
  validate->add_option("--config", v_config, "Hyperparameter file");

  // invariant
  std::string i_stats, i_config, i_out;
  auto* invariant = app.add_subcommand("invariant", "Compute I(M) and the scalar branch for one model");
  invariant->add_option("--model-stats", i_stats, "Model weight statistics")->required();
  invariant->add_option("--config", i_config, "Hyperparameter file");
  invariant->add_option("--out", i_out, "Output path (default stdout)");

  // run / ablate
  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Route every archive item and write verdicts");
  run->add_option("--archive", run_opts.archive)->required();
  run->add_option("--model-stats", run_opts.model_stats)->required();
  run->add_option("--config", run_opts.config);
  run->add_option("--out", run_opts.out, "Verdict output (default stdout)");
  run->add_option("--jobs", run_opts.jobs, "Worker threads")->check(CLI::PositiveNumber);

  RunOptions ablate_opts;
  auto* ablate = app.add_subcommand("ablate", "Run under one ablation variant");
  ablate->add_option("--variant", ablate_opts.variant)->required();
  ablate->add_option("--archive", ablate_opts.archive)->required();
  ablate->add_option("--model-stats", ablate_opts.model_stats)->required();
  ablate->add_option("--config", ablate_opts.config);
  ablate->add_option("--out", ablate_opts.out);
  ablate->add_option("--jobs", ablate_opts.jobs)->check(CLI::PositiveNumber);

  // eval
  std::string e_archive, e_verdicts, e_out, e_csv, e_model = "model";
  auto* eval = app.add_subcommand("eval", "MC1/MC2 per benchmark, base versus verdicts");
  eval->add_option("--archive", e_archive)->required();
  eval->add_option("--verdicts", e_verdicts)->required();
  eval->add_option("--model-id", e_model, "Model label for the report");
  eval->add_option("--out", e_out, "Summary JSON (default stdout)");
  eval->add_option("--csv", e_csv, "Per-cell CSV");

  // stats
  std::string s_archive, s_verdicts, s_config, s_out;
  auto* stats = app.add_subcommand("stats", "Regime usage per benchmark and pooled");
  stats->add_option("--archive", s_archive)->required();
  stats->add_option("--verdicts", s_verdicts)->required();
  stats->add_option("--config", s_config);
  stats->add_option("--out", s_out);

  // bootstrap
  std::string b_fixture, b_cells, b_out;
  std::size_t b_B = 200000;
  double b_level = 0.95;
  std::uint64_t b_seed = 20240601;
  auto* boot = app.add_subcommand("bootstrap", "Bootstrap CI and sign test over cell deltas");
  auto* fixture_opt = boot->add_option("--fixture", b_fixture, "Published grid CSV");
  auto* cells_opt = boot->add_option("--cells", b_cells, "Cell CSV written by eval");
  fixture_opt->excludes(cells_opt);
  boot->add_option("--B", b_B, "Resamples")->check(CLI::PositiveNumber);
  boot->add_option("--level", b_level, "Coverage")->check(CLI::Range(0.0, 1.0));
  boot->add_option("--seed", b_seed, "Generator seed");
  boot->add_option("--out", b_out);

  // plot
  std::string p_archive, p_item, p_verdicts, p_out;
  auto* plot = app.add_subcommand("plot", "SVG of one item's candidate probabilities across depth");
  plot->add_option("--archive", p_archive)->required();
  plot->add_option("--item", p_item)->required();
  plot->add_option("--verdicts", p_verdicts)->required();
  plot->add_option("--out", p_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*validate) {
      const auto items = trace::read_trajectory_archive(v_archive);
      json out{{"items", items.size()}, {"ok", true}};
      if (!v_config.empty()) trace::load_hyperparameters(v_config).validate();
      if (!v_stats.empty()) {
        const auto theta = load_config(v_config);
        const auto doc = trace::load_model_stats(v_stats);
        const int k = theta.scorer.topk_cutoff(doc.stats.vocab_size);
        const auto depths = trace::scorer_depths(doc.stats.depth, theta.scorer).required();
        for (const auto& item : items) {
          if (item.trajectory.depth != doc.stats.depth) {
            throw trace::ValidationError(item.trajectory.item_id, "L", "depth differs from the model statistics");
          }
          if (!item.logits.empty()) trace::validate_logit_layout(item, depths, k);
        }
        out["topk"] = k;
      }
      std::cout << out.dump() << '\n';
    } else if (*invariant) {
      const auto theta = load_config(i_config);
      const auto doc = trace::load_model_stats(i_stats);
      const auto report = trace::fetch_or_compute_invariant(doc, theta.tau_I);
      emit(i_out, trace::dump_invariant_report(doc.stats.model_id, report) + "\n");
    } else if (*run) {
      return run_engine(run_opts);
    } else if (*ablate) {
      return run_engine(ablate_opts);
    } else if (*eval) {
      const auto items = trace::read_trajectory_archive(e_archive);
      const auto verdicts = trace::read_verdicts(e_verdicts);
      const auto cells = trace::evaluate_cells(e_model, items, verdicts);
      const auto summary = trace::summarize_cells(cells);
      if (!e_csv.empty()) trace::write_text_file(e_csv, trace::cells_csv(cells));
      emit(e_out, trace::summary_json(cells, summary));
    } else if (*stats) {
      const auto theta = load_config(s_config);
      const auto items = trace::read_trajectory_archive(s_archive);
      const auto verdicts = trace::read_verdicts(s_verdicts);
      emit(s_out, trace::usage_json(trace::usage_report(items, verdicts, theta.tau_dim)));
    } else if (*boot) {
      if (b_fixture.empty() == b_cells.empty()) {
        report_error("usage", "bootstrap needs exactly one of --fixture or --cells");
        return kExitUsage;
      }
      const auto cells = b_fixture.empty() ? trace::parse_cells_csv(read_file(b_cells))
                                           : trace::cells_from_fixture(trace::load_master_fixture(b_fixture));
      std::vector<double> d1, d2;
      for (const auto& c : cells) {
        d1.push_back(c.mc1_delta());
        d2.push_back(c.mc2_delta());
      }
      json out;
      out["cells"] = cells.size();
      out["B"] = b_B;
      out["level"] = b_level;
      out["seed"] = b_seed;
      for (const auto& [name, d] : {std::pair{"mc1", &d1}, std::pair{"mc2", &d2}}) {
        const auto ci = trace::bootstrap_ci(*d, b_B, b_level, b_seed);
        json m{{"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
        try {
          m["sign_test_p"] = trace::sign_test(*d);
        } catch (const trace::InputError& e) {
          m["sign_test_p"] = nullptr;
          m["sign_test_error"] = e.what();
        }
        out[name] = m;
      }
      emit(b_out, out.dump() + "\n");
    } else if (*plot) {
      const auto items = trace::read_trajectory_archive(p_archive);
      const auto verdicts = trace::read_verdicts(p_verdicts);
      const trace::ArchiveItem* item = nullptr;
      for (const auto& it : items) {
        if (it.trajectory.item_id == p_item) item = &it;
      }
      const trace::Verdict* verdict = nullptr;
      for (const auto& v : verdicts) {
        if (v.item_id == p_item) verdict = &v;
      }
      if (!item) throw trace::InputError(p_item, "item not in archive");
      if (!verdict) throw trace::InputError(p_item, "item has no verdict");
      trace::write_text_file(p_out, trace::trajectory_svg(item->trajectory, *verdict));
    }
  } catch (const trace::ParseError& e) {
    report_error("parse", e.what(), {{"line", e.line()}});
    return kExitDomain;
  } catch (const trace::ValidationError& e) {
    report_error("validation", e.what(), {{"item_id", e.item_id()}, {"field", e.field()}});
    return kExitDomain;
  } catch (const trace::InputError& e) {
    report_error("input", e.what(), {{"item_id", e.item_id()}});
    return kExitDomain;
  } catch (const trace::ConfigError& e) {
    report_error("config", e.what());
    return kExitDomain;
  } catch (const trace::NumericError& e) {
    report_error("numeric", e.what());
    return kExitDomain;
  } catch (const std::exception& e) {
    report_error("error", e.what());
    return kExitDomain;
  }
  return kExitOk;
}
