#include "trace/engine.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "json_writer.hpp"
#include "trace/geometry.hpp"
#include "trace/operators.hpp"
#include "trace/scorer.hpp"

namespace trace {

namespace {

constexpr std::array<std::pair<Regime, std::string_view>, 7> kRegimeNames = {{
    {Regime::md_override, "md_override"},
    {Regime::md_abstain, "md_abstain"},
    {Regime::scalar_trust, "scalar_trust"},
    {Regime::scalar_reverse, "scalar_reverse"},
    {Regime::scalar_abstain, "scalar_abstain"},
    {Regime::early_fallback, "early_fallback"},
    {Regime::base, "base"},
}};

// Scorer output, computed on first use.
class LazyT {
 public:
  virtual ~LazyT() = default;
  virtual std::vector<double> get(const CandidateTrajectory& item, const EngineConfig& cfg) const = 0;
};

class ScorerT final : public LazyT {
 public:
  explicit ScorerT(std::span<const PositionDepthLogits> logits) : logits_(logits) {}
  std::vector<double> get(const CandidateTrajectory& item, const EngineConfig& cfg) const override {
    if (logits_.empty()) {
      throw InputError(item.item_id, "scalar mix path reached but the item carries no position-depth logits");
    }
    return calibrated_candidate_scores(item, logits_, cfg.theta.scorer).t;
  }

 private:
  std::span<const PositionDepthLogits> logits_;
};

class GivenT final : public LazyT {
 public:
  explicit GivenT(std::span<const double> t) : t_(t) {}
  std::vector<double> get(const CandidateTrajectory& item, const EngineConfig&) const override {
    if (t_.size() != item.candidate_count()) {
      throw InputError(item.item_id, "t has " + std::to_string(t_.size()) + " entries for " +
                                         std::to_string(item.candidate_count()) + " candidates");
    }
    return {t_.begin(), t_.end()};
  }

 private:
  std::span<const double> t_;
};

Verdict finish(Verdict v, Regime regime, std::vector<double> scores) {
  v.regime = regime;
  v.chosen_index = argmax(scores);
  v.final_scores = std::move(scores);
  return v;
}

Verdict route(const CandidateTrajectory& item, const LazyT& t_source, const EngineConfig& cfg) {
  const auto& theta = cfg.theta;
  const AblationVariant var = cfg.variant;
  const auto b = item.base();

  Verdict v;
  v.item_id = item.item_id;
  v.diagnostics.I_M = cfg.I_M;

  const MidWindow mid = mid_window(item.depth, theta);
  v.diagnostics.d_eff = d_eff(center(item, mid));
  const bool multi_directional = v.diagnostics.d_eff > theta.tau_dim;

  bool md_arm = multi_directional;
  if (var == AblationVariant::force_md) md_arm = true;
  if (var == AblationVariant::force_scalar) md_arm = false;

  if (md_arm && var == AblationVariant::drop_md) return finish(std::move(v), Regime::base, b);
  if (md_arm) {
    const auto dec = decisive_layer(item, theta.eps_H);
    const auto gate = md_gate(item, dec.q, mid, theta);
    v.diagnostics.ell_star = dec.layer;
    v.diagnostics.gate_flip = gate.flip;
    v.diagnostics.gate_logr = gate.pass_logr;
    v.diagnostics.gate_H = gate.pass_H;
    v.diagnostics.g_logr = gate.g_logr;
    v.diagnostics.g_H = gate.g_H;
    if (gate.kappa) return finish(std::move(v), Regime::md_override, dec.q);
    return finish(std::move(v), Regime::md_abstain, b);
  }

  bool mix = cfg.I_M > theta.tau_I;
  if (var == AblationVariant::force_mix_all_models) mix = true;
  if (var == AblationVariant::force_early_all_models) mix = false;

  if (mix) {
    if (var == AblationVariant::drop_mix || var == AblationVariant::drop_both_scalar) {
      return finish(std::move(v), Regime::base, b);
    }
    const auto t = t_source.get(item, cfg);
    const double lambda = scalar_lambda(b, t, theta.eta);
    v.diagnostics.lambda = lambda;
    if (lambda > 0.0) return finish(std::move(v), Regime::scalar_trust, scalar_mix(b, t, lambda));
    if (lambda < 0.0) return finish(std::move(v), Regime::scalar_reverse, scalar_mix(b, t, lambda));
    return finish(std::move(v), Regime::scalar_abstain, b);
  }

  if (var == AblationVariant::drop_early || var == AblationVariant::drop_both_scalar) {
    return finish(std::move(v), Regime::base, b);
  }
  auto fb = early_fallback(b, item.layer(0), theta.gamma_conf);
  return finish(std::move(v), fb.fired ? Regime::early_fallback : Regime::base, std::move(fb.scores));
}

}  // namespace

std::string_view to_string(Regime r) {
  for (const auto& [value, name] : kRegimeNames) {
    if (value == r) return name;
  }
  return "?";
}

std::optional<Regime> parse_regime(std::string_view name) {
  for (const auto& [value, n] : kRegimeNames) {
    if (n == name) return value;
  }
  return std::nullopt;
}

Verdict run_item(const CandidateTrajectory& item, std::span<const PositionDepthLogits> logits,
                 const EngineConfig& cfg) {
  return route(item, ScorerT(logits), cfg);
}

Verdict run_item_with_t(const CandidateTrajectory& item, std::span<const double> t, const EngineConfig& cfg) {
  return route(item, GivenT(t), cfg);
}

std::vector<Verdict> run_batch(const std::vector<ArchiveItem>& items, const EngineConfig& cfg, int jobs) {
  const std::size_t n = items.size();
  std::vector<Verdict> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = run_item(items[i].trajectory, items[i].logits, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

template <typename T>
void optional_field(detail::JsonWriter& w, const std::string& key, const std::optional<T>& v) {
  if (v) {
    w.field(key, *v);
  } else {
    w.null_field(key);
  }
}

std::optional<double> opt_double(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return detail::json_to_double(*it);
}

template <typename T>
std::optional<T> opt_value(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

const std::set<std::string> kVerdictKeys = {"schema", "item_id", "chosen_index", "regime", "final_scores",
                                            "diagnostics"};
const std::set<std::string> kDiagnosticKeys = {"d_eff",  "ell_star", "gate_flip", "gate_logr", "gate_H",
                                               "g_logr", "g_H",      "lambda",    "I_M"};

}  // namespace

std::string serialize_verdict(const Verdict& v) {
  const auto& d = v.diagnostics;
  detail::JsonWriter diag;
  diag.field("d_eff", d.d_eff);
  optional_field(diag, "ell_star", d.ell_star);
  optional_field(diag, "gate_flip", d.gate_flip);
  optional_field(diag, "gate_logr", d.gate_logr);
  optional_field(diag, "gate_H", d.gate_H);
  optional_field(diag, "g_logr", d.g_logr);
  optional_field(diag, "g_H", d.g_H);
  optional_field(diag, "lambda", d.lambda);
  diag.field("I_M", d.I_M);

  detail::JsonWriter w;
  w.field("schema", std::string(kVerdictSchema))
      .field("item_id", v.item_id)
      .field("chosen_index", v.chosen_index)
      .field("regime", std::string(to_string(v.regime)))
      .field("final_scores", v.final_scores)
      .raw_field("diagnostics", diag.str());
  return w.str();
}

Verdict parse_verdict_line(std::string_view line, std::size_t line_number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_number, "verdict must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!kVerdictKeys.count(key)) throw ParseError(line_number, "unknown key '" + key + "' in verdict");
  }
  try {
    if (obj.at("schema").get<std::string>() != kVerdictSchema) {
      throw ParseError(line_number, "unsupported verdict schema '" + obj.at("schema").get<std::string>() + "'");
    }
    Verdict v;
    v.item_id = obj.at("item_id").get<std::string>();
    v.chosen_index = obj.at("chosen_index").get<std::size_t>();
    const auto regime = parse_regime(obj.at("regime").get<std::string>());
    if (!regime) throw ParseError(line_number, "unknown regime '" + obj.at("regime").get<std::string>() + "'");
    v.regime = *regime;
    for (const auto& x : obj.at("final_scores")) v.final_scores.push_back(detail::json_to_double(x));
    if (v.chosen_index >= v.final_scores.size()) throw ParseError(line_number, "chosen_index out of range");

    const json& d = obj.at("diagnostics");
    for (const auto& [key, _] : d.items()) {
      if (!kDiagnosticKeys.count(key)) throw ParseError(line_number, "unknown key '" + key + "' in diagnostics");
    }
    v.diagnostics.d_eff = detail::json_to_double(d.at("d_eff"));
    v.diagnostics.ell_star = opt_value<int>(d, "ell_star");
    v.diagnostics.gate_flip = opt_value<bool>(d, "gate_flip");
    v.diagnostics.gate_logr = opt_value<bool>(d, "gate_logr");
    v.diagnostics.gate_H = opt_value<bool>(d, "gate_H");
    v.diagnostics.g_logr = opt_double(d, "g_logr");
    v.diagnostics.g_H = opt_double(d, "g_H");
    v.diagnostics.lambda = opt_double(d, "lambda");
    v.diagnostics.I_M = detail::json_to_double(d.at("I_M"));
    return v;
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("malformed verdict: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_number, std::string("malformed verdict: ") + e.what());
  }
}

std::vector<Verdict> parse_verdicts(std::string_view text) {
  std::vector<Verdict> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    ++line_no;
    const auto line = text.substr(pos, eol - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) out.push_back(parse_verdict_line(line, line_no));
    pos = eol + 1;
  }
  return out;
}

std::vector<Verdict> read_verdicts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open verdict file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_verdicts(buf.str());
}

void write_verdicts(const std::vector<Verdict>& verdicts, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write verdict file '" + path + "'");
  for (const auto& v : verdicts) out << serialize_verdict(v) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace trace
