#include "trace/hyperparameters.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_writer.hpp"
#include "trace/common.hpp"

namespace trace {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 9> kVariantNames = {
    "none",          "force_md",          "force_scalar",
    "drop_mix",      "drop_early",        "drop_both_scalar",
    "drop_md",       "force_mix_all_models", "force_early_all_models",
};

constexpr std::string_view kRhoPlusRule = "1-1/L";

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(AblationVariant v) {
  return kVariantNames[static_cast<std::size_t>(v)];
}

std::optional<AblationVariant> parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == name) return static_cast<AblationVariant>(i);
  }
  return std::nullopt;
}

int ScorerConstants::topk_cutoff(long vocab_size) const {
  const long scaled = ceil_fraction(topk_vocab_fraction, vocab_size);
  return static_cast<int>(std::max<long>(topk_min, scaled));
}

void HyperParameters::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(rho_minus > 0.0 && rho_minus < 1.0, "rho_minus must lie in (0,1)");
  if (rho_plus) require(*rho_plus > rho_minus && *rho_plus <= 1.0, "rho_plus must lie in (rho_minus,1]");
  require(rho_e > 0.0 && rho_e < rho_m && rho_m < 1.0, "need 0 < rho_e < rho_m < 1");
  require(eta > 0.0 && eta <= 1.0, "eta must lie in (0,1]");
  require(tau_dim >= 1.0, "tau_dim must be >= 1");
  require(eps_H > 0.0, "eps_H must be positive");
  require(delta_r > 0.0, "delta_r must be positive");
  require(scorer.lambda0 >= 0.0 && scorer.lambda0 < 1.0, "lambda0 must lie in [0,1)");
  require(scorer.gamma_sig > 0.0, "gamma_sig must be positive");
  require(!scorer.anchor_fractions.empty(), "anchor_fractions must be non-empty");
  require(scorer.feature_fractions.size() >= 3, "feature_fractions needs at least 3 depths");
  for (double f : scorer.anchor_fractions) require(f > 0.0 && f <= 1.0, "anchor fraction outside (0,1]");
  for (double f : scorer.feature_fractions) require(f > 0.0 && f <= 1.0, "feature fraction outside (0,1]");
  require(scorer.r_omega >= 1, "r_omega must be >= 1");
  require(scorer.topk_min >= 1, "topk_min must be >= 1");
  require(scorer.topk_vocab_fraction >= 0.0, "topk_vocab_fraction must be >= 0");
}

HyperParameters parse_hyperparameters(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  reject_unknown(doc,
                 {"schema", "rho_minus", "rho_plus_rule", "rho_e", "rho_m", "tau_dim", "tau_I",
                  "tau_logr", "tau_H", "eps_H", "delta_r", "eta", "gamma_conf", "scorer",
                  "ablation_variant"},
                 "config");
  if (doc.contains("schema") && doc["schema"] != "trace.config/1") {
    throw ConfigError("unsupported config schema");
  }

  HyperParameters theta;
  read_if(doc, "rho_minus", theta.rho_minus);
  read_if(doc, "rho_e", theta.rho_e);
  read_if(doc, "rho_m", theta.rho_m);
  read_if(doc, "tau_dim", theta.tau_dim);
  read_if(doc, "tau_I", theta.tau_I);
  read_if(doc, "tau_logr", theta.tau_logr);
  read_if(doc, "tau_H", theta.tau_H);
  read_if(doc, "eps_H", theta.eps_H);
  read_if(doc, "delta_r", theta.delta_r);
  read_if(doc, "eta", theta.eta);
  read_if(doc, "gamma_conf", theta.gamma_conf);

  if (doc.contains("rho_plus_rule")) {
    const json& rule = doc["rho_plus_rule"];
    if (rule.is_string() && rule.get<std::string>() == kRhoPlusRule) {
      theta.rho_plus.reset();
    } else if (rule.is_number()) {
      theta.rho_plus = rule.get<double>();
    } else {
      throw ConfigError("rho_plus_rule must be \"1-1/L\" or a number");
    }
  }

  if (doc.contains("ablation_variant")) {
    const auto name = doc["ablation_variant"].is_string() ? doc["ablation_variant"].get<std::string>() : "";
    const auto v = parse_variant(name);
    if (!v) throw ConfigError("unknown ablation_variant '" + name + "'");
    theta.ablation_variant = *v;
  }

  if (doc.contains("scorer")) {
    const json& s = doc["scorer"];
    if (!s.is_object()) throw ConfigError("scorer must be an object");
    reject_unknown(s,
                   {"anchor_fractions", "feature_fractions", "topk_min", "topk_vocab_fraction",
                    "r_omega", "anchor_weight_rule", "beta_slope", "beta_jump", "beta_curv",
                    "lambda0", "gamma_sig"},
                   "scorer");
    if (s.contains("anchor_weight_rule") && s["anchor_weight_rule"] != "exp(l/L)") {
      throw ConfigError("only anchor_weight_rule \"exp(l/L)\" is supported");
    }
    auto& c = theta.scorer;
    read_if(s, "anchor_fractions", c.anchor_fractions);
    read_if(s, "feature_fractions", c.feature_fractions);
    read_if(s, "topk_min", c.topk_min);
    read_if(s, "topk_vocab_fraction", c.topk_vocab_fraction);
    read_if(s, "r_omega", c.r_omega);
    read_if(s, "beta_slope", c.beta_slope);
    read_if(s, "beta_jump", c.beta_jump);
    read_if(s, "beta_curv", c.beta_curv);
    read_if(s, "lambda0", c.lambda0);
    read_if(s, "gamma_sig", c.gamma_sig);
  }

  theta.validate();
  return theta;
}

HyperParameters load_hyperparameters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_hyperparameters(ss.str());
}

std::string dump_hyperparameters(const HyperParameters& theta) {
  const auto& c = theta.scorer;
  detail::JsonWriter scorer;
  scorer.field("anchor_fractions", c.anchor_fractions)
      .field("feature_fractions", c.feature_fractions)
      .field("topk_min", c.topk_min)
      .field("topk_vocab_fraction", c.topk_vocab_fraction)
      .field("r_omega", c.r_omega)
      .field("anchor_weight_rule", std::string("exp(l/L)"))
      .field("beta_slope", c.beta_slope)
      .field("beta_jump", c.beta_jump)
      .field("beta_curv", c.beta_curv)
      .field("lambda0", c.lambda0)
      .field("gamma_sig", c.gamma_sig);

  detail::JsonWriter w;
  w.field("schema", std::string("trace.config/1")).field("rho_minus", theta.rho_minus);
  if (theta.rho_plus) {
    w.field("rho_plus_rule", *theta.rho_plus);
  } else {
    w.field("rho_plus_rule", std::string(kRhoPlusRule));
  }
  w.field("rho_e", theta.rho_e)
      .field("rho_m", theta.rho_m)
      .field("tau_dim", theta.tau_dim)
      .field("tau_I", theta.tau_I)
      .field("tau_logr", theta.tau_logr)
      .field("tau_H", theta.tau_H)
      .field("eps_H", theta.eps_H)
      .field("delta_r", theta.delta_r)
      .field("eta", theta.eta)
      .field("gamma_conf", theta.gamma_conf)
      .raw_field("scorer", scorer.str())
      .field("ablation_variant", std::string(to_string(theta.ablation_variant)));
  return w.str();
}

}  // namespace trace
