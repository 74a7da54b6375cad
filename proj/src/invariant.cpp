#include "trace/invariant.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_writer.hpp"
#include "trace/common.hpp"
#include "trace/hyperparameters.hpp"

namespace trace {

using nlohmann::json;

namespace {

constexpr std::string_view kStatsSchema = "trace.model_stats/1";
constexpr std::string_view kInvariantSchema = "trace.invariant/1";

std::string invariant_body(const InvariantReport& r) {
  detail::JsonWriter w;
  w.field("phi_N", r.phi_N)
      .field("phi_K", r.phi_K)
      .field("phi_V", r.phi_V)
      .field("phi_O", r.phi_O)
      .field("I_M", r.I_M)
      .field("branch", std::string(to_string(r.branch)));
  return w.str();
}

}  // namespace

std::string_view to_string(ScalarBranch b) { return b == ScalarBranch::mix ? "mix" : "early"; }

double rcv(std::span<const double> v) {
  if (v.empty()) throw NumericError("rcv of an empty row-norm sequence");
  if (!all_finite(v)) throw NumericError("rcv of non-finite row norms");
  // shifted two-pass: equal entries give exactly zero spread
  const double n = static_cast<double>(v.size());
  const double pivot = v[0];
  double shift = 0.0;
  for (double x : v) shift += x - pivot;
  shift /= n;
  const double mean = pivot + shift;
  if (!(mean > 0.0)) throw NumericError("rcv undefined: row norms have zero mean");
  double var = 0.0;
  for (double x : v) {
    const double d = (x - pivot) - shift;
    var += d * d;
  }
  var /= n;
  return std::sqrt(var) / mean;
}

void validate(const ModelWeightStats& s) {
  auto fail = [&](const char* field, const std::string& what) { throw ValidationError(s.model_id, field, what); };
  if (s.model_id.empty()) fail("model_id", "empty model_id");
  if (s.depth < 1) fail("L", "depth must be >= 1");
  if (s.vocab_size < 1) fail("vocab_size", "vocab_size must be >= 1");
  auto check_seq = [&](const char* field, const std::vector<double>& v) {
    if (v.empty()) fail(field, "row-norm sequence is empty");
    double sum = 0.0;
    for (double x : v) {
      if (!std::isfinite(x) || x < 0.0) fail(field, "row norms must be finite and >= 0");
      sum += x;
    }
    if (!(sum > 0.0)) fail(field, "row-norm sequence has zero mean");
  };
  check_seq("row_norms_K_e", s.row_norms_K_e);
  check_seq("row_norms_V_e", s.row_norms_V_e);
  check_seq("row_norms_V_m", s.row_norms_V_m);
  check_seq("row_norms_O_m", s.row_norms_O_m);
  if (!std::isfinite(s.final_norm_l1) || s.final_norm_l1 < 0.0) fail("final_norm_l1", "must be finite and >= 0");
  if (s.final_norm_dim < 1) fail("final_norm_dim", "must be >= 1");
}

InvariantReport compute_invariant(const ModelWeightStats& stats, double tau_I) {
  validate(stats);
  InvariantReport r;
  r.phi_N = stats.final_norm_l1 / static_cast<double>(stats.final_norm_dim);
  r.phi_K = rcv(stats.row_norms_K_e);
  const double v_mid = rcv(stats.row_norms_V_m);
  if (v_mid == 0.0) {
    throw NumericError("model '" + stats.model_id + "': rcv(W_V) at the middle depth is 0, phi_V undefined");
  }
  r.phi_V = rcv(stats.row_norms_V_e) / v_mid;
  r.phi_O = rcv(stats.row_norms_O_m);
  const double denom = r.phi_K * r.phi_V;
  if (denom == 0.0) {
    throw NumericError("model '" + stats.model_id + "': phi_K * phi_V is 0, I(M) undefined");
  }
  r.I_M = (r.phi_N * r.phi_O) / denom;
  r.branch = r.I_M > tau_I ? ScalarBranch::mix : ScalarBranch::early;
  return r;
}

InvariantReport fetch_or_compute_invariant(const ModelStatsDocument& doc, double tau_I) {
  if (doc.invariant) {
    InvariantReport r = *doc.invariant;
    const double recomposed = (r.phi_N * r.phi_O) / (r.phi_K * r.phi_V);
    if (!(std::abs(recomposed - r.I_M) <= 1e-9 * std::max(1.0, std::abs(r.I_M)))) {
      throw ValidationError(doc.stats.model_id, "invariant", "cached I_M disagrees with its phi factors");
    }
    r.branch = r.I_M > tau_I ? ScalarBranch::mix : ScalarBranch::early;
    return r;
  }
  return compute_invariant(doc.stats, tau_I);
}

int early_depth(int L, const HyperParameters& theta) { return static_cast<int>(floor_fraction(theta.rho_e, L)); }

int middle_depth(int L, const HyperParameters& theta) { return static_cast<int>(floor_fraction(theta.rho_m, L)); }

ModelStatsDocument parse_model_stats(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("model stats: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(0, "model stats must be a JSON object");
  static const std::set<std::string> known = {"schema",        "model_id",      "L",
                                              "vocab_size",    "row_norms_K_e", "row_norms_V_e",
                                              "row_norms_V_m", "row_norms_O_m", "final_norm_l1",
                                              "final_norm_dim", "invariant"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw ParseError(0, "model stats: unknown key '" + key + "'");
  }
  if (doc.value("schema", "") != kStatsSchema) throw ParseError(0, "model stats: unsupported schema");

  ModelStatsDocument out;
  auto& s = out.stats;
  try {
    s.model_id = doc.at("model_id").get<std::string>();
    s.depth = doc.at("L").get<int>();
    s.vocab_size = doc.at("vocab_size").get<long>();
    s.row_norms_K_e = doc.at("row_norms_K_e").get<std::vector<double>>();
    s.row_norms_V_e = doc.at("row_norms_V_e").get<std::vector<double>>();
    s.row_norms_V_m = doc.at("row_norms_V_m").get<std::vector<double>>();
    s.row_norms_O_m = doc.at("row_norms_O_m").get<std::vector<double>>();
    s.final_norm_l1 = doc.at("final_norm_l1").get<double>();
    s.final_norm_dim = doc.at("final_norm_dim").get<int>();
    if (doc.contains("invariant")) {
      const json& inv = doc["invariant"];
      InvariantReport r;
      r.phi_N = inv.at("phi_N").get<double>();
      r.phi_K = inv.at("phi_K").get<double>();
      r.phi_V = inv.at("phi_V").get<double>();
      r.phi_O = inv.at("phi_O").get<double>();
      r.I_M = inv.at("I_M").get<double>();
      const auto branch = inv.at("branch").get<std::string>();
      if (branch != "mix" && branch != "early") throw ParseError(0, "model stats: bad invariant branch");
      r.branch = branch == "mix" ? ScalarBranch::mix : ScalarBranch::early;
      out.invariant = r;
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("model stats: ") + e.what());
  }
  validate(s);
  return out;
}

ModelStatsDocument load_model_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model stats '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_stats(ss.str());
}

std::string dump_model_stats(const ModelStatsDocument& doc) {
  const auto& s = doc.stats;
  detail::JsonWriter w;
  w.field("schema", std::string(kStatsSchema))
      .field("model_id", s.model_id)
      .field("L", s.depth)
      .field("vocab_size", s.vocab_size)
      .field("row_norms_K_e", s.row_norms_K_e)
      .field("row_norms_V_e", s.row_norms_V_e)
      .field("row_norms_V_m", s.row_norms_V_m)
      .field("row_norms_O_m", s.row_norms_O_m)
      .field("final_norm_l1", s.final_norm_l1)
      .field("final_norm_dim", s.final_norm_dim);
  if (doc.invariant) w.raw_field("invariant", invariant_body(*doc.invariant));
  return w.str();
}

void write_model_stats(const ModelStatsDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model stats '" + path + "'");
  out << dump_model_stats(doc) << '\n';
}

std::string dump_invariant_report(const std::string& model_id, const InvariantReport& report) {
  detail::JsonWriter w;
  w.field("schema", std::string(kInvariantSchema))
      .field("model_id", model_id)
      .raw_field("invariant", invariant_body(report));
  return w.str();
}

}  // namespace trace
