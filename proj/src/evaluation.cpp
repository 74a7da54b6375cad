#include "trace/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "json_writer.hpp"
#include "trace/operators.hpp"

namespace trace {

int mc1(std::span<const double> scores, std::span<const int> truthful) {
  const auto top = static_cast<int>(argmax(scores));
  return std::find(truthful.begin(), truthful.end(), top) != truthful.end() ? 1 : 0;
}

double mc2(std::span<const double> scores, std::span<const int> truthful) {
  const double z = logsumexp(scores);
  double mass = 0.0;
  for (int i : truthful) mass += std::exp(scores[static_cast<std::size_t>(i)] - z);
  return mass;
}

std::vector<CellResult> evaluate_cells(const std::string& model_id, const std::vector<ArchiveItem>& items,
                                       const std::vector<Verdict>& verdicts) {
  std::unordered_map<std::string, const Verdict*> by_id;
  for (const auto& v : verdicts) by_id.emplace(v.item_id, &v);

  std::vector<CellResult> cells;
  std::map<std::string, std::size_t> cell_of;
  for (const auto& item : items) {
    const auto& t = item.trajectory;
    if (!t.truthful_indices) throw InputError(t.item_id, "item has no truthful labels");
    auto it = by_id.find(t.item_id);
    if (it == by_id.end()) throw InputError(t.item_id, "no verdict for item");
    const Verdict& v = *it->second;
    if (v.final_scores.size() != t.candidate_count()) {
      throw InputError(t.item_id, "verdict score vector does not match the candidate count");
    }

    auto [pos, fresh] = cell_of.emplace(t.benchmark_id, cells.size());
    if (fresh) cells.push_back({model_id, t.benchmark_id});
    CellResult& c = cells[pos->second];
    const auto b = t.base();
    const auto& truthful = *t.truthful_indices;
    c.mc1_base += mc1(b, truthful);
    c.mc2_base += mc2(b, truthful);
    c.mc1_trace += mc1(v.final_scores, truthful);
    c.mc2_trace += mc2(v.final_scores, truthful);
    ++c.items;
  }
  for (auto& c : cells) {
    const double scale = 100.0 / static_cast<double>(c.items);
    c.mc1_base *= scale;
    c.mc2_base *= scale;
    c.mc1_trace *= scale;
    c.mc2_trace *= scale;
  }
  return cells;
}

std::vector<CellResult> cells_from_fixture(const std::vector<GridCell>& grid) {
  std::vector<CellResult> out;
  out.reserve(grid.size());
  for (const auto& g : grid) {
    out.push_back({g.model_id, g.benchmark_id, g.mc1_base, g.mc1_base + g.mc1_delta, g.mc2_base,
                   g.mc2_base + g.mc2_delta, 0});
  }
  return out;
}

GridSummary summarize_cells(std::span<const CellResult> cells) {
  if (cells.empty()) throw InputError("", "no cells to summarize");
  GridSummary s;
  s.cells = cells.size();
  s.min_mc1_delta = s.max_mc1_delta = cells[0].mc1_delta();
  s.min_mc2_delta = s.max_mc2_delta = cells[0].mc2_delta();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double d1 = cells[i].mc1_delta();
    const double d2 = cells[i].mc2_delta();
    s.mean_mc1_delta += d1;
    s.mean_mc2_delta += d2;
    if (d1 < s.min_mc1_delta) s.min_mc1_delta = d1;
    if (d2 < s.min_mc2_delta) s.min_mc2_delta = d2;
    if (d1 > s.max_mc1_delta) {
      s.max_mc1_delta = d1;
      s.argmax_mc1 = i;
    }
    if (d2 > s.max_mc2_delta) {
      s.max_mc2_delta = d2;
      s.argmax_mc2 = i;
    }
    if (d1 <= 0.0) ++s.regressions_mc1;
    if (d2 <= 0.0) ++s.regressions_mc2;
  }
  s.mean_mc1_delta /= static_cast<double>(cells.size());
  s.mean_mc2_delta /= static_cast<double>(cells.size());
  return s;
}

GridSummary aggregate_grid(std::span<const CellResult> cells) {
  if (cells.size() != static_cast<std::size_t>(kGridCells)) {
    throw InputError("", "grid needs " + std::to_string(kGridCells) + " cells, got " + std::to_string(cells.size()));
  }
  return summarize_cells(cells);
}

namespace {

// Type-7 sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& x, double p) {
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

Interval bootstrap_ci(std::span<const double> deltas, std::size_t B, double level, std::uint64_t seed) {
  if (deltas.empty()) throw InputError("", "bootstrap needs at least one delta");
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must lie in (0, 1)");

  const std::size_t n = deltas.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(B);
  for (std::size_t b = 0; b < B; ++b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += deltas[pick(rng)];
    means[b] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return {quantile_sorted(means, (1.0 - level) / 2.0), quantile_sorted(means, (1.0 + level) / 2.0)};
}

__extension__ typedef unsigned __int128 Wide;

double sign_test(std::span<const double> deltas) {
  if (deltas.empty()) throw InputError("", "sign test needs at least one delta");
  std::size_t k = 0;
  for (double d : deltas) {
    if (d == 0.0) throw InputError("", "sign test input contains a zero delta");
    if (d > 0.0) ++k;
  }
  const std::size_t n = deltas.size();

  if (n <= 62) {
    // Exact: the tail count fits in 64 bits and the scaling by 2^-n is exact.
    std::uint64_t c = 1;  // C(n, j), built up from j = n downward
    std::uint64_t tail = 0;
    for (std::size_t j = n;; --j) {
      if (j >= k) tail += c;
      if (j == 0 || j <= k) break;
      c = static_cast<std::uint64_t>(static_cast<Wide>(c) * j / (n - j + 1));
    }
    return std::ldexp(static_cast<double>(tail), -static_cast<int>(n));
  }

  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  std::vector<double> terms;
  for (std::size_t j = k; j <= n; ++j) {
    terms.push_back(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + log_half_n);
  }
  return std::min(1.0, std::exp(logsumexp(terms)));
}

UsageStats usage_stats(std::span<const Verdict> verdicts, double tau_dim) {
  if (verdicts.empty()) throw InputError("", "usage statistics need at least one verdict");
  UsageStats u;
  u.items = verdicts.size();
  std::size_t scalar = 0, fire = 0, mix = 0, early = 0;
  for (const auto& v : verdicts) {
    if (v.diagnostics.d_eff <= tau_dim) ++scalar;
    if (v.regime == Regime::md_override) ++fire;
    if (v.regime == Regime::scalar_trust || v.regime == Regime::scalar_reverse) ++mix;
    if (v.regime == Regime::early_fallback) ++early;
  }
  const double scale = 100.0 / static_cast<double>(u.items);
  u.pct_scalar = scalar * scale;
  u.pct_md_fire = fire * scale;
  u.pct_mix = mix * scale;
  u.pct_early = early * scale;
  u.branch_pure = !(mix > 0 && early > 0);
  return u;
}

UsageReport usage_report(const std::vector<ArchiveItem>& items, const std::vector<Verdict>& verdicts,
                         double tau_dim) {
  std::unordered_map<std::string, std::string> benchmark_of;
  for (const auto& item : items) benchmark_of.emplace(item.trajectory.item_id, item.trajectory.benchmark_id);

  std::map<std::string, std::vector<Verdict>> groups;
  for (const auto& v : verdicts) {
    auto it = benchmark_of.find(v.item_id);
    if (it == benchmark_of.end()) throw InputError(v.item_id, "verdict for an item not in the archive");
    groups[it->second].push_back(v);
  }

  UsageReport r;
  r.pooled = usage_stats(verdicts, tau_dim);
  for (const auto& [bench, vs] : groups) r.per_benchmark.emplace(bench, usage_stats(vs, tau_dim));

  auto& m = r.benchmark_mean;
  for (const auto& [_, u] : r.per_benchmark) {
    m.items += u.items;
    m.pct_scalar += u.pct_scalar;
    m.pct_md_fire += u.pct_md_fire;
    m.pct_mix += u.pct_mix;
    m.pct_early += u.pct_early;
  }
  const double k = static_cast<double>(r.per_benchmark.size());
  m.pct_scalar /= k;
  m.pct_md_fire /= k;
  m.pct_mix /= k;
  m.pct_early /= k;
  m.branch_pure = r.pooled.branch_pure;
  return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string usage_object(const UsageStats& u) {
  detail::JsonWriter w;
  w.field("items", u.items)
      .field("pct_scalar", u.pct_scalar)
      .field("pct_md_fire", u.pct_md_fire)
      .field("pct_mix", u.pct_mix)
      .field("pct_early", u.pct_early)
      .field("branch_pure", u.branch_pure);
  return w.str();
}

}  // namespace

std::string cells_csv(std::span<const CellResult> cells) {
  std::string out = "model_id,benchmark_id,mc1_base,mc1_trace,mc1_delta,mc2_base,mc2_trace,mc2_delta\n";
  for (const auto& c : cells) {
    out += csv_field(c.model_id) + ',' + csv_field(c.benchmark_id);
    for (double x : {c.mc1_base, c.mc1_trace, c.mc1_delta(), c.mc2_base, c.mc2_trace, c.mc2_delta()}) {
      out += ',' + format_double(x);
    }
    out += '\n';
  }
  return out;
}

std::vector<CellResult> parse_cells_csv(std::string_view text) {
  std::vector<CellResult> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("model_id,benchmark_id,mc1_base,mc1_trace", 0) != 0) throw ParseError(1, "unexpected cells header");
      continue;
    }
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    f.push_back(cur);
    if (f.size() != 8) throw ParseError(line_no, "expected 8 columns, got " + std::to_string(f.size()));
    auto num = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return x;
      } catch (const std::exception&) {
        throw ParseError(line_no, "not a number: '" + s + "'");
      }
    };
    CellResult c;
    c.model_id = f[0];
    c.benchmark_id = f[1];
    c.mc1_base = num(f[2]);
    c.mc1_trace = num(f[3]);
    c.mc2_base = num(f[5]);
    c.mc2_trace = num(f[6]);
    out.push_back(c);
  }
  return out;
}

std::string summary_json(std::span<const CellResult> cells, const GridSummary& s) {
  std::vector<std::string> rows;
  for (const auto& c : cells) {
    detail::JsonWriter w;
    w.field("model_id", c.model_id)
        .field("benchmark_id", c.benchmark_id)
        .field("items", c.items)
        .field("mc1_base", c.mc1_base)
        .field("mc1_trace", c.mc1_trace)
        .field("mc1_delta", c.mc1_delta())
        .field("mc2_base", c.mc2_base)
        .field("mc2_trace", c.mc2_trace)
        .field("mc2_delta", c.mc2_delta());
    rows.push_back(w.str());
  }
  detail::JsonWriter w;
  w.field("schema", "trace.summary/1")
      .field("cells", s.cells)
      .field("mean_mc1_delta", s.mean_mc1_delta)
      .field("mean_mc2_delta", s.mean_mc2_delta)
      .field("min_mc1_delta", s.min_mc1_delta)
      .field("max_mc1_delta", s.max_mc1_delta)
      .field("min_mc2_delta", s.min_mc2_delta)
      .field("max_mc2_delta", s.max_mc2_delta)
      .field("regressions_mc1", s.regressions_mc1)
      .field("regressions_mc2", s.regressions_mc2)
      .raw_field("per_cell", detail::json_array(rows));
  return w.str() + "\n";
}

std::string usage_json(const UsageReport& r) {
  detail::JsonWriter per;
  for (const auto& [bench, u] : r.per_benchmark) per.raw_field(bench, usage_object(u));
  detail::JsonWriter w;
  w.field("schema", "trace.usage/1")
      .raw_field("pooled", usage_object(r.pooled))
      .raw_field("benchmark_mean", usage_object(r.benchmark_mean))
      .raw_field("per_benchmark", per.str());
  return w.str() + "\n";
}

int marker_depth(const CandidateTrajectory& item, const Verdict& verdict) {
  if (verdict.diagnostics.ell_star) return *verdict.diagnostics.ell_star;
  if (verdict.regime == Regime::early_fallback) return 0;
  return item.depth;
}

std::string trajectory_svg(const CandidateTrajectory& item, const Verdict& verdict) {
  constexpr double left = 50, right = 20, top = 30, bottom = 40;
  const double w = kPlotWidth - left - right;
  const double h = kPlotHeight - top - bottom;
  const int L = item.depth;
  auto x_of = [&](int l) { return left + w * l / static_cast<double>(L); };
  auto y_of = [&](double p) { return top + h * (1.0 - p); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kPlotWidth) + "\" height=\"" +
         std::to_string(kPlotHeight) + "\" viewBox=\"0 0 " + std::to_string(kPlotWidth) + " " +
         std::to_string(kPlotHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed(left, 0) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" +
         xml_escape(item.item_id) + " (" +
         std::string(to_string(verdict.regime)) + ")</text>\n";
  out += "<line class=\"axis\" x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top + h, 2) + "\" x2=\"" +
         fixed(left + w, 2) + "\" y2=\"" + fixed(top + h, 2) + "\" stroke=\"black\"/>\n";
  out += "<line class=\"axis\" x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top, 2) + "\" x2=\"" + fixed(left, 2) +
         "\" y2=\"" + fixed(top + h, 2) + "\" stroke=\"black\"/>\n";

  static constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::vector<std::vector<double>> pi;
  for (int l = 0; l <= L; ++l) pi.push_back(layer_stats(item.layer(l)).pi);
  for (std::size_t i = 0; i < item.candidate_count(); ++i) {
    out += "<polyline class=\"candidate\" data-index=\"" + std::to_string(i) + "\" fill=\"none\" stroke=\"" +
           kColors[i % std::size(kColors)] + "\" stroke-width=\"1.5\" points=\"";
    for (int l = 0; l <= L; ++l) {
      if (l) out += ' ';
      out += fixed(x_of(l), 2) + ',' + fixed(y_of(pi[l][i]), 2);
    }
    out += "\"/>\n";
  }

  const double mx = x_of(marker_depth(item, verdict));
  out += "<line class=\"marker\" x1=\"" + fixed(mx, 2) + "\" y1=\"" + fixed(top, 2) + "\" x2=\"" + fixed(mx, 2) +
         "\" y2=\"" + fixed(top + h, 2) + "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  out += "<text x=\"" + fixed(left + w / 2, 0) + "\" y=\"" + std::to_string(kPlotHeight - 10) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">depth</text>\n";
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace trace
