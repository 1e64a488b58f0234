#pragma once

// JSON and CSV renderings of fits, classifications and prediction scenarios.

#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "viewfit/classify.hpp"
#include "viewfit/io.hpp"
#include "viewfit/models.hpp"
#include "viewfit/predict.hpp"

namespace viewfit {

inline nlohmann::json params_to_json(ModelKind kind, const ParamSet& p) {
  nlohmann::json j = nlohmann::json::object();
  const auto names = param_names(kind);
  const auto v = pack(kind, p);
  for (std::size_t i = 0; i < v.size(); ++i) j[std::string(names[i])] = v[i];
  return j;
}

inline ParamSet params_from_json(ModelKind kind, const nlohmann::json& j) {
  const auto names = param_names(kind);
  ParamVector v(param_count(kind));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(std::string(names[i])).get<double>();
  return unpack(kind, v);
}

inline nlohmann::json fit_to_json(const FitResult& f) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(f.kind));
  j["params"] = params_to_json(f.kind, f.params);
  j["msc"] = f.msc;
  j["mer"] = f.mer;
  j["gof"] = f.gof;
  j["df"] = f.df;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  if (f.r) j["r"] = *f.r;
  return j;
}

inline FitResult fit_from_json(const nlohmann::json& j) {
  FitResult f;
  const auto kind = parse_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::ParseError, "unknown kind " + j.at("kind").get<std::string>());
  f.kind = *kind;
  f.params = params_from_json(f.kind, j.at("params"));
  f.msc = j.at("msc").get<double>();
  f.mer = j.at("mer").get<double>();
  f.gof = j.at("gof").get<double>();
  f.df = j.at("df").get<std::size_t>();
  f.converged = j.at("converged").get<bool>();
  f.iterations = j.value("iterations", 0);
  if (j.contains("r")) f.r = j.at("r").get<double>();
  return f;
}

inline std::string selected_name(const std::optional<ModelKind>& k) {
  return k ? std::string(to_string(*k)) : std::string("UNCLASSIFIED");
}

inline nlohmann::json classification_to_json(const ClassificationRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  if (r.category) j["category"] = *r.category;
  j["total_views"] = r.total_views;
  j["popularity_class"] = std::string(to_string(popularity_class(r.total_views)));
  j["n"] = r.n;
  j["selected"] = selected_name(r.selected);
  j["selected_fit"] = fit_to_json(r.selected_fit);
  j["reason"] = r.reason;
  j["mer_threshold_used"] = r.mer_threshold_used;
  auto cands = nlohmann::json::array();
  for (const auto& c : r.candidates) cands.push_back(fit_to_json(c));
  j["candidates"] = std::move(cands);
  if (r.two_phase) {
    nlohmann::json t;
    t["k_index"] = r.two_phase->tail.k_index;
    t["tail"] = {{"slope", r.two_phase->tail.line.slope},
                 {"intercept", r.two_phase->tail.line.intercept},
                 {"r", r.two_phase->tail.line.r}};
    t["head_selected"] = selected_name(r.two_phase->head_selection.selected);
    auto heads = nlohmann::json::array();
    for (const auto& c : r.two_phase->head_candidates) heads.push_back(fit_to_json(c));
    t["head_candidates"] = std::move(heads);
    j["two_phase"] = std::move(t);
  } else {
    j["two_phase"] = nullptr;
  }
  return j;
}

/// Reads the fields needed for reporting back from classification JSON.
inline ClassificationRecord classification_from_json(const nlohmann::json& j) {
  ClassificationRecord r;
  r.id = j.at("id").get<std::string>();
  if (j.contains("category")) r.category = j.at("category").get<std::string>();
  r.total_views = j.at("total_views").get<std::int64_t>();
  r.n = j.value("n", std::size_t{0});
  const auto sel = j.at("selected").get<std::string>();
  if (sel != "UNCLASSIFIED") {
    const auto kind = parse_kind(sel);
    if (!kind) throw Error(ErrorCode::ParseError, "unknown kind " + sel);
    r.selected = *kind;
  }
  r.selected_fit = fit_from_json(j.at("selected_fit"));
  r.reason = j.value("reason", std::string{});
  r.mer_threshold_used = j.value("mer_threshold_used", 0.05);
  for (const auto& c : j.at("candidates")) r.candidates.push_back(fit_from_json(c));
  return r;
}

/// One summary row per series.
inline void write_classification_csv(std::ostream& out, std::span<const ClassificationRecord> records) {
  out << "id,selected,mer,gof,msc,df,n,category,popularity_class,tail_k,head_selected\n";
  for (const auto& r : records) {
    out << csv::quote(r.id) << ',' << selected_name(r.selected) << ',' << format_double(r.selected_fit.mer) << ','
        << format_double(r.selected_fit.gof) << ',' << format_double(r.selected_fit.msc) << ',' << r.selected_fit.df
        << ',' << r.n << ',' << csv::quote(r.category.value_or("")) << ','
        << to_string(popularity_class(r.total_views)) << ',';
    if (r.two_phase) out << r.two_phase->tail.k_index << ',' << selected_name(r.two_phase->head_selection.selected);
    else out << ',';
    out << '\n';
  }
}

inline std::string percent(double x) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(1);
  s << x;
  return s.str();
}

/// Model-by-group percentage table (one column per group, rows per kind).
inline void write_distribution_csv(std::ostream& out, const CorpusReport& report) {
  out << "model";
  for (const auto& g : report.groups) out << ',' << csv::quote(g.group);
  out << '\n';
  for (std::size_t slot = 0; slot <= kUnclassifiedSlot; ++slot) {
    out << (slot == kUnclassifiedSlot ? std::string("UNCLASSIFIED") : std::string(to_string(kAllKinds[slot])));
    for (const auto& g : report.groups) out << ',' << percent(g.percent(slot));
    out << '\n';
  }
  out << "count";
  for (const auto& g : report.groups) out << ',' << g.total;
  out << '\n';
}

inline void write_mer_histogram_csv(std::ostream& out, const CorpusReport& report) {
  out << "group,count,mer_le_0.05,mer_0.05_0.1,mer_gt_0.1\n";
  for (const auto& g : report.groups) {
    out << csv::quote(g.group) << ',' << g.total;
    for (auto b : g.mer_bins) {
      out << ',' << percent(g.total ? 100.0 * static_cast<double>(b) / static_cast<double>(g.total) : 0.0);
    }
    out << '\n';
  }
}

/// 95% proportion intervals of each kind's share over all records.
inline void write_proportion_ci_csv(std::ostream& out, std::span<const ClassificationRecord> records,
                                    double level = 0.95) {
  out << "model,successes,trials,low,point,high\n";
  const auto report = corpus_report(records, GroupBy::None);
  if (report.groups.empty()) return;
  const auto& g = report.groups.front();
  for (std::size_t slot = 0; slot <= kUnclassifiedSlot; ++slot) {
    const auto ci = proportion_ci(g.counts[slot], g.total, level);
    out << (slot == kUnclassifiedSlot ? std::string("UNCLASSIFIED") : std::string(to_string(kAllKinds[slot]))) << ','
        << g.counts[slot] << ',' << g.total << ',' << format_double(ci.low) << ',' << format_double(ci.point) << ','
        << format_double(ci.high) << '\n';
  }
}

inline nlohmann::json report_to_json(const CorpusReport& report) {
  auto groups = nlohmann::json::array();
  for (const auto& g : report.groups) {
    nlohmann::json counts;
    for (std::size_t slot = 0; slot < kAllKinds.size(); ++slot) counts[std::string(to_string(kAllKinds[slot]))] = g.counts[slot];
    counts["UNCLASSIFIED"] = g.counts[kUnclassifiedSlot];
    groups.push_back({{"group", g.group},
                      {"total", g.total},
                      {"counts", counts},
                      {"mer_bins", {{"le_0.05", g.mer_bins[0]}, {"0.05_0.1", g.mer_bins[1]}, {"gt_0.1", g.mer_bins[2]}}}});
  }
  return groups;
}

inline void write_windows_csv(std::ostream& out, std::span<const WindowResult> results) {
  out << "id,selected,t_f,horizon,soft_window,soft_normalized,soft_bounded,hard_window,hard_normalized,hard_bounded\n";
  for (const auto& r : results) {
    out << csv::quote(r.id) << ',' << selected_name(r.selected) << ',' << format_double(r.t_f) << ','
        << format_double(r.horizon) << ',' << format_double(r.soft.size) << ',' << format_double(r.soft_normalized)
        << ',' << (r.soft.bounded ? 1 : 0) << ',' << format_double(r.hard.size) << ','
        << format_double(r.hard_normalized) << ',' << (r.hard.bounded ? 1 : 0) << '\n';
  }
}

inline std::string fixed(double x, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

/// Mean/variance/count layout of the half-life and fixed-days tables.
inline void write_mean_var_csv(std::ostream& out, std::span<const WindowStats> stats, bool soft = true) {
  out << "model,mean,var,count\n";
  for (const auto& s : stats) {
    out << s.model << ',' << fixed(soft ? s.soft_mean : s.hard_mean, 7) << ','
        << fixed(soft ? s.soft_var : s.hard_var, 7) << ',' << s.count << '\n';
  }
}

/// Distribution / hard / soft layout of the fixed-window tables.
inline void write_window_table_csv(std::ostream& out, std::span<const WindowStats> stats) {
  out << "model,distribution_pct,hard_mean,hard_bounded_pct,soft_mean,soft_bounded_pct\n";
  for (const auto& s : stats) {
    out << s.model << ',' << percent(s.distribution_pct) << ',' << fixed(s.hard_mean, 2) << ','
        << percent(s.hard_bounded_pct) << ',' << fixed(s.soft_mean, 2) << ',' << percent(s.soft_bounded_pct) << '\n';
  }
}

inline nlohmann::json aggregate_to_json(const ScenarioResult& r) {
  nlohmann::json j;
  j["scenario"] = r.setup.name;
  j["bound"] = r.setup.bound;
  j["evaluated"] = r.results.size();
  j["skipped"] = r.skipped.size();
  auto rows = nlohmann::json::array();
  for (const auto& s : r.aggregate) {
    rows.push_back({{"model", s.model},
                    {"count", s.count},
                    {"distribution_pct", s.distribution_pct},
                    {"soft_mean", s.soft_mean},
                    {"soft_var", s.soft_var},
                    {"soft_bounded_pct", s.soft_bounded_pct},
                    {"hard_mean", s.hard_mean},
                    {"hard_var", s.hard_var},
                    {"hard_bounded_pct", s.hard_bounded_pct}});
  }
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace viewfit
