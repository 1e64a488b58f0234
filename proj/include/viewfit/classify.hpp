#pragma once

// Model scoring (MSC, MER, GoF), best-model selection, linear-tail detection
// and corpus-level distribution reports.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "viewfit/error.hpp"
#include "viewfit/models.hpp"
#include "viewfit/parallel.hpp"
#include "viewfit/regress.hpp"
#include "viewfit/series.hpp"

namespace viewfit {

struct FitResult {
  ModelKind kind = ModelKind::Linear;
  ParamSet params;
  double msc = 0.0;
  double mer = 0.0;
  double gof = 0.0;
  std::size_t df = 0;
  bool converged = false;
  int iterations = 0;
  std::optional<double> r;  ///< coefficient of determination, linear fits only
};

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::ShapeError, "series and model values differ in length");
}
}  // namespace detail

/// Sum of squared residuals.
inline double msc(std::span<const double> observed, std::span<const double> model) {
  detail::require_same_length(observed.size(), model.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = model[i] - observed[i];
    acc += e * e;
  }
  return acc;
}

inline double msc(const NormalizedSeries& s, std::span<const double> model) { return msc(s.v, model); }

/// Mean of |S - v| / (v + 1); the +1 keeps v = 0 finite.
inline double mer(std::span<const double> observed, std::span<const double> model) {
  detail::require_same_length(observed.size(), model.size());
  if (observed.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) acc += std::abs(model[i] - observed[i]) / (observed[i] + 1.0);
  return acc / static_cast<double>(observed.size());
}

inline double mer(const NormalizedSeries& s, std::span<const double> model) { return mer(s.v, model); }

inline double gof(double msc_value, std::size_t n, std::size_t p) {
  if (n <= p) throw Error(ErrorCode::InsufficientDf, "need more observations than parameters");
  return msc_value / static_cast<double>(n - p);
}

inline std::vector<double> model_values(ModelKind kind, const ParamSet& p, std::span<const double> u) {
  std::vector<double> out;
  out.reserve(u.size());
  for (double t : u) out.push_back(evaluate(kind, p, t));
  return out;
}

/// Scores a parameter set on a series.
inline FitResult score(ModelKind kind, const ParamSet& p, const NormalizedSeries& s) {
  FitResult f;
  f.kind = kind;
  f.params = p;
  const auto values = model_values(kind, p, s.u);
  f.msc = msc(s, values);
  f.mer = mer(s, values);
  f.df = s.size() - param_count(kind);
  f.gof = gof(f.msc, s.size(), param_count(kind));
  return f;
}

inline constexpr std::size_t kMinClassificationPoints = 6;

/// Fits the given kinds (default: all seven, in kind order).
inline std::vector<FitResult> fit_all(const NormalizedSeries& s, const LmConfig& config = {},
                                      std::span<const ModelKind> kinds = kAllKinds) {
  if (s.size() < kMinClassificationPoints) {
    throw Error(ErrorCode::TooShortForClassification,
                "need at least " + std::to_string(kMinClassificationPoints) + " observations");
  }
  std::vector<FitResult> out;
  out.reserve(kinds.size());
  for (auto kind : kinds) {
    if (kind == ModelKind::Linear) {
      ParamSet p;
      double r = 1.0;
      try {
        const auto line = linear_fit(s);
        p.s0 = line.intercept;
        p.lambda = line.slope;
        r = line.r;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance) throw;
        // Constant series: the horizontal line fits exactly.
        p.s0 = s.v.front();
        p.lambda = 0.0;
      }
      auto f = score(kind, p, s);
      f.r = r;
      f.converged = true;
      out.push_back(f);
      continue;
    }
    const auto lm = lm_fit(kind, s, default_init(kind, s), config);
    auto f = score(kind, lm.params, s);
    f.msc = lm.msc;
    f.gof = gof(f.msc, s.size(), param_count(kind));
    f.converged = lm.converged;
    f.iterations = lm.iterations;
    out.push_back(f);
  }
  return out;
}

struct SelectionConfig {
  double mer_threshold = 0.05;
  /// Survivors whose GoF is within max(gof_tie_absolute, gof_tie_relative * best)
  /// of the best GoF are treated as tied; among tied fits the one with fewer
  /// parameters wins, then the smaller GoF, then kind order. The absolute floor
  /// absorbs rounding noise of exact fits. Set gof_tie_relative = 0 for the
  /// plain smallest-GoF rule.
  double gof_tie_absolute = 1e-20;
  double gof_tie_relative = 0.05;
};

struct Selection {
  std::optional<ModelKind> selected;  ///< nullopt means unclassified
  std::size_t fit_index = 0;          ///< selected fit, or the lowest-MER candidate when unclassified
  std::string reason;
};

/// Keeps candidates with MER <= threshold and picks the smallest GoF, up to the
/// tie band of SelectionConfig. Independent of candidate order.
inline Selection select_model(std::span<const FitResult> candidates, const SelectionConfig& cfg = {}) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no candidate fits");
  auto kind_less = [&](std::size_t a, std::size_t b) {
    const auto pa = param_count(candidates[a].kind), pb = param_count(candidates[b].kind);
    if (pa != pb) return pa < pb;
    return kind_index(candidates[a].kind) < kind_index(candidates[b].kind);
  };

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].mer <= cfg.mer_threshold && std::isfinite(candidates[i].gof)) survivors.push_back(i);
  }
  Selection sel;
  if (survivors.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const auto& a = candidates[i];
      const auto& b = candidates[best];
      if (a.mer < b.mer || (a.mer == b.mer && kind_less(i, best))) best = i;
    }
    sel.fit_index = best;
    sel.reason = "no candidate with MER <= threshold; reporting lowest-MER fit";
    return sel;
  }
  double best_gof = candidates[survivors.front()].gof;
  for (auto i : survivors) best_gof = std::min(best_gof, candidates[i].gof);
  const double tie = std::max(cfg.gof_tie_absolute, cfg.gof_tie_relative * best_gof);
  std::optional<std::size_t> pick;
  for (auto i : survivors) {
    if (candidates[i].gof > best_gof + tie) continue;
    if (!pick) {
      pick = i;
      continue;
    }
    const auto& a = candidates[i];
    const auto& b = candidates[*pick];
    const auto pa = param_count(a.kind), pb = param_count(b.kind);
    if (pa != pb ? pa < pb : (a.gof != b.gof ? a.gof < b.gof : kind_index(a.kind) < kind_index(b.kind))) pick = i;
  }
  sel.selected = candidates[*pick].kind;
  sel.fit_index = *pick;
  sel.reason = "smallest GoF among " + std::to_string(survivors.size()) + " candidate(s) with MER <= threshold";
  if (candidates[*pick].gof != best_gof) sel.reason += " (fewer parameters within the GoF tie band)";
  return sel;
}

struct LinearTail {
  std::size_t k_index = 1;  ///< 1-based index of the first observation of the linear tail
  LinearFit line;
};

/// Drops leading observations one at a time until the remaining suffix is a
/// line with |1 - R| <= epsilon. A constant suffix counts as linear (R = 1).
/// Returns nullopt when no suffix of at least `min_tail` points qualifies.
inline std::optional<LinearTail> trim_linear_tail(const NormalizedSeries& s, double epsilon = 0.01,
                                                  std::size_t min_head = 5, std::size_t min_tail = 5) {
  const auto n = s.size();
  if (min_tail < 2) throw Error(ErrorCode::InvalidArgument, "min_tail must be at least 2");
  if (n < min_head + min_tail) throw Error(ErrorCode::TooShort, "series too short for tail trimming");
  for (std::size_t first = 0; first + min_tail <= n; ++first) {
    const std::span<const double> u(s.u.data() + first, n - first), v(s.v.data() + first, n - first);
    LinearFit line;
    try {
      line = linear_fit(u, v);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      line = LinearFit{0.0, v.front(), 1.0};
    }
    if (std::abs(1.0 - line.r) <= epsilon) return LinearTail{first + 1, line};
  }
  return std::nullopt;
}

struct TwoPhaseFit {
  LinearTail tail;
  std::vector<FitResult> head_candidates;  ///< nonlinear kinds fitted on observations 1..k
  Selection head_selection;
};

struct ClassificationRecord {
  std::string id;
  std::optional<std::string> category;
  std::int64_t total_views = 0;
  std::optional<ModelKind> selected;
  FitResult selected_fit;
  std::vector<FitResult> candidates;
  std::string reason;
  std::optional<TwoPhaseFit> two_phase;
  double mer_threshold_used = 0.05;
  std::size_t n = 0;
};

struct ClassifyConfig {
  LmConfig lm;
  SelectionConfig selection;
  double tail_epsilon = 0.01;
  std::size_t min_head = 5;
  std::size_t min_tail = 5;
};

/// Classifies a normalized series.
inline ClassificationRecord classify_normalized(const NormalizedSeries& s, const ClassifyConfig& cfg = {}) {
  ClassificationRecord out;
  out.n = s.size();
  out.mer_threshold_used = cfg.selection.mer_threshold;
  out.candidates = fit_all(s, cfg.lm);
  const auto sel = select_model(out.candidates, cfg.selection);
  out.selected = sel.selected;
  out.selected_fit = out.candidates[sel.fit_index];
  out.reason = sel.reason;

  if (s.size() >= cfg.min_head + cfg.min_tail) {
    if (auto tail = trim_linear_tail(s, cfg.tail_epsilon, cfg.min_head, cfg.min_tail);
        tail && tail->k_index > cfg.min_head) {
      const auto head = slice(s, 0, tail->k_index);
      if (head.size() >= kMinClassificationPoints) {
        TwoPhaseFit two;
        two.tail = *tail;
        two.head_candidates = fit_all(head, cfg.lm, kNonlinearKinds);
        two.head_selection = select_model(two.head_candidates, cfg.selection);
        out.two_phase = std::move(two);
      }
    }
  }
  return out;
}

/// Validates, normalizes and classifies one record.
inline ClassificationRecord classify_series(const SeriesRecord& record, const ClassifyConfig& cfg = {}) {
  if (auto diag = check_record(record)) throw Error(diag->code, record.id + ": " + diag->message);
  auto out = classify_normalized(normalize(record), cfg);
  out.id = record.id;
  out.category = record.category;
  out.total_views = total_views_of(record);
  return out;
}

/// Classifies every record (in parallel); output is ordered by record id.
inline std::vector<ClassificationRecord> classify_corpus(std::span<const SeriesRecord> records,
                                                         const ClassifyConfig& cfg = {}, unsigned threads = 0) {
  std::vector<ClassificationRecord> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) { out[i] = classify_series(records[i], cfg); });
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

enum class GroupBy { None, Category, Popularity };

inline constexpr std::size_t kUnclassifiedSlot = kAllKinds.size();

struct GroupDistribution {
  std::string group;
  std::size_t total = 0;
  std::array<std::size_t, kAllKinds.size() + 1> counts{};  ///< per kind, last slot = unclassified
  std::array<std::size_t, 3> mer_bins{};                   ///< [0, 0.05], (0.05, 0.1], (0.1, inf)

  [[nodiscard]] double percent(std::size_t slot) const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(counts[slot]) / static_cast<double>(total);
  }
};

struct CorpusReport {
  GroupBy group_by = GroupBy::None;
  std::vector<GroupDistribution> groups;
};

inline std::size_t mer_bin(double mer_value) {
  if (mer_value <= 0.05) return 0;
  if (mer_value <= 0.1) return 1;
  return 2;
}

inline std::string group_key(const ClassificationRecord& r, GroupBy by) {
  switch (by) {
    case GroupBy::None: return "All";
    case GroupBy::Category: return r.category ? canonical_category(*r.category) : std::string(kOtherCategory);
    case GroupBy::Popularity: return std::string(to_string(popularity_class(r.total_views)));
  }
  return "All";
}

/// Per-group model distribution and MER histogram. Groups follow category-list
/// or popularity-class order and only groups with records are emitted.
inline CorpusReport corpus_report(std::span<const ClassificationRecord> records, GroupBy by = GroupBy::None) {
  std::vector<std::string> order;
  switch (by) {
    case GroupBy::None: order = {"All"}; break;
    case GroupBy::Category:
      for (auto c : kCategories) order.emplace_back(c);
      order.emplace_back(kOtherCategory);
      break;
    case GroupBy::Popularity:
      for (auto c : kPopularityClasses) order.emplace_back(to_string(c));
      break;
  }
  std::map<std::string, GroupDistribution> acc;
  for (const auto& r : records) {
    auto key = group_key(r, by);
    auto& g = acc[key];
    g.group = key;
    ++g.total;
    ++g.counts[r.selected ? kind_index(*r.selected) : kUnclassifiedSlot];
    ++g.mer_bins[mer_bin(r.selected_fit.mer)];
  }
  CorpusReport report;
  report.group_by = by;
  for (const auto& key : order) {
    if (auto it = acc.find(key); it != acc.end()) report.groups.push_back(it->second);
  }
  return report;
}

struct ProportionInterval {
  double low = 0.0;
  double point = 0.0;
  double high = 1.0;
};

/// Clopper-Pearson exact interval for a binomial proportion.
inline ProportionInterval proportion_ci(std::uint64_t successes, std::uint64_t trials, double level = 0.95) {
  if (trials == 0 || successes > trials) throw Error(ErrorCode::InvalidArgument, "need 0 <= successes <= trials, trials >= 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  const double alpha = 1.0 - level;
  const auto x = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  ProportionInterval ci;
  ci.point = x / n;
  ci.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(x, n - x + 1.0, alpha / 2.0);
  ci.high = successes == trials ? 1.0 : boost::math::ibeta_inv(x + 1.0, n - x, 1.0 - alpha / 2.0);
  return ci;
}

/// Treats a modified kind and its fixed-population base as the same label.
constexpr bool same_family(ModelKind a, ModelKind b) noexcept { return base_kind(a) == base_kind(b); }

}  // namespace viewfit
