#pragma once

// Forward prediction windows: fit on a training prefix, then measure how long the
// fitted curve keeps its running mean error rate under a bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "viewfit/classify.hpp"
#include "viewfit/error.hpp"
#include "viewfit/models.hpp"
#include "viewfit/parallel.hpp"
#include "viewfit/series.hpp"

namespace viewfit {

struct Window {
  double size = 0.0;       ///< days past the split
  std::size_t points = 0;  ///< future observations covered
  bool bounded = false;    ///< the window reached the horizon
};

/// Inclusive bound test with a 1e-12 relative allowance for summation rounding.
constexpr bool within_bound(double mean, double bound) noexcept { return mean <= bound + 1e-12 * bound; }

namespace detail {
inline void require_future(std::span<const double> offsets, std::span<const double> errors) {
  if (offsets.size() != errors.size()) throw Error(ErrorCode::ShapeError, "offsets and errors differ in length");
  if (offsets.empty()) throw Error(ErrorCode::EmptyFuture, "no observations after the split");
}
}  // namespace detail

/// Largest p such that the mean of the first p future errors is within the bound.
/// `offsets[i]` is t_{f+1+i} - t_f.
inline Window soft_window(std::span<const double> offsets, std::span<const double> errors, double bound = 0.05) {
  detail::require_future(offsets, errors);
  const auto m = errors.size();
  std::size_t best = 0;
  double sum = 0.0;
  for (std::size_t p = 1; p <= m; ++p) {
    sum += errors[p - 1];
    if (within_bound(sum / static_cast<double>(p), bound)) best = p;
  }
  return Window{best == 0 ? 0.0 : offsets[best - 1], best, best == m};
}

/// First-crossing window: the k >= 0 with mean_k within the bound and mean_{k+1}
/// beyond it, taking the earliest such k (mean_0 = 0). Without a crossing the
/// window spans the whole horizon and is bounded.
inline Window hard_window(std::span<const double> offsets, std::span<const double> errors, double bound = 0.05) {
  detail::require_future(offsets, errors);
  const auto m = errors.size();
  double sum = 0.0;
  for (std::size_t p = 1; p <= m; ++p) {
    sum += errors[p - 1];
    if (!within_bound(sum / static_cast<double>(p), bound)) {
      const auto k = p - 1;
      return Window{k == 0 ? 0.0 : offsets[k - 1], k, false};
    }
  }
  return Window{offsets[m - 1], m, true};
}

/// Per-point error rates |S(u) - v| / (v + 1) of a fitted curve on future points
/// expressed in the training prefix's scale.
inline std::vector<double> future_errors(ModelKind kind, const ParamSet& params, std::span<const Observation> future,
                                         const Scale& prefix_scale) {
  std::vector<double> out;
  out.reserve(future.size());
  for (const auto& o : future) {
    const double u = o.t / prefix_scale.t;
    const double v = o.y / prefix_scale.y;
    out.push_back(std::abs(evaluate(kind, params, u) - v) / (v + 1.0));
  }
  return out;
}

enum class Scenario { HalfLife, FixedDays, FixedWindow };

struct PredictionSetup {
  Scenario scenario = Scenario::HalfLife;
  double days = 50.0;               ///< training length for FixedDays, window T for FixedWindow
  double horizon_multiplier = 3.0;  ///< FixedWindow horizon = multiplier * T past the split
  double bound = 0.05;
  std::size_t min_future_points = 10;  ///< HalfLife and FixedWindow eligibility
  std::string name = "halflife";
};

inline PredictionSetup half_life_setup() { return {}; }

inline PredictionSetup fixed_days_setup(double days = 50.0) {
  PredictionSetup s;
  s.scenario = Scenario::FixedDays;
  s.days = days;
  s.name = "fixed" + std::to_string(static_cast<long long>(days));
  return s;
}

inline PredictionSetup fixed_window_setup(double window_days) {
  PredictionSetup s;
  s.scenario = Scenario::FixedWindow;
  s.days = window_days;
  s.name = "window" + std::to_string(static_cast<long long>(window_days));
  return s;
}

struct WindowResult {
  std::string id;
  std::optional<ModelKind> selected;  ///< model chosen on the training prefix
  double t_f = 0.0;
  double horizon = 0.0;  ///< days from the split to the last observation inside the horizon
  Window soft;
  Window hard;
  double soft_normalized = 0.0;  ///< soft / (t_n - t_f), or soft / T for fixed windows
  double hard_normalized = 0.0;
};

/// Evaluates one record under a scenario; throws Error when the record is ineligible.
inline WindowResult evaluate_record(const SeriesRecord& record, const PredictionSetup& setup,
                                    const ClassifyConfig& cfg = {}) {
  if (auto diag = check_record(record)) throw Error(diag->code, diag->message);
  const auto& obs = record.observations;
  const double t_n = obs.back().t;

  double target = 0.0;
  switch (setup.scenario) {
    case Scenario::HalfLife: target = t_n / 2.0; break;
    case Scenario::FixedDays:
      if (t_n < setup.days) {
        throw Error(ErrorCode::TooShort, "observed span shorter than " + std::to_string(setup.days) + " days");
      }
      target = setup.days;
      break;
    case Scenario::FixedWindow: target = setup.days; break;
  }
  // Last sample at or before the target time.
  const auto it = std::upper_bound(obs.begin(), obs.end(), target, [](double t, const Observation& o) { return t < o.t; });
  if (it == obs.begin()) throw Error(ErrorCode::TooShort, "no observation at or before the split");
  const auto f = static_cast<std::size_t>(it - obs.begin()) - 1;
  const double t_f = obs[f].t;

  double horizon_end = t_n;
  if (setup.scenario == Scenario::FixedWindow) horizon_end = t_f + setup.horizon_multiplier * setup.days;

  std::size_t last = f;
  while (last + 1 < obs.size() && obs[last + 1].t <= horizon_end) ++last;
  const std::size_t future_count = last - f;
  if (future_count == 0) throw Error(ErrorCode::EmptyFuture, "no observations after the split");
  if (setup.scenario != Scenario::FixedDays && future_count < setup.min_future_points) {
    throw Error(ErrorCode::TooShort, "fewer than " + std::to_string(setup.min_future_points) +
                                         " observations after the split");
  }

  const std::span<const Observation> prefix(obs.data(), f + 1);
  const std::span<const Observation> future(obs.data() + f + 1, future_count);
  const auto train = normalize(prefix);
  const auto candidates = fit_all(train, cfg.lm);
  const auto sel = select_model(candidates, cfg.selection);
  const auto& fit = candidates[sel.fit_index];

  const auto errors = future_errors(fit.kind, fit.params, future, train.scale);
  std::vector<double> offsets;
  offsets.reserve(future_count);
  for (const auto& o : future) offsets.push_back(o.t - t_f);

  WindowResult r;
  r.id = record.id;
  r.selected = sel.selected;
  r.t_f = t_f;
  r.horizon = offsets.back();
  r.soft = soft_window(offsets, errors, setup.bound);
  r.hard = hard_window(offsets, errors, setup.bound);
  const double denom = setup.scenario == Scenario::FixedWindow ? setup.days : t_n - t_f;
  r.soft_normalized = r.soft.size / denom;
  r.hard_normalized = r.hard.size / denom;
  return r;
}

struct WindowStats {
  std::string model;  ///< kind name, "unclassified" or "All"
  std::size_t count = 0;
  double distribution_pct = 0.0;
  double soft_mean = 0.0, soft_var = 0.0, soft_bounded_pct = 0.0;
  double hard_mean = 0.0, hard_var = 0.0, hard_bounded_pct = 0.0;
};

struct ScenarioResult {
  PredictionSetup setup;
  std::vector<WindowResult> results;  ///< ordered by id
  std::vector<Diagnostic> skipped;    ///< ordered by id
  std::vector<WindowStats> aggregate;  ///< kinds in kind order, then unclassified, then All
};

/// Mean and sample variance (n - 1 denominator; 0 for a single value).
inline std::pair<double, double> mean_var(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(xs.size() - 1)};
}

inline WindowStats window_stats(std::string model, std::span<const WindowResult* const> rows, std::size_t total) {
  WindowStats s;
  s.model = std::move(model);
  s.count = rows.size();
  if (rows.empty()) return s;
  std::vector<double> soft, hard;
  std::size_t soft_bounded = 0, hard_bounded = 0;
  for (const auto* r : rows) {
    soft.push_back(r->soft_normalized);
    hard.push_back(r->hard_normalized);
    soft_bounded += r->soft.bounded ? 1 : 0;
    hard_bounded += r->hard.bounded ? 1 : 0;
  }
  const auto n = static_cast<double>(rows.size());
  s.distribution_pct = 100.0 * n / static_cast<double>(total);
  std::tie(s.soft_mean, s.soft_var) = mean_var(soft);
  std::tie(s.hard_mean, s.hard_var) = mean_var(hard);
  s.soft_bounded_pct = 100.0 * static_cast<double>(soft_bounded) / n;
  s.hard_bounded_pct = 100.0 * static_cast<double>(hard_bounded) / n;
  return s;
}

inline std::vector<WindowStats> aggregate_windows(std::span<const WindowResult> results) {
  std::vector<WindowStats> out;
  std::vector<const WindowResult*> all;
  for (const auto& r : results) all.push_back(&r);
  for (auto kind : kAllKinds) {
    std::vector<const WindowResult*> rows;
    for (const auto* r : all) {
      if (r->selected == kind) rows.push_back(r);
    }
    if (!rows.empty()) out.push_back(window_stats(std::string(to_string(kind)), rows, all.size()));
  }
  std::vector<const WindowResult*> unclassified;
  for (const auto* r : all) {
    if (!r->selected) unclassified.push_back(r);
  }
  if (!unclassified.empty()) out.push_back(window_stats("unclassified", unclassified, all.size()));
  if (!all.empty()) out.push_back(window_stats("All", all, all.size()));
  return out;
}

/// Evaluates every eligible record; ineligible ones are skipped with a diagnostic.
inline ScenarioResult collect_windows(std::span<const SeriesRecord> records, const PredictionSetup& setup,
                                   const ClassifyConfig& cfg = {}, unsigned threads = 0) {
  std::vector<std::optional<WindowResult>> slots(records.size());
  std::vector<std::optional<Diagnostic>> diags(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = evaluate_record(records[i], setup, cfg);
    } catch (const Error& e) {
      diags[i] = Diagnostic{records[i].id, e.code(), e.what()};
    }
  });
  ScenarioResult out;
  out.setup = setup;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) out.results.push_back(std::move(*slots[i]));
    if (diags[i]) out.skipped.push_back(std::move(*diags[i]));
  }
  std::stable_sort(out.results.begin(), out.results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::stable_sort(out.skipped.begin(), out.skipped.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  out.aggregate = aggregate_windows(out.results);
  return out;
}

/// As collect_windows, but an empty eligible corpus is an error.
inline ScenarioResult run_scenario(std::span<const SeriesRecord> records, const PredictionSetup& setup,
                                   const ClassifyConfig& cfg = {}, unsigned threads = 0) {
  auto out = collect_windows(records, setup, cfg, threads);
  if (out.results.empty()) {
    throw Error(ErrorCode::NoEligibleRecords, std::to_string(out.skipped.size()) + " record(s) skipped, none eligible");
  }
  return out;
}

}  // namespace viewfit
