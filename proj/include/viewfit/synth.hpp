#pragma once

// Synthetic cumulative series with known generating model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "viewfit/error.hpp"
#include "viewfit/models.hpp"
#include "viewfit/random.hpp"
#include "viewfit/series.hpp"

namespace viewfit {

struct SynthSpec {
  std::string id = "synthetic";
  ModelKind kind = ModelKind::Gompertz;
  ParamSet params;
  std::size_t n = 200;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<Scale> denorm_scale;  ///< (t_n days, views per unit); normalized output when absent
};

struct SynthLabel {
  std::string id;
  ModelKind kind = ModelKind::Gompertz;
  ParamSet params;
  double noise_sigma = 0.0;
};

struct LabeledRecord {
  SeriesRecord record;
  SynthLabel label;
};

/// Evaluates the closed form at u_i = i/n (i = 1..n), applies multiplicative
/// noise (1 + sigma * N(0,1)) per point, repairs monotonicity with a running
/// maximum and optionally rescales to days and views.
inline LabeledRecord generate(const SynthSpec& spec) {
  if (spec.n < 6) throw Error(ErrorCode::InvalidArgument, "synthetic series need n >= 6");
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  require_valid(spec.kind, spec.params);
  if (spec.denorm_scale && !(spec.denorm_scale->t > 0.0 && spec.denorm_scale->y > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "denormalization scale must be positive");
  }

  SplitMix64 rng(spec.seed);
  LabeledRecord out;
  out.label = {spec.id, spec.kind, spec.params, spec.noise_sigma};
  auto& rec = out.record;
  rec.id = spec.id;
  rec.observations.reserve(spec.n);

  const Scale scale = spec.denorm_scale.value_or(Scale{});
  double running = 0.0;
  for (std::size_t i = 1; i <= spec.n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(spec.n);
    double v = evaluate(spec.kind, spec.params, u);
    if (spec.noise_sigma > 0.0) v *= 1.0 + spec.noise_sigma * rng.normal();
    v = std::max(v, 0.0);
    running = i == 1 ? v : std::max(running, v);
    if (spec.denorm_scale) {
      rec.observations.push_back({u * scale.t, running * scale.y});
    } else {
      rec.observations.push_back({u, running});
    }
  }
  rec.age_days = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(rec.observations.back().t)));
  rec.total_views = std::llround(rec.observations.back().y);
  return out;
}

/// Parameter ranges for corpus draws (normalized units, uniform draws).
struct SynthRanges {
  double s0_lo = 0.01, s0_hi = 0.2;
  double m_lo = 0.7, m_hi = 1.0;
  double lambda_lo = 2.0, lambda_hi = 20.0;
  double k_lo = 0.05, k_hi = 0.3;
  /// Views scale drawn log-uniformly per record when the template has no scale.
  double views_lo = 1e2, views_hi = 1e7;
};

struct SynthMixEntry {
  SynthSpec templ;  ///< kind, n, noise_sigma and optional scale; params and seed are drawn
  std::size_t count = 1;
};

/// Draws every record from its own derived sub-seed, so each record depends only
/// on (seed, position in the corpus). Ids are "<kind>-<index>" with a global index.
/// Records get a category chosen by index and, without a template
/// scale, t in days (t_n = n) and a log-uniform views scale.
inline std::vector<LabeledRecord> generate_corpus(const std::vector<SynthMixEntry>& mix, std::uint64_t seed,
                                                  const SynthRanges& ranges = {}) {
  std::vector<LabeledRecord> out;
  std::size_t index = 0;
  for (const auto& entry : mix) {
    if (entry.count < 1) throw Error(ErrorCode::InvalidArgument, "mix counts must be >= 1");
    for (std::size_t c = 0; c < entry.count; ++c, ++index) {
      SplitMix64 rng(derive_seed(seed, index));
      SynthSpec spec = entry.templ;
      const ModelKind kind = spec.kind;
      ParamSet p;
      p.s0 = rng.uniform(ranges.s0_lo, ranges.s0_hi);
      p.m = rng.uniform(ranges.m_lo, ranges.m_hi);
      p.lambda = rng.uniform(ranges.lambda_lo, ranges.lambda_hi);
      const double k = rng.uniform(ranges.k_lo, ranges.k_hi);
      p.k = is_modified(kind) ? k : 0.0;
      if (kind == ModelKind::Linear) p.m = 1.0;
      const double views = rng.log_uniform(ranges.views_lo, ranges.views_hi);
      spec.params = p;
      spec.seed = rng();
      if (!spec.denorm_scale) spec.denorm_scale = Scale{static_cast<double>(spec.n), views};

      char id[48];
      std::snprintf(id, sizeof id, "%s-%05zu", std::string(to_string(kind)).c_str(), index);
      spec.id = id;

      auto rec = generate(spec);
      rec.record.title = "synthetic " + std::string(to_string(kind)) + " " + std::to_string(index);
      rec.record.category = std::string(kCategories[index % kCategories.size()]);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace viewfit
