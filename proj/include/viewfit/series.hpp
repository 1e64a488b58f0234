#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "viewfit/error.hpp"

namespace viewfit {

/// One sample of a cumulative trajectory: `t` days since upload, `y` views so far.
struct Observation {
  double t = 0.0;
  double y = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SeriesRecord {
  std::string id;
  std::optional<std::string> title;
  std::optional<std::string> category;
  std::int64_t age_days = 1;
  std::optional<std::int64_t> total_views;
  std::vector<Observation> observations;

  friend bool operator==(const SeriesRecord&, const SeriesRecord&) = default;
};

/// Units retained so normalized values can be mapped back to days and views.
struct Scale {
  double t = 1.0;
  double y = 1.0;

  friend bool operator==(const Scale&, const Scale&) = default;
};

/// Observations divided by the last sample, so the final point is exactly (1, 1).
struct NormalizedSeries {
  std::vector<double> u;
  std::vector<double> v;
  Scale scale;

  [[nodiscard]] std::size_t size() const noexcept { return u.size(); }
};

inline constexpr std::array<std::string_view, 16> kCategories = {
    "Animals", "Autos",  "Comedy", "Education", "Entertainment", "Film",   "Games",  "Howto",
    "Music",   "News",   "Nonprofit", "People", "Shows",         "Sports", "Tech",   "Travel"};

inline constexpr std::string_view kOtherCategory = "Other";

/// Maps a category name onto the canonical list (case-insensitive); anything else is "Other".
inline std::string canonical_category(std::string_view name) {
  auto lower_eq = [](std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) ==
                    std::tolower(static_cast<unsigned char>(y));
           });
  };
  for (auto c : kCategories) {
    if (lower_eq(c, name)) return std::string(c);
  }
  return std::string(kOtherCategory);
}

enum class PopularityClass { EUP, VUP, UP, NSP, P, VP, EP };

inline constexpr std::array<PopularityClass, 7> kPopularityClasses = {
    PopularityClass::EUP, PopularityClass::VUP, PopularityClass::UP, PopularityClass::NSP,
    PopularityClass::P,   PopularityClass::VP,  PopularityClass::EP};

constexpr std::string_view to_string(PopularityClass c) noexcept {
  switch (c) {
    case PopularityClass::EUP: return "EUP";
    case PopularityClass::VUP: return "VUP";
    case PopularityClass::UP: return "UP";
    case PopularityClass::NSP: return "NSP";
    case PopularityClass::P: return "P";
    case PopularityClass::VP: return "VP";
    case PopularityClass::EP: return "EP";
  }
  return "?";
}

/// Decade buckets with lower-inclusive boundaries 10, 100, ..., 10^6.
constexpr PopularityClass popularity_class(std::int64_t total_views) noexcept {
  if (total_views < 10) return PopularityClass::EUP;
  if (total_views < 100) return PopularityClass::VUP;
  if (total_views < 1000) return PopularityClass::UP;
  if (total_views < 10000) return PopularityClass::NSP;
  if (total_views < 100000) return PopularityClass::P;
  if (total_views < 1000000) return PopularityClass::VP;
  return PopularityClass::EP;
}

/// Total views of a record: the metadata value when present, otherwise the last sample.
inline std::int64_t total_views_of(const SeriesRecord& r) {
  if (r.total_views) return *r.total_views;
  if (r.observations.empty()) return 0;
  return std::llround(r.observations.back().y);
}

/// Prefix sums of non-negative daily increments.
inline std::vector<double> cumulate(std::span<const double> daily) {
  std::vector<double> out;
  out.reserve(daily.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < daily.size(); ++i) {
    if (!(daily[i] >= 0.0)) {
      throw Error(ErrorCode::NegativeIncrement, "increment " + std::to_string(i) + " is negative");
    }
    acc += daily[i];
    out.push_back(acc);
  }
  return out;
}

struct Diagnostic {
  std::string id;
  ErrorCode code;
  std::string message;
};

/// Checks the record invariants; returns the first violation, if any.
inline std::optional<Diagnostic> check_record(const SeriesRecord& r) {
  auto fail = [&](ErrorCode c, std::string msg) { return Diagnostic{r.id, c, std::move(msg)}; };
  const auto& obs = r.observations;
  if (obs.size() < 2) return fail(ErrorCode::TooShort, "need at least 2 observations");
  if (r.age_days <= 0) return fail(ErrorCode::InvalidSeries, "age_days must be positive");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(obs[i].t) || !std::isfinite(obs[i].y)) {
      return fail(ErrorCode::InvalidSeries, "non-finite observation at index " + std::to_string(i));
    }
    if (obs[i].y < 0.0) {
      return fail(ErrorCode::InvalidSeries, "negative view count at index " + std::to_string(i));
    }
  }
  if (obs.front().t < 0.0) return fail(ErrorCode::InvalidSeries, "first t is negative");
  for (std::size_t i = 1; i < obs.size(); ++i) {
    if (!(obs[i].t > obs[i - 1].t)) {
      return fail(ErrorCode::InvalidSeries, "t not strictly increasing at index " + std::to_string(i));
    }
    if (obs[i].y < obs[i - 1].y) {
      return fail(ErrorCode::NonMonotone, "cumulative count decreases at index " + std::to_string(i));
    }
  }
  if (r.total_views) {
    if (*r.total_views < 0) return fail(ErrorCode::InvalidSeries, "total_views is negative");
    if (*r.total_views != std::llround(obs.back().y)) {
      return fail(ErrorCode::InvalidSeries, "total_views does not match the last observation");
    }
  }
  return std::nullopt;
}

inline NormalizedSeries normalize(std::span<const Observation> obs) {
  if (obs.size() < 2) throw Error(ErrorCode::TooShort, "need at least 2 observations");
  const Scale scale{obs.back().t, obs.back().y};
  if (!(scale.y > 0.0)) throw Error(ErrorCode::DegenerateZeroViews, "last view count is zero");
  if (!(scale.t > 0.0)) throw Error(ErrorCode::DegenerateZeroAge, "last observation time is zero");
  NormalizedSeries out;
  out.scale = scale;
  out.u.reserve(obs.size());
  out.v.reserve(obs.size());
  for (const auto& o : obs) {
    out.u.push_back(o.t / scale.t);
    out.v.push_back(o.y / scale.y);
  }
  return out;
}

inline NormalizedSeries normalize(const SeriesRecord& record) { return normalize(record.observations); }

inline std::vector<Observation> denormalize(const NormalizedSeries& s) {
  std::vector<Observation> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s.u[i] * s.scale.t, s.v[i] * s.scale.y});
  return out;
}

/// Builds a normalized series from already-normalized vectors (no rescaling).
inline NormalizedSeries make_normalized(std::vector<double> u, std::vector<double> v, Scale scale = {}) {
  if (u.size() != v.size()) throw Error(ErrorCode::ShapeError, "u and v differ in length");
  return NormalizedSeries{std::move(u), std::move(v), scale};
}

/// Sub-range [first, first + count) of a normalized series, keeping its scale.
inline NormalizedSeries slice(const NormalizedSeries& s, std::size_t first, std::size_t count) {
  NormalizedSeries out;
  out.scale = s.scale;
  out.u.assign(s.u.begin() + static_cast<std::ptrdiff_t>(first),
               s.u.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.v.assign(s.v.begin() + static_cast<std::ptrdiff_t>(first),
               s.v.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

}  // namespace viewfit
