#pragma once

// Closed-form growth curves in normalized coordinates.
//
// Parameter order (used for Jacobian columns everywhere):
//   Linear:                      S0, lambda          (lambda is the slope)
//   NegExp, Logistic, Gompertz:  S0, M, lambda
//   Mod* variants:               S0, M, lambda, k
//
// The modified logistic curve is Logistic + k*t, built the same way as the
// modified Gompertz and modified negative-exponential curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "viewfit/error.hpp"

namespace viewfit {

enum class ModelKind { Linear, NegExp, ModNegExp, Logistic, ModLogistic, Gompertz, ModGompertz };

inline constexpr std::array<ModelKind, 7> kAllKinds = {
    ModelKind::Linear,   ModelKind::NegExp,      ModelKind::ModNegExp,  ModelKind::Logistic,
    ModelKind::ModLogistic, ModelKind::Gompertz, ModelKind::ModGompertz};

inline constexpr std::array<ModelKind, 6> kNonlinearKinds = {
    ModelKind::NegExp,   ModelKind::ModNegExp, ModelKind::Logistic,
    ModelKind::ModLogistic, ModelKind::Gompertz, ModelKind::ModGompertz};

inline constexpr std::size_t kMaxParams = 4;

constexpr std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::NegExp: return "negexp";
    case ModelKind::ModNegExp: return "modnegexp";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::ModLogistic: return "modlogistic";
    case ModelKind::Gompertz: return "gompertz";
    case ModelKind::ModGompertz: return "modgompertz";
  }
  return "?";
}

inline std::optional<ModelKind> parse_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

constexpr std::size_t kind_index(ModelKind kind) noexcept { return static_cast<std::size_t>(kind); }

constexpr std::size_t param_count(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Linear: return 2;
    case ModelKind::NegExp:
    case ModelKind::Logistic:
    case ModelKind::Gompertz: return 3;
    case ModelKind::ModNegExp:
    case ModelKind::ModLogistic:
    case ModelKind::ModGompertz: return 4;
  }
  return 0;
}

constexpr bool is_modified(ModelKind kind) noexcept {
  return kind == ModelKind::ModNegExp || kind == ModelKind::ModLogistic || kind == ModelKind::ModGompertz;
}

/// Viral kinds divide by or take the log of S0.
constexpr bool needs_positive_s0(ModelKind kind) noexcept {
  return kind == ModelKind::Logistic || kind == ModelKind::ModLogistic || kind == ModelKind::Gompertz ||
         kind == ModelKind::ModGompertz;
}

/// The fixed-population kind a modified kind extends; other kinds map to themselves.
constexpr ModelKind base_kind(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::ModNegExp: return ModelKind::NegExp;
    case ModelKind::ModLogistic: return ModelKind::Logistic;
    case ModelKind::ModGompertz: return ModelKind::Gompertz;
    default: return kind;
  }
}

struct ParamSet {
  double s0 = 0.0;
  double m = 1.0;
  double lambda = 1.0;
  double k = 0.0;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Fixed-capacity vector holding one entry per free parameter of a kind.
class ParamVector {
 public:
  constexpr ParamVector() = default;
  explicit constexpr ParamVector(std::size_t n) : size_(n) {}

  [[nodiscard]] constexpr std::size_t size() const noexcept { return size_; }
  constexpr double& operator[](std::size_t i) noexcept { return data_[i]; }
  constexpr double operator[](std::size_t i) const noexcept { return data_[i]; }
  constexpr double* begin() noexcept { return data_.data(); }
  constexpr double* end() noexcept { return data_.data() + size_; }
  [[nodiscard]] constexpr const double* begin() const noexcept { return data_.data(); }
  [[nodiscard]] constexpr const double* end() const noexcept { return data_.data() + size_; }

 private:
  std::array<double, kMaxParams> data_{};
  std::size_t size_ = 0;
};

inline ParamVector pack(ModelKind kind, const ParamSet& p) {
  ParamVector v(param_count(kind));
  if (kind == ModelKind::Linear) {
    v[0] = p.s0;
    v[1] = p.lambda;
    return v;
  }
  v[0] = p.s0;
  v[1] = p.m;
  v[2] = p.lambda;
  if (is_modified(kind)) v[3] = p.k;
  return v;
}

inline ParamSet unpack(ModelKind kind, const ParamVector& v) {
  ParamSet p;
  if (kind == ModelKind::Linear) {
    p.s0 = v[0];
    p.lambda = v[1];
    return p;
  }
  p.s0 = v[0];
  p.m = v[1];
  p.lambda = v[2];
  p.k = is_modified(kind) ? v[3] : 0.0;
  return p;
}

/// Names of the free parameters in packing order.
inline std::array<std::string_view, kMaxParams> param_names(ModelKind kind) {
  if (kind == ModelKind::Linear) return {"S0", "lambda", "", ""};
  return {"S0", "M", "lambda", is_modified(kind) ? "k" : ""};
}

/// Checks the admissible parameter region of a kind; nullopt when valid.
inline std::optional<std::string> param_violation(ModelKind kind, const ParamSet& p) {
  auto finite = std::isfinite(p.s0) && std::isfinite(p.m) && std::isfinite(p.lambda) && std::isfinite(p.k);
  if (!finite) return "non-finite parameter";
  if (needs_positive_s0(kind) ? !(p.s0 > 0.0) : !(p.s0 >= 0.0)) return "S0 out of range";
  if (!(p.lambda > 0.0)) return "lambda must be positive";
  if (kind == ModelKind::Linear) return std::nullopt;
  if (!(p.m >= p.s0)) return "M must be at least S0";
  if (is_modified(kind) && !(p.k >= 0.0)) return "k must be non-negative";
  return std::nullopt;
}

inline void require_valid(ModelKind kind, const ParamSet& p) {
  if (auto why = param_violation(kind, p)) throw Error(ErrorCode::InvalidParams, *why);
}

namespace detail {

inline constexpr double kExpClamp = 700.0;

inline void require_nonsingular(ModelKind kind, const ParamSet& p) {
  if (needs_positive_s0(kind) && !(p.s0 > 0.0)) {
    throw Error(ErrorCode::SingularParams, std::string(to_string(kind)) + " requires S0 > 0");
  }
}

inline double base_value(ModelKind base, const ParamSet& p, double t) {
  switch (base) {
    case ModelKind::Linear: return p.s0 + p.lambda * t;
    case ModelKind::NegExp: return p.s0 + (p.m - p.s0) * (1.0 - std::exp(-p.lambda * t));
    case ModelKind::Logistic: {
      const double x = std::clamp(-p.lambda * p.m * t, -kExpClamp, kExpClamp);
      return p.m / (1.0 + ((p.m - p.s0) / p.s0) * std::exp(x));
    }
    case ModelKind::Gompertz: return p.m * std::exp(-std::log(p.m / p.s0) * std::exp(-p.lambda * t));
    default: break;
  }
  return 0.0;
}

}  // namespace detail

/// S(t) for the given kind.
inline double evaluate(ModelKind kind, const ParamSet& p, double t) {
  detail::require_nonsingular(kind, p);
  const double base = detail::base_value(base_kind(kind), p, t);
  return is_modified(kind) ? base + p.k * t : base;
}

/// Analytic dS/dparam in packing order.
inline ParamVector gradient(ModelKind kind, const ParamSet& p, double t) {
  detail::require_nonsingular(kind, p);
  ParamVector g(param_count(kind));
  switch (base_kind(kind)) {
    case ModelKind::Linear:
      g[0] = 1.0;
      g[1] = t;
      return g;
    case ModelKind::NegExp: {
      const double e = std::exp(-p.lambda * t);
      g[0] = e;
      g[1] = 1.0 - e;
      g[2] = (p.m - p.s0) * t * e;
      break;
    }
    case ModelKind::Logistic: {
      const double raw = -p.lambda * p.m * t;
      const bool clamped = raw < -detail::kExpClamp || raw > detail::kExpClamp;
      const double e = std::exp(std::clamp(raw, -detail::kExpClamp, detail::kExpClamp));
      const double a = (p.m - p.s0) / p.s0;
      const double d = 1.0 + a * e;
      const double d2 = d * d;
      const double de_dm = clamped ? 0.0 : -p.lambda * t * e;
      const double de_dl = clamped ? 0.0 : -p.m * t * e;
      const double ds_da = -p.m * e / d2;
      const double ds_de = -p.m * a / d2;
      g[0] = ds_da * (-p.m / (p.s0 * p.s0));
      g[1] = 1.0 / d + ds_da / p.s0 + ds_de * de_dm;
      g[2] = ds_de * de_dl;
      break;
    }
    case ModelKind::Gompertz: {
      const double l = std::log(p.m / p.s0);
      const double e = std::exp(-p.lambda * t);
      const double s = p.m * std::exp(-l * e);
      g[0] = s * e / p.s0;
      g[1] = s * (1.0 - e) / p.m;
      g[2] = s * l * t * e;
      break;
    }
    default: break;
  }
  if (is_modified(kind)) g[3] = t;
  return g;
}

/// dS/dt of the governing equation at state `s`. Modified kinds shift by k*t and add k.
inline double ode_rhs(ModelKind kind, const ParamSet& p, double s, double t) {
  if (!std::isfinite(s) || !std::isfinite(t)) throw Error(ErrorCode::DomainError, "non-finite state");
  const double x = is_modified(kind) ? s - p.k * t : s;
  double rate = 0.0;
  switch (base_kind(kind)) {
    case ModelKind::Linear: rate = p.lambda; break;
    case ModelKind::NegExp: rate = p.lambda * (p.m - x); break;
    case ModelKind::Logistic:
      if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "logistic state must be positive");
      rate = p.lambda * x * (p.m - x);
      break;
    case ModelKind::Gompertz:
      if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "gompertz state must be positive");
      rate = p.lambda * x * std::log(p.m / x);
      break;
    default: break;
  }
  return is_modified(kind) ? rate + p.k : rate;
}

/// Parameters of the curve R(tau) = value_scale * S(tau / time_scale).
///
/// With (time_scale, value_scale) = (t_n, y_n) this maps normalized fits to raw
/// units: M and S0 in views, k in views/day, lambda in 1/day (logistic lambda in
/// 1/(view*day), linear slope in views/day).
inline ParamSet scale_params(ModelKind kind, const ParamSet& p, double time_scale, double value_scale) {
  ParamSet out = p;
  out.s0 = p.s0 * value_scale;
  out.m = p.m * value_scale;
  out.k = p.k * value_scale / time_scale;
  switch (base_kind(kind)) {
    case ModelKind::Linear: out.lambda = p.lambda * value_scale / time_scale; break;
    case ModelKind::Logistic: out.lambda = p.lambda / (time_scale * value_scale); break;
    default: out.lambda = p.lambda / time_scale; break;
  }
  return out;
}

}  // namespace viewfit
