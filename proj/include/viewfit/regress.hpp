#pragma once

// Parameter estimation: ordinary least-squares lines and a box-constrained
// Levenberg-Marquardt solver driven by the analytic model gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "viewfit/error.hpp"
#include "viewfit/models.hpp"
#include "viewfit/random.hpp"
#include "viewfit/series.hpp"

namespace viewfit {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;  ///< coefficient of determination, 1 - SS_res / SS_tot
};

/// Least-squares line through (x_i, y_i).
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeError, "x and y differ in length");
  const auto n = x.size();
  if (n < 2) throw Error(ErrorCode::TooShort, "linear fit needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::InvalidSeries, "linear fit needs two distinct abscissae");
  if (!(syy > 0.0)) throw Error(ErrorCode::ZeroVariance, "all ordinates are equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r = 1.0 - ss_res / syy;
  return fit;
}

inline LinearFit linear_fit(const NormalizedSeries& s) { return linear_fit(s.u, s.v); }

struct LmConfig {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double relative_tolerance = 1e-10;  ///< on the MSC decrease of an accepted step
  double gradient_tolerance = 1e-12;  ///< on the projected gradient, inf-norm
  int multistart_count = 5;
  std::uint64_t seed = 0x5EEDULL;

  void validate() const {
    auto bad = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (max_iterations <= 0) bad("max_iterations must be positive");
    if (!(initial_damping > 0.0)) bad("initial_damping must be positive");
    if (!(damping_up > 1.0)) bad("damping_up must exceed 1");
    if (!(damping_down > 0.0 && damping_down < 1.0)) bad("damping_down must lie in (0, 1)");
    if (!(relative_tolerance > 0.0)) bad("relative_tolerance must be positive");
    if (!(gradient_tolerance > 0.0)) bad("gradient_tolerance must be positive");
    if (multistart_count <= 0) bad("multistart_count must be positive");
  }
};

struct LmResult {
  ParamSet params;
  double msc = 0.0;
  int iterations = 0;
  bool converged = false;
  int restarts_used = 0;
  int start_index = 0;               ///< which start produced the result (0 = supplied init)
  double initial_msc = 0.0;          ///< MSC at the start that produced the result
  std::vector<double> accepted_msc;  ///< MSC after each accepted step of the winning start
};

/// Feasible region used by the optimizer (normalized units).
struct ParamBox {
  static constexpr double s0_min = 1e-9;
  static constexpr double s0_max = 1.5;
  static constexpr double m_max = 10.0;
  static constexpr double lambda_min = 1e-9;
  static constexpr double lambda_max = 1e3;
  static constexpr double k_min = 0.0;
  static constexpr double k_max = 10.0;

  static ParamSet project(ModelKind kind, ParamSet p) {
    p.s0 = std::clamp(p.s0, s0_min, s0_max);
    p.m = std::clamp(p.m, p.s0, m_max);
    p.lambda = std::clamp(p.lambda, lambda_min, lambda_max);
    p.k = is_modified(kind) ? std::clamp(p.k, k_min, k_max) : 0.0;
    return p;
  }

  static bool contains(ModelKind kind, const ParamSet& p) {
    if (!(p.s0 >= s0_min && p.s0 <= s0_max)) return false;
    if (!(p.m >= p.s0 && p.m <= m_max)) return false;
    if (!(p.lambda >= lambda_min && p.lambda <= lambda_max)) return false;
    return !is_modified(kind) || (p.k >= k_min && p.k <= k_max);
  }
};

/// Sum of squared residuals of a kind on a series; +inf when non-finite.
inline double model_msc(ModelKind kind, const ParamSet& p, const NormalizedSeries& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = evaluate(kind, p, s.u[i]) - s.v[i];
    acc += e * e;
  }
  return std::isfinite(acc) ? acc : std::numeric_limits<double>::infinity();
}

/// Heuristic starting point. Rates are solved so the fixed-population curve
/// crosses v = 0.5 at the observed crossing time.
inline ParamSet default_init(ModelKind kind, const NormalizedSeries& s) {
  if (s.size() < 2) throw Error(ErrorCode::TooShort, "init needs at least 2 points");
  ParamSet p;
  p.s0 = std::max(s.v.front(), 1e-3);
  p.m = 1.05;
  p.lambda = 5.0;
  p.k = 0.0;
  if (kind == ModelKind::Linear) {
    p.lambda = 1.0;
    return p;
  }

  if (is_modified(kind)) {
    const auto n = s.size();
    const auto tail = std::max<std::size_t>(2, (n + 4) / 5);
    const auto first = n - tail;
    const std::span<const double> u(s.u.data() + first, tail), v(s.v.data() + first, tail);
    double mu = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < tail; ++i) {
      mu += u[i];
      mv += v[i];
    }
    mu /= static_cast<double>(tail);
    mv /= static_cast<double>(tail);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < tail; ++i) {
      sxx += (u[i] - mu) * (u[i] - mu);
      sxy += (u[i] - mu) * (v[i] - mv);
    }
    p.k = sxx > 0.0 ? std::clamp(sxy / sxx, 0.0, ParamBox::k_max) : 0.0;
  }

  // First crossing of v = 0.5, linearly interpolated.
  double t_half = -1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.v[i] >= 0.5) {
      if (i == 0 || s.v[i] == s.v[i - 1]) {
        t_half = s.u[i];
      } else {
        const double w = (0.5 - s.v[i - 1]) / (s.v[i] - s.v[i - 1]);
        t_half = s.u[i - 1] + w * (s.u[i] - s.u[i - 1]);
      }
      break;
    }
  }
  if (t_half > 0.0) {
    double target = 0.5 - p.k * t_half;
    if (target <= p.s0) target = 0.5;
    double rate = -1.0;
    if (target > p.s0 && target < p.m) {
      switch (base_kind(kind)) {
        case ModelKind::NegExp:
          rate = -std::log(1.0 - (target - p.s0) / (p.m - p.s0)) / t_half;
          break;
        case ModelKind::Logistic:
          rate = -std::log((p.m / target - 1.0) * p.s0 / (p.m - p.s0)) / (p.m * t_half);
          break;
        case ModelKind::Gompertz:
          rate = -std::log(std::log(p.m / target) / std::log(p.m / p.s0)) / t_half;
          break;
        default: break;
      }
    }
    if (std::isfinite(rate) && rate > 0.0) p.lambda = rate;
  }
  return ParamBox::project(kind, p);
}

namespace detail {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxParams, kMaxParams>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxParams, 1>;

struct Bounds {
  ParamVector lo, hi;
};

inline Bounds bounds_for(ModelKind kind, const ParamVector& x) {
  Bounds b{ParamVector(x.size()), ParamVector(x.size())};
  b.lo[0] = ParamBox::s0_min;
  b.hi[0] = ParamBox::s0_max;
  b.lo[1] = x[0];
  b.hi[1] = ParamBox::m_max;
  b.lo[2] = ParamBox::lambda_min;
  b.hi[2] = ParamBox::lambda_max;
  if (is_modified(kind)) {
    b.lo[3] = ParamBox::k_min;
    b.hi[3] = ParamBox::k_max;
  }
  return b;
}

/// One damped Gauss-Newton descent from `start`; `start` must lie in the box.
inline LmResult lm_descend(ModelKind kind, const NormalizedSeries& s, const ParamSet& start,
                           const LmConfig& cfg) {
  const auto n = s.size();
  const auto p = param_count(kind);

  LmResult res;
  res.params = start;
  res.msc = model_msc(kind, start, s);
  res.initial_msc = res.msc;

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
  double mu = cfg.initial_damping;
  int slow_steps = 0;

  for (res.iterations = 0; res.iterations < cfg.max_iterations; ++res.iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      resid(row) = evaluate(kind, res.params, s.u[i]) - s.v[i];
      const auto g = gradient(kind, res.params, s.u[i]);
      for (std::size_t j = 0; j < p; ++j) jac(row, static_cast<Eigen::Index>(j)) = g[j];
    }
    const SmallMatrix normal = jac.transpose() * jac;
    const SmallVector grad = jac.transpose() * resid;

    // Variables pinned at a bound with the descent direction pointing outward stay fixed.
    const auto x = pack(kind, res.params);
    const auto bounds = bounds_for(kind, x);
    std::array<bool, kMaxParams> free{};
    std::size_t nfree = 0;
    double pg = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double gj = grad(static_cast<Eigen::Index>(j));
      const double span = std::max(1.0, std::abs(bounds.hi[j]));
      const bool at_lo = x[j] <= bounds.lo[j] + 1e-15 * span && gj > 0.0;
      const bool at_hi = x[j] >= bounds.hi[j] - 1e-15 * span && gj < 0.0;
      free[j] = !(at_lo || at_hi);
      if (free[j]) {
        ++nfree;
        pg = std::max(pg, std::abs(gj));
      }
    }
    if (nfree == 0 || pg <= cfg.gradient_tolerance || res.msc == 0.0) {
      res.converged = true;
      break;
    }

    std::array<Eigen::Index, kMaxParams> idx{};
    for (std::size_t j = 0, f = 0; j < p; ++j) {
      if (free[j]) idx[f++] = static_cast<Eigen::Index>(j);
    }
    const auto nf = static_cast<Eigen::Index>(nfree);
    SmallMatrix a(nf, nf);
    SmallVector b(nf);
    double max_diag = 0.0;
    for (Eigen::Index r = 0; r < nf; ++r) {
      b(r) = -grad(idx[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < nf; ++c) {
        a(r, c) = normal(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
      }
      max_diag = std::max(max_diag, a(r, r));
    }
    const double diag_floor = std::max(1e-12 * max_diag, 1e-300);

    bool accepted = false;
    while (!accepted) {
      SmallMatrix damped = a;
      for (Eigen::Index r = 0; r < nf; ++r) damped(r, r) += mu * std::max(a(r, r), diag_floor);
      const Eigen::LDLT<SmallMatrix> ldlt(damped);
      if (ldlt.info() == Eigen::Success) {
        const SmallVector step = ldlt.solve(b);
        ParamVector trial = x;
        for (Eigen::Index r = 0; r < nf; ++r) trial[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])] += step(r);
        const ParamSet candidate = ParamBox::project(kind, unpack(kind, trial));
        const double trial_msc = step.allFinite() ? model_msc(kind, candidate, s)
                                                  : std::numeric_limits<double>::infinity();
        if (trial_msc < res.msc) {
          const double drop = res.msc - trial_msc;
          res.params = candidate;
          res.msc = trial_msc;
          res.accepted_msc.push_back(trial_msc);
          mu = std::max(mu * cfg.damping_down, 1e-20);
          accepted = true;
          slow_steps = drop <= cfg.relative_tolerance * (trial_msc + drop) ? slow_steps + 1 : 0;
          break;
        }
      }
      mu *= cfg.damping_up;
      if (mu > 1e20) break;
    }
    if (!accepted) {
      // No descent is representable at this precision: a stationary point of the projected problem.
      res.converged = true;
      ++res.iterations;
      break;
    }
    if (slow_steps >= 2) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

inline bool finite_at(ModelKind kind, const ParamSet& p, const NormalizedSeries& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(evaluate(kind, p, s.u[i]) - s.v[i])) return false;
    for (double g : gradient(kind, p, s.u[i])) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Multistart Levenberg-Marquardt fit of a nonlinear kind. Start 0 is `init`
/// (projected into the box); further starts rescale lambda by a log-uniform
/// factor in [0.1, 10] and redraw k uniformly over one decade around it.
/// The lowest-MSC result wins; ties go to fewer iterations, then the earlier start.
inline LmResult lm_fit(ModelKind kind, const NormalizedSeries& series, const ParamSet& init,
                       const LmConfig& config = {}) {
  config.validate();
  if (kind == ModelKind::Linear) throw Error(ErrorCode::InvalidArgument, "lm_fit needs a nonlinear kind");
  if (series.size() < param_count(kind)) throw Error(ErrorCode::TooShort, "fewer points than parameters");
  require_valid(kind, init);

  const ParamSet start0 = ParamBox::project(kind, init);
  if (!detail::finite_at(kind, start0, series)) {
    throw Error(ErrorCode::BadInitialPoint, "non-finite residual or Jacobian at the initial point");
  }

  SplitMix64 rng(derive_seed(config.seed, kind_index(kind)));
  LmResult best;
  bool have_best = false;
  for (int start = 0; start < config.multistart_count; ++start) {
    ParamSet guess = start0;
    if (start > 0) {
      guess.lambda = start0.lambda * rng.log_uniform(0.1, 10.0);
      const double k_draw = start0.k > 0.0 ? rng.uniform(start0.k / 10.0, start0.k * 10.0)
                                           : rng.uniform(0.0, 0.1);
      if (is_modified(kind)) guess.k = k_draw;
      guess = ParamBox::project(kind, guess);
      if (!detail::finite_at(kind, guess, series)) continue;
    }
    LmResult r = detail::lm_descend(kind, series, guess, config);
    r.start_index = start;
    const bool better = !have_best || r.msc < best.msc ||
                        (r.msc == best.msc && r.iterations < best.iterations);
    if (better) {
      best = std::move(r);
      have_best = true;
    }
  }
  best.restarts_used = config.multistart_count;
  return best;
}

}  // namespace viewfit
