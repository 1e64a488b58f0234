#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "viewfit/regress.hpp"
#include "viewfit/synth.hpp"

using namespace viewfit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// The generated curve on u = i/n without renormalization, so true params apply directly.
NormalizedSeries raw_curve(ModelKind kind, const ParamSet& p, std::size_t n = 200, double sigma = 0.0,
                           std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.kind = kind;
  spec.params = p;
  spec.n = n;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  const auto rec = generate(spec).record;
  std::vector<double> u, v;
  for (const auto& o : rec.observations) {
    u.push_back(o.t);
    v.push_back(o.y);
  }
  return make_normalized(std::move(u), std::move(v));
}

double max_rel_error(ModelKind kind, const ParamSet& got, const ParamSet& want) {
  const auto a = pack(kind, got), b = pack(kind, want);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return worst;
}

}  // namespace

TEST_CASE("linear_fit on an exact line", "[regress][linear]") {
  const auto s = make_normalized({0.1, 0.4, 0.7, 1.0}, {0.1, 0.4, 0.7, 1.0});
  const auto f = linear_fit(s);
  CHECK_THAT(f.slope, WithinAbs(1.0, 1e-15));
  CHECK_THAT(f.intercept, WithinAbs(0.0, 1e-15));
  CHECK(f.r == 1.0);
}

TEST_CASE("linear_fit matches the normal equations", "[regress][linear][oracle]") {
  const auto s = make_normalized({0.0, 0.5, 1.0}, {0.0, 0.6, 1.0});
  const auto f = linear_fit(s);
  // Normal equations [n sx; sx sxx][b a]' = [sy sxy]' solved by Cramer's rule.
  const double n = 3, sx = 1.5, sxx = 1.25, sy = 1.6, sxy = 1.3;
  const double det = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / det;
  const double intercept = (sxx * sy - sx * sxy) / det;
  CHECK_THAT(f.slope, WithinAbs(slope, 1e-12));
  CHECK_THAT(f.intercept, WithinAbs(intercept, 1e-12));
  CHECK_THAT(f.intercept, WithinAbs(1.0 / 30.0, 1e-12));
  const double ybar = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    ss_res += std::pow(s.v[i] - (intercept + slope * s.u[i]), 2);
    ss_tot += std::pow(s.v[i] - ybar, 2);
  }
  CHECK_THAT(f.r, WithinAbs(1.0 - ss_res / ss_tot, 1e-12));
}

TEST_CASE("linear_fit errors", "[regress][linear]") {
  try {
    (void)linear_fit(make_normalized({0.2, 0.5, 1.0}, {1.0, 1.0, 1.0}));
    FAIL("expected ZERO_VARIANCE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVariance);
  }
  CHECK_THROWS_AS(linear_fit(make_normalized({1.0}, {1.0})), Error);
}

TEST_CASE("noisy synthetic line keeps R above 0.985", "[regress][linear]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = raw_curve(ModelKind::Linear, {0.05, 1.0, 0.9, 0.0}, 200, 0.01, seed);
    CHECK(std::abs(linear_fit(s).r) >= 0.985);
  }
}

TEST_CASE("LM from the exact parameters stays put", "[regress][lm]") {
  const ParamSet truth{0.05, 0.9, 6.0, 0.0};
  const auto s = raw_curve(ModelKind::Gompertz, truth);
  LmConfig cfg;
  cfg.multistart_count = 1;
  const auto r = lm_fit(ModelKind::Gompertz, s, truth, cfg);
  CHECK(r.msc < 1e-20);
  CHECK(r.iterations <= 2);
  CHECK(r.converged);
  CHECK(max_rel_error(ModelKind::Gompertz, r.params, truth) < 1e-10);
}

TEST_CASE("LM recovers noiseless modified Gompertz and logistic curves", "[regress][lm][oracle]") {
  const ParamSet mg{0.05, 0.9, 6.0, 0.1};
  const auto s1 = raw_curve(ModelKind::ModGompertz, mg);
  const auto r1 = lm_fit(ModelKind::ModGompertz, s1, default_init(ModelKind::ModGompertz, s1));
  CHECK(max_rel_error(ModelKind::ModGompertz, r1.params, mg) < 1e-4);

  const ParamSet lg{0.02, 1.0, 8.0, 0.0};
  const auto s2 = raw_curve(ModelKind::Logistic, lg);
  const auto r2 = lm_fit(ModelKind::Logistic, s2, default_init(ModelKind::Logistic, s2));
  CHECK(max_rel_error(ModelKind::Logistic, r2.params, lg) < 1e-4);
}

TEST_CASE("LM invariants hold on noisy fits", "[regress][lm][property]") {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> s0(0.01, 0.2), m(0.7, 1.0), lam(2.0, 20.0), k(0.05, 0.3);
  for (auto kind : kNonlinearKinds) {
    for (int rep = 0; rep < 4; ++rep) {
      const ParamSet truth{s0(gen), m(gen), lam(gen), is_modified(kind) ? k(gen) : 0.0};
      const auto s = raw_curve(kind, truth, 120, 0.02, 7 + static_cast<std::uint64_t>(rep));
      const auto init = default_init(kind, s);
      const auto r = lm_fit(kind, s, init);
      INFO(to_string(kind) << " rep " << rep);
      CHECK(r.msc >= 0.0);
      CHECK(r.msc <= r.initial_msc);
      for (std::size_t i = 1; i < r.accepted_msc.size(); ++i) CHECK(r.accepted_msc[i] <= r.accepted_msc[i - 1]);
      CHECK(ParamBox::contains(kind, r.params));
      CHECK_THAT(r.msc, WithinRel(model_msc(kind, r.params, s), 1e-12));

      const auto again = lm_fit(kind, s, init);
      CHECK(again.params == r.params);
      CHECK(again.msc == r.msc);
    }
  }
}

TEST_CASE("LM argument errors", "[regress][lm]") {
  const auto s = raw_curve(ModelKind::Gompertz, {0.05, 0.9, 6.0, 0.0}, 50);
  auto code = [&](ModelKind kind, ParamSet init) {
    try {
      (void)lm_fit(kind, s, init);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ParseError;  // sentinel: nothing thrown
  };
  CHECK(code(ModelKind::Linear, {0.0, 1.0, 1.0, 0.0}) == ErrorCode::InvalidArgument);
  CHECK(code(ModelKind::Gompertz, {0.0, 1.0, 1.0, 0.0}) == ErrorCode::InvalidParams);
  CHECK(code(ModelKind::Gompertz, {0.1, 1.0, std::nan(""), 0.0}) == ErrorCode::InvalidParams);

  auto bad = s;
  bad.v[3] = std::numeric_limits<double>::infinity();
  try {
    (void)lm_fit(ModelKind::Gompertz, bad, {0.1, 1.0, 2.0, 0.0});
    FAIL("expected BAD_INITIAL_POINT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadInitialPoint);
  }

  LmConfig cfg;
  cfg.damping_up = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("iteration budget exhaustion is reported, not thrown", "[regress][lm]") {
  const auto s = raw_curve(ModelKind::Logistic, {0.02, 1.0, 8.0, 0.0});
  LmConfig cfg;
  cfg.max_iterations = 1;
  cfg.multistart_count = 1;
  const auto r = lm_fit(ModelKind::Logistic, s, {0.5, 5.0, 0.01, 0.0}, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.msc <= r.initial_msc);
}

TEST_CASE("default_init heuristics", "[regress][init]") {
  const auto s = raw_curve(ModelKind::NegExp, {0.05, 1.0, 7.0, 0.0});
  auto normalized = s;
  for (auto& v : normalized.v) v /= s.v.back();
  const auto p = default_init(ModelKind::NegExp, normalized);
  CHECK(p.m == 1.05);
  // True lambda expressed on the renormalized curve is unchanged (value scaling only).
  CHECK(p.lambda > 0.7);
  CHECK(p.lambda < 70.0);

  const auto flat = make_normalized({0.2, 0.4, 0.6, 0.8, 1.0}, {0.0, 0.0, 0.3, 0.7, 1.0});
  CHECK(default_init(ModelKind::Gompertz, flat).s0 == 1e-3);
  CHECK(default_init(ModelKind::ModGompertz, flat).k >= 0.0);
  for (auto kind : kNonlinearKinds) CHECK_FALSE(param_violation(kind, default_init(kind, flat)));
}

TEST_CASE("box projection clamps into the admissible region", "[regress][box]") {
  const auto p = ParamBox::project(ModelKind::ModLogistic, {5.0, 20.0, 1e6, -3.0});
  CHECK(ParamBox::contains(ModelKind::ModLogistic, p));
  CHECK(p.s0 <= ParamBox::s0_max);
  CHECK(p.m <= ParamBox::m_max);
  CHECK(p.lambda <= ParamBox::lambda_max);
  CHECK(p.k == 0.0);
}
