#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "test_util.hpp"
#include "trim/trim.hpp"

using namespace trim;
using namespace trim::testing;

namespace {

const std::vector<Method> kMethods = {Method::CD, Method::IG, Method::InputXGrad, Method::Shapley};

MethodConfig config_for(Method m) {
  MethodConfig c;
  c.method = m;
  c.ig_steps = 64;
  c.shapley = {ShapleyConfig::Mode::Exact, 0, 0};
  return c;
}

Mask random_mask(SeededRng& rng, std::size_t n) {
  Mask m = Mask::zeros(n);
  for (auto& e : m.entries) e = static_cast<std::uint8_t>(rng.uniform_index(2));
  return m;
}

NdArray cosine(std::size_t n, double k) {
  NdArray x({n});
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * std::numbers::pi * k * double(i) / double(n));
  return x;
}

}  // namespace

TEST(TrimScore, IdentityTransformReducesToRawAttribution) {
  SeededRng rng(1);
  const std::size_t n = 6;
  const MlpModel m = random_net({n, 12, 12, 1}, 1, 0.3);
  const MlpFunction f(m);
  for (int trial = 0; trial < 5; ++trial) {
    const NdArray x = random_vector(rng, n);
    const Mask mask = random_mask(rng, n);
    NdArray in({n}), out({n});
    for (std::size_t i = 0; i < n; ++i) (mask.entries[i] ? in : out)[i] = x[i];
    const NdArray baseline = out;  // masked coordinates zeroed

    auto masked_sum = [&](const std::vector<double>& s) {
      double t = 0.0;
      for (std::size_t i = 0; i < n; ++i) t += mask.entries[i] ? s[i] : 0.0;
      return t;
    };
    for (Method method : kMethods) {
      const TrimQuery q{IdentityTransform{n}, mask, config_for(method)};
      const double got = trim_score(m, x, q).score;
      double want = 0.0;
      switch (method) {
        case Method::CD: want = cd_forward(m, {in.reshaped({1, n}), out.reshaped({1, n})}).beta_out; break;
        case Method::IG: want = masked_sum(integrated_gradients(f, x, baseline, 64).scores); break;
        case Method::InputXGrad: want = masked_sum(input_x_gradient(f, x, baseline).scores); break;
        case Method::Shapley:
          want = masked_sum(shapley(f, x, singleton_groups(n), baseline, {ShapleyConfig::Mode::Exact, 0, 0}).scores);
          break;
      }
      EXPECT_NEAR(got, want, 1e-10) << method_name(method);
    }
  }
}

TEST(TrimScore, BiasFreeLinearBandEqualsBandpassedDotProduct) {
  const std::size_t n = 32;
  SeededRng rng(2);
  const NdArray w = random_vector(rng, n);
  const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
  const Transform t = make_dft1d(n);
  const NdArray x = random_vector(rng, n);
  for (const BandSpec band : {BandSpec{0, 1}, BandSpec{2, 6}, BandSpec{10, 17}}) {
    const double want = dot(w.values(), dense_bandpass(x, band.lo, band.hi).values());
    for (Method method : kMethods) {
      if (method == Method::Shapley) continue;  // 17 groups exceed the exact cap
      const TrimQuery q{t, band_mask(t, band), config_for(method)};
      EXPECT_NEAR(trim_score(m, x, q).score, want, 1e-10) << method_name(method) << " " << band.lo;
    }
  }
}

TEST(TrimScore, EmptyMaskScoresZero) {
  SeededRng rng(3);
  const MlpModel m = random_net({16, 16, 1}, 3, 0.3);
  const NdArray x = random_vector(rng, 16);
  const Transform t = make_dft1d(16);
  for (Method method : kMethods) {
    const TrimQuery q{t, Mask::zeros(16), config_for(method)};
    EXPECT_NEAR(trim_score(m, x, q).score, 0.0, 1e-12) << method_name(method);
  }
}

TEST(TrimScore, FullMaskCdEqualsPrediction) {
  SeededRng rng(4);
  for (const Transform& t : {make_dft1d(16), make_dft2d(4, 4)}) {
    const MlpModel m = random_net({16, 20, 20, 1}, 4, 0.5);
    const NdArray x = random_vector(rng, 16);
    const auto r = trim_score(m, x, {t, Mask::ones(16), config_for(Method::CD)});
    EXPECT_NEAR(r.score, m.predict(x.values()), 1e-10);
    EXPECT_LT(r.completeness_gap, 1e-10);
  }
}

TEST(TrimScore, ComplementaryMasksAddUpForLinearModels) {
  SeededRng rng(5);
  const std::size_t n = 16;
  const NdArray w = random_vector(rng, n);
  const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
  const Transform t = make_dft1d(n);
  const NdArray x = random_vector(rng, n);
  const Mask band = band_mask(t, {3, 7});
  for (Method method : kMethods) {
    const double a = trim_score(m, x, {t, band, config_for(method)}).score;
    const double b = trim_score(m, x, {t, band.complement(), config_for(method)}).score;
    EXPECT_NEAR(a + b, m.predict(x.values()), 1e-10) << method_name(method);
  }
}

TEST(TrimScore, RejectsMasksThatSplitGroupsAndWidthMismatch) {
  const MlpModel m = random_net({8, 4, 1}, 6);
  Mask bad = Mask::zeros(8);
  bad.entries[1] = 1;
  EXPECT_THROW(trim_score(m, NdArray({8}), {make_dft1d(8), bad, {}}), ContractError);
  EXPECT_THROW(trim_score(m, NdArray({16}), {make_dft1d(16), Mask::ones(16), {}}), DimensionError);
}

TEST(Reparametrized, DictionaryResidualPreservesOutputAndGradient) {
  SeededRng rng(7);
  const MlpModel m = random_net({10, 16, 1}, 7, 0.3);
  const Transform t = make_dictionary(random_matrix(rng, 4, 10));
  const NdArray x = random_vector(rng, 10);
  const ReparametrizedFunction fp(m, t, residual(t, x));
  const CoefficientVector s = trim::apply(t, x);
  EXPECT_NEAR(fp.value(s.values), m.predict(x.values()), 1e-10);

  // Gradient in coefficient space against central differences of f'.
  std::vector<double> v;
  const NdArray g = fp.gradients(s.values.reshaped({1, 4}), &v);
  for (std::size_t j = 0; j < 4; ++j) {
    NdArray sp = s.values, sm = s.values;
    sp[j] += 1e-5;
    sm[j] -= 1e-5;
    EXPECT_NEAR(g[j], (fp.value(sp) - fp.value(sm)) / 2e-5, 1e-6);
  }
}

TEST(GroupScores, CoverEveryGroupAndSumToPredictionForBiasFreeLinear) {
  SeededRng rng(8);
  const std::size_t n = 16;
  const NdArray w = random_vector(rng, n);
  const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
  const Transform t = make_dft1d(n);
  const NdArray x = random_vector(rng, n);
  for (Method method : kMethods) {
    MethodConfig c = config_for(method);
    c.shapley = {ShapleyConfig::Mode::Exact, 0, 0};
    const GroupScores g = group_scores(m, x, t, c);
    ASSERT_EQ(g.scores.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(g.labels[i], i);
    double total = 0.0;
    for (double v : g.scores) total += v;
    EXPECT_NEAR(total, m.predict(x.values()), 1e-10) << method_name(method);
  }
}

TEST(GroupScores, BatchedCdMatchesPerGroupQueries) {
  SeededRng rng(9);
  const MlpModel m = random_net({16, 24, 1}, 9, 0.4);
  const Transform t = make_dft2d(4, 4);
  const NdArray x = random_vector(rng, 16);
  const GroupScores g = group_scores(m, x, t, config_for(Method::CD));
  const auto groups = coefficient_groups(t);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double one = trim_score(m, x, {t, group_mask(t, groups, i), config_for(Method::CD)}).score;
    EXPECT_NEAR(g.scores[i], one, 1e-12);
  }
}

TEST(GroupScores, MatchedFilterPeaksAtItsFrequency) {
  const std::size_t n = 32;
  const NdArray w = cosine(n, 5.0);
  const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
  const NdArray x = cosine(n, 5.0);
  for (Method method : {Method::CD, Method::IG, Method::InputXGrad}) {
    EXPECT_EQ(group_scores(m, x, make_dft1d(n), config_for(method)).argmax_label, 5u) << method_name(method);
  }
  EXPECT_EQ(argmax({1.0, 3.0, 3.0, 2.0}), 1u);
}

TEST(BandSweep, TilesLabelRangeAndNormalizes) {
  SeededRng rng(10);
  const std::size_t n = 32;
  const NdArray w = random_vector(rng, n);
  const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
  const Transform t = make_dft1d(n);
  const NdArray x = random_vector(rng, n);
  const BandCurve c = band_sweep(m, x, t, 4, config_for(Method::CD));
  ASSERT_EQ(c.bands.size(), 5u);  // labels 0..16
  EXPECT_EQ(c.bands.back().lo, 16u);
  EXPECT_EQ(c.bands.back().hi, 17u);
  double total = 0.0;
  for (double v : c.normalized) total += v;
  EXPECT_NEAR(total, 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(c.centers[0], 1.5);
}

TEST(BandSweep, SingleFullBandIsWholePrediction) {
  SeededRng rng(11);
  const MlpModel m = random_net({32, 16, 1}, 11, 0.3);
  const NdArray x = random_vector(rng, 32);
  const BandCurve c = band_sweep(m, x, make_dft1d(32), 17, config_for(Method::CD));
  ASSERT_EQ(c.bands.size(), 1u);
  EXPECT_NEAR(c.normalized[0], 1.0, 1e-10);
}

TEST(BandSweep, ZeroPredictionRaisesWithRawCurve) {
  const MlpModel m = random_net({16, 8, 1}, 12, 0.0);
  try {
    band_sweep(m, NdArray({16}), make_dft1d(16), 3);
    FAIL() << "expected BandNormalizationError";
  } catch (const BandNormalizationError& e) {
    EXPECT_EQ(e.curve.scores.size(), 3u);
    EXPECT_TRUE(e.curve.normalized.empty());
  }
  EXPECT_THROW(tile_bands(make_dft1d(16), 0), ContractError);
}

TEST(Formats, CsvAndJsonLayouts) {
  GroupScores g;
  g.labels = {0, 1};
  g.scores = {0.5, 1.5};
  g.prediction = 2.0;
  std::istringstream csv(group_scores_csv(g));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "index,label,score,normalized_score");
  std::getline(csv, line);
  EXPECT_EQ(line, "0,0,0.5,0.25");
  const auto j = group_scores_json(g, {{"source", "test"}});
  EXPECT_NE(j.dump().find("\"source\""), std::string::npos);
  const auto mj = method_config_json(config_for(Method::Shapley));
  EXPECT_EQ(mj.at("method"), method_name(Method::Shapley));
  EXPECT_EQ(mj.at("shapley_mode"), "exact");
}
