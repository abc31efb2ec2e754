#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "trim/csv.hpp"
#include "trim/dictionary.hpp"
#include "trim/error.hpp"

using namespace trim;
using namespace trim::testing;

namespace {

NdArray load_fixture() { return read_csv_matrix(std::string(TRIM_FIXTURE_DIR) + "/sparse_synthetic.csv"); }

/// Loss terms by direct per-sample loops.
DictionaryLoss oracle_loss(const LinearDictionary& d, const NdArray& X, const DictionaryConfig& cfg,
                           const std::vector<double>* w) {
  const std::size_t k = d.analysis.rows(), n = d.analysis.cols();
  DictionaryLoss l;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::vector<double> c(k, 0.0), xr(n, 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t j = 0; j < n; ++j) c[a] += d.analysis(a, j) * X(r, j);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < k; ++a) xr[i] += d.synthesis(i, a) * c[a];
    for (std::size_t a = 0; a < k; ++a) l.sparsity += std::abs(c[a]);
    for (std::size_t i = 0; i < n; ++i) l.reconstruction += (X(r, i) - xr[i]) * (X(r, i) - xr[i]);
    if (w) {
      for (std::size_t a = 0; a < k; ++a) {
        double gain = 0.0;
        for (std::size_t i = 0; i < n; ++i) gain += d.synthesis(i, a) * (*w)[i];
        l.trim += std::abs(c[a] * gain);
      }
    }
  }
  const double N = double(X.rows());
  l.sparsity /= N;
  l.reconstruction /= N;
  l.trim /= N;
  l.total = cfg.lambda_sparse * l.sparsity + cfg.lambda_recon * l.reconstruction + cfg.lambda_trim * l.trim;
  return l;
}

}  // namespace

TEST(DictionaryLossTerms, MatchDirectComputation) {
  SeededRng rng(1);
  const NdArray X = random_matrix(rng, 20, 6);
  const LinearDictionary d{random_matrix(rng, 4, 6), random_matrix(rng, 6, 4)};
  const std::vector<double> w = {0.5, -1.0, 2.0, 0.0, 0.25, 1.5};
  const MlpModel m = linear_net(w, 0.3);
  DictionaryConfig cfg;
  cfg.atoms = 4;
  cfg.lambda_sparse = 0.2;
  cfg.lambda_recon = 1.5;
  cfg.lambda_trim = 0.7;
  const DictionaryLoss got = dictionary_loss(d, X, cfg, &m);
  const DictionaryLoss want = oracle_loss(d, X, cfg, &w);
  EXPECT_NEAR(got.sparsity, want.sparsity, 1e-10);
  EXPECT_NEAR(got.reconstruction, want.reconstruction, 1e-10);
  EXPECT_NEAR(got.trim, want.trim, 1e-10);
  EXPECT_NEAR(got.total, want.total, 1e-10);
}

TEST(LearnDictionary, IdentityIsAFixedPointWithoutPenalties) {
  SeededRng rng(2);
  const NdArray X = random_matrix(rng, 30, 8);
  DictionaryConfig cfg;
  cfg.atoms = 8;
  cfg.init = DictionaryInit::Identity;
  cfg.steps = 50;
  const DictionaryResult r = learn_dictionary(X, cfg, nullptr, rng);
  EXPECT_LT(max_abs_diff(r.dictionary.analysis.values(), NdArray::identity(8).values()), 1e-12);
  EXPECT_LT(max_abs_diff(r.dictionary.synthesis.values(), NdArray::identity(8).values()), 1e-12);
  ASSERT_EQ(r.history.size(), 51u);
  EXPECT_LT(r.history.back().reconstruction, 1e-24);
}

TEST(LearnDictionary, ReconstructionLossDropsOnSparseFixture) {
  const NdArray X = load_fixture();
  ASSERT_EQ(X.cols(), 16u);
  DictionaryConfig cfg;
  cfg.atoms = 8;
  cfg.lambda_sparse = 0.1;
  cfg.steps = 1000;
  cfg.learning_rate = 0.05;
  SeededRng rng(3);
  const DictionaryResult r = learn_dictionary(X, cfg, nullptr, rng);
  EXPECT_LT(r.history.back().reconstruction, 0.1 * r.history.front().reconstruction);
  EXPECT_LT(r.history.back().total, r.history.front().total);
  // Final state is reported in the history.
  const DictionaryLoss final_loss = dictionary_loss(r.dictionary, X, cfg);
  EXPECT_NEAR(final_loss.total, r.history.back().total, 1e-12);
}

TEST(LearnDictionary, SparsityWeightLowersCoefficientL1) {
  const NdArray X = load_fixture();
  DictionaryConfig base;
  base.atoms = 8;
  base.steps = 1000;
  DictionaryConfig sparse = base;
  sparse.lambda_sparse = 0.1;
  SeededRng r1(4), r2(4);
  const auto plain = learn_dictionary(X, base, nullptr, r1);
  const auto with = learn_dictionary(X, sparse, nullptr, r2);
  EXPECT_LT(with.history.back().sparsity, plain.history.back().sparsity);
  EXPECT_LT(with.history.back().sparsity, with.history.front().sparsity);
}

TEST(LearnDictionary, SmallStepIsADescentStep) {
  SeededRng rng(5);
  const NdArray X = random_matrix(rng, 40, 6);
  const std::vector<double> w = {1, -2, 0.5, 0, 1, 3};
  const MlpModel m = linear_net(w);
  DictionaryConfig cfg;
  cfg.atoms = 4;
  cfg.lambda_sparse = 0.05;
  cfg.lambda_trim = 0.05;
  cfg.steps = 1;
  cfg.learning_rate = 1e-3;
  const auto r = learn_dictionary(X, cfg, &m, rng);
  EXPECT_LT(r.history[1].total, r.history[0].total);
}

TEST(LearnDictionary, SameSeedSameDictionary) {
  const NdArray X = load_fixture();
  DictionaryConfig cfg;
  cfg.steps = 20;
  SeededRng a(6), b(6);
  EXPECT_EQ(learn_dictionary(X, cfg, nullptr, a).dictionary.analysis,
            learn_dictionary(X, cfg, nullptr, b).dictionary.analysis);
}

TEST(LearnDictionary, ContractViolations) {
  SeededRng rng(7);
  const NdArray X = random_matrix(rng, 10, 4);
  DictionaryConfig cfg;
  cfg.atoms = 3;
  cfg.lambda_trim = 0.1;
  EXPECT_THROW(learn_dictionary(X, cfg, nullptr, rng), ContractError);
  cfg.lambda_trim = 0.0;
  cfg.init = DictionaryInit::Identity;
  EXPECT_THROW(learn_dictionary(X, cfg, nullptr, rng), ContractError);
  cfg.init = DictionaryInit::Random;
  cfg.lambda_sparse = -1.0;
  EXPECT_THROW(learn_dictionary(X, cfg, nullptr, rng), ContractError);
  cfg.lambda_sparse = 0.0;
  const MlpModel wrong = linear_net({1, 2, 3});
  cfg.lambda_trim = 0.1;
  EXPECT_THROW(learn_dictionary(X, cfg, &wrong, rng), DimensionError);
}

TEST(LearnDictionary, DivergenceIsReported) {
  SeededRng rng(8);
  const NdArray X = random_matrix(rng, 10, 4, 10.0);
  DictionaryConfig cfg;
  cfg.atoms = 4;
  cfg.learning_rate = 1e4;
  cfg.steps = 1000;
  try {
    learn_dictionary(X, cfg, nullptr, rng);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
  }
}

TEST(DictionaryJson, RoundTripPreservesMatrices) {
  SeededRng rng(9);
  const LinearDictionary d{random_matrix(rng, 3, 5), random_matrix(rng, 5, 3)};
  const LinearDictionary back = dictionary_from_json(nlohmann::json::parse(dictionary_to_json(d, {}, 9).dump()));
  EXPECT_EQ(back.analysis, d.analysis);
  EXPECT_EQ(back.synthesis, d.synthesis);
  EXPECT_THROW(dictionary_from_json(nlohmann::json{{"kind", "dft1d"}}), std::exception);
}

TEST(SparseFixtureGenerator, UsesExactlyActiveAtomsPerSample) {
  SeededRng rng(10);
  const SparseFixture f = make_sparse_fixture(50, 16, 8, 2, rng);
  ASSERT_EQ(f.X.rows(), 50u);
  // Generators have unit columns.
  for (std::size_t a = 0; a < 8; ++a) {
    double norm = 0.0;
    for (std::size_t i = 0; i < 16; ++i) norm += f.generators(i, a) * f.generators(i, a);
    EXPECT_NEAR(norm, 1.0, 1e-12);
  }
  // Generators are linearly independent, so least squares recovers exactly two nonzeros.
  const NdArray p = pseudo_inverse(f.generators);  // 8 x 16
  for (std::size_t r = 0; r < 50; ++r) {
    std::vector<double> c(8, 0.0);
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t i = 0; i < 16; ++i) c[a] += p(a, i) * f.X(r, i);
    int nonzero = 0;
    for (double v : c) nonzero += std::abs(v) > 1e-8;
    EXPECT_EQ(nonzero, 2) << r;
  }
}
