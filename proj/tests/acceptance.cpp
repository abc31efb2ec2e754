// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "trim/cli.hpp"
#include "trim/csv.hpp"
#include "trim/dictionary.hpp"
#include "trim/experiments.hpp"
#include "trim/fft.hpp"
#include "trim/trim.hpp"

using namespace trim;
using namespace trim::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Verdict benchmark_ordering() {
  SyntheticConfig cfg;  // d = 32, 100 datasets, 2000 samples, master seed 0
  const BenchmarkReport r = run_benchmark(cfg, 0);
  const MethodSummary& cd = r.summary(Method::CD);
  bool ok = true;
  std::ostringstream d;
  d << "runtime " << fmt("%.0f", r.runtime_seconds) << " s;";
  for (const auto& s : r.summaries) {
    d << " " << method_name(s.method) << " " << fmt("%.1f", s.error_pct) << "+-" << fmt("%.2f", s.stderr_pct);
    if (s.method == Method::CD) continue;
    const double pooled = std::sqrt(cd.stderr_pct * cd.stderr_pct + s.stderr_pct * s.stderr_pct);
    if (!(cd.error_pct <= s.error_pct || cd.error_pct - s.error_pct <= pooled)) ok = false;
  }
  return {ok, d.str()};
}

// --- 2 ---------------------------------------------------------------------

Verdict oracle_ceiling() {
  SyntheticConfig cfg;
  cfg.model_source = ModelSource::Oracle;
  cfg.n_datasets = 50;
  const BenchmarkReport r = run_benchmark(cfg, 0);
  bool ok = true;
  std::ostringstream d;
  for (const auto& s : r.summaries) {
    d << method_name(s.method) << " " << fmt("%.1f", s.error_pct) << "% ";
    ok = ok && s.errors == 0;
  }
  return {ok, d.str()};
}

// --- 3 ---------------------------------------------------------------------

Verdict cd_exactness() {
  SeededRng rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_index(15);
    std::vector<std::size_t> widths{n};
    const std::size_t depth = 1 + rng.uniform_index(3);
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(2 + rng.uniform_index(31));
    widths.push_back(1);
    const MlpModel m = random_net(widths, 3000 + i, 0.5);
    const NdArray x = random_vector(rng, n, 2.0);
    NdArray b({1, n}), g({1, n});
    for (std::size_t j = 0; j < n; ++j) {
      // Mix of hard splits and arbitrary real splits.
      const double share = (i % 2 == 0) ? double(rng.uniform_index(2)) : rng.normal();
      b[j] = share * x[j];
      g[j] = x[j] - b[j];
    }
    const CdOutput o = cd_forward(m, {b, g});
    worst = std::max(worst, std::abs(o.beta_out + o.gamma_out - m.predict(x.values())));
  }
  return {worst <= 1e-9, "max |beta+gamma-f| = " + fmt("%.2e", worst) + " over 1000 pairs"};
}

// --- 4 ---------------------------------------------------------------------

Verdict ig_completeness() {
  SeededRng rng(4);
  double worst_rel = 0.0, sum64 = 0.0, sum4096 = 0.0;
  int not_smaller = 0;
  for (int i = 0; i < 50; ++i) {
    const MlpModel m = random_net({12, 32, 32, 1}, 4000 + i, 0.3);
    const MlpFunction f(m);
    const NdArray x = random_vector(rng, 12), b({12});
    const auto coarse = integrated_gradients(f, x, b, 64);
    const auto fine = integrated_gradients(f, x, b, 4096);
    const double delta = std::abs(fine.output - fine.baseline_output);
    worst_rel = std::max(worst_rel, fine.completeness_gap / delta);
    if (!(fine.completeness_gap < coarse.completeness_gap)) ++not_smaller;
    sum64 += coarse.completeness_gap;
    sum4096 += fine.completeness_gap;
  }
  return {worst_rel < 0.01 && not_smaller == 0,
          "max gap/|f(x)-f(b)| at 4096 steps " + fmt("%.2e", worst_rel) + "; nets where 4096 steps is not better than 64: " +
              std::to_string(not_smaller) + "/50; mean gap 64 steps " + fmt("%.2e", sum64 / 50) + ", 4096 steps " +
              fmt("%.2e", sum4096 / 50)};
}

// --- 5 ---------------------------------------------------------------------

Verdict shapley_axioms() {
  SeededRng rng(5);
  const ShapleyConfig exact{ShapleyConfig::Mode::Exact, 0, 0};
  double eff = 0.0, lin = 0.0, worst_z = 0.0;
  for (int i = 0; i < 20; ++i) {
    const MlpModel m = random_net({10, 24, 24, 1}, 5000 + i, 0.3);
    const NdArray x = random_vector(rng, 10), b = random_vector(rng, 10);
    const std::vector<std::vector<std::size_t>> groups = {{0, 1}, {2}, {3, 4, 5}, {6}, {7, 8}, {9}};
    const auto r = shapley(MlpFunction(m), x, groups, b, exact);
    eff = std::max(eff, std::abs(r.score - (m.predict(x.values()) - m.predict(b.values()))));

    const NdArray w = random_vector(rng, 8);
    const MlpModel lm = linear_net(std::vector<double>(w.data().begin(), w.data().end()), rng.normal());
    const NdArray lx = random_vector(rng, 8), lb = random_vector(rng, 8);
    const auto lr = shapley(MlpFunction(lm), lx, singleton_groups(8), lb, exact);
    for (std::size_t j = 0; j < 8; ++j) lin = std::max(lin, std::abs(lr.scores[j] - w[j] * (lx[j] - lb[j])));
  }
  for (int i = 0; i < 5; ++i) {
    const MlpModel m = random_net({6, 24, 24, 1}, 5500 + i, 0.3);
    const NdArray x = random_vector(rng, 6, 2.0), b({6});
    const MlpFunction f(m);
    const auto e = shapley(f, x, singleton_groups(6), b, exact);
    const auto s = shapley(f, x, singleton_groups(6), b, {ShapleyConfig::Mode::Sampled, 1000, 5500u + i});
    for (std::size_t j = 0; j < 6; ++j) {
      const double z = std::abs(s.scores[j] - e.scores[j]) / std::max(s.standard_errors[j], 1e-300);
      if (std::abs(s.scores[j] - e.scores[j]) > 1e-12) worst_z = std::max(worst_z, z);
    }
  }
  return {eff <= 1e-9 && lin <= 1e-9 && worst_z < 3.0,
          "efficiency " + fmt("%.1e", eff) + ", linear " + fmt("%.1e", lin) + ", max sampled deviation " +
              fmt("%.2f", worst_z) + " SE"};
}

// --- 6 ---------------------------------------------------------------------

Verdict spectral_kernel() {
  SeededRng rng(6);
  double dense = 0.0, parseval = 0.0, leak = 0.0;
  for (std::size_t n = 4; n <= 1024; n *= 2) {
    ComplexSeq x(n);
    std::vector<std::complex<double>> xc(n);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x.re[i] = rng.normal();
      x.im[i] = rng.normal();
      xc[i] = {x.re[i], x.im[i]};
      energy += std::norm(xc[i]);
    }
    const ComplexSeq got = fft(x, FftDirection::Forward);
    const auto want = dense_dft(xc);
    double fe = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      dense = std::max({dense, std::abs(got.re[k] - want[k].real()), std::abs(got.im[k] - want[k].imag())});
      fe += got.re[k] * got.re[k] + got.im[k] * got.im[k];
    }
    parseval = std::max(parseval, std::abs(fe - energy) / energy);

    const Transform t = make_dft1d(n);
    const NdArray xr = random_vector(rng, n);
    const CoefficientVector s = trim::apply(t, xr);
    for (const auto& band : tile_bands(t, std::max<std::size_t>(1, n / 16))) {
      const ComplexSeq z = synthesize_complex(t, {band_mask(t, band).apply(s.values), s.layout});
      for (double v : z.im) leak = std::max(leak, std::abs(v));
    }
  }
  const Transform t2 = make_dft2d(16, 16);
  const NdArray x2 = random_vector(rng, 256);
  const CoefficientVector s2 = trim::apply(t2, x2);
  for (const auto& band : tile_bands(t2, 2)) {
    const ComplexSeq z = synthesize_complex(t2, {band_mask(t2, band).apply(s2.values), s2.layout});
    for (double v : z.im) leak = std::max(leak, std::abs(v));
  }
  return {dense <= 1e-10 && parseval <= 1e-9 && leak < 1e-10,
          "dense DFT diff " + fmt("%.1e", dense) + ", Parseval rel " + fmt("%.1e", parseval) + ", imaginary leakage " +
              fmt("%.1e", leak)};
}

// --- 7 ---------------------------------------------------------------------

Verdict reduction_identity() {
  SeededRng rng(7);
  double worst = 0.0;
  const ShapleyConfig exact{ShapleyConfig::Mode::Exact, 0, 0};
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.uniform_index(7);
    const MlpModel m = random_net({n, 16, 16, 1}, 7000 + i, 0.3);
    const MlpFunction f(m);
    const NdArray x = random_vector(rng, n);
    Mask mask = Mask::zeros(n);
    for (auto& e : mask.entries) e = static_cast<std::uint8_t>(rng.uniform_index(2));
    NdArray in({n}), out({n});
    for (std::size_t j = 0; j < n; ++j) (mask.entries[j] ? in : out)[j] = x[j];
    auto masked_sum = [&](const std::vector<double>& s) {
      double t = 0.0;
      for (std::size_t j = 0; j < n; ++j) t += mask.entries[j] ? s[j] : 0.0;
      return t;
    };
    for (Method method : {Method::CD, Method::IG, Method::InputXGrad, Method::Shapley}) {
      MethodConfig mc;
      mc.method = method;
      mc.ig_steps = 32;
      mc.shapley = exact;
      const double got = trim_score(m, x, {IdentityTransform{n}, mask, mc}).score;
      double want = 0.0;
      switch (method) {
        case Method::CD: want = cd_forward(m, {in.reshaped({1, n}), out.reshaped({1, n})}).beta_out; break;
        case Method::IG: want = masked_sum(integrated_gradients(f, x, out, 32).scores); break;
        case Method::InputXGrad: want = masked_sum(input_x_gradient(f, x, out).scores); break;
        case Method::Shapley: want = masked_sum(shapley(f, x, singleton_groups(n), out, exact).scores); break;
      }
      worst = std::max(worst, std::abs(got - want));
    }
  }
  return {worst <= 1e-9, "max |TRIM - raw| = " + fmt("%.1e", worst) + " over 100 cases x 4 methods"};
}

// --- 8 ---------------------------------------------------------------------

Verdict linear_agreement() {
  SeededRng rng(8);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 16;
    const NdArray w = random_vector(rng, n);
    const MlpModel m = linear_net(std::vector<double>(w.data().begin(), w.data().end()));
    const NdArray x = random_vector(rng, n);
    const Transform t = make_dft1d(n);
    std::vector<std::vector<double>> scores;
    for (Method method : {Method::CD, Method::IG, Method::InputXGrad, Method::Shapley}) {
      MethodConfig mc;
      mc.method = method;
      mc.ig_steps = 16;
      mc.shapley = {ShapleyConfig::Mode::Exact, 0, 0};
      scores.push_back(group_scores(m, x, t, mc).scores);
    }
    for (std::size_t k = 1; k < scores.size(); ++k)
      for (std::size_t g = 0; g < scores[0].size(); ++g) worst = std::max(worst, std::abs(scores[k][g] - scores[0][g]));
  }
  return {worst <= 1e-9, "max per-group disagreement " + fmt("%.1e", worst) + " over 20 nets"};
}

// --- 9 ---------------------------------------------------------------------

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nb)), 1e-300);
}

Verdict gradient_check() {
  SeededRng rng(9);
  double worst_in = 0.0, worst_par = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.uniform_index(12);
    std::vector<std::size_t> widths{n, 4 + rng.uniform_index(20), 4 + rng.uniform_index(20), 1};
    MlpModel m = random_net(widths, 9000 + i, 0.3);
    // Finite differences are only valid away from ReLU kinks.
    NdArray X({6, n});
    for (std::size_t r = 0; r < 6; ++r) {
      NdArray x;
      do x = random_vector(rng, n);
      while (min_kink_distance(m, x) < 1e-3);
      for (std::size_t j = 0; j < n; ++j) X(r, j) = x[j];
    }
    const auto xr = X.row(0);
    const NdArray x0 = NdArray::vector({xr.begin(), xr.end()});
    const NdArray g = m.grad_input(x0);
    worst_in = std::max(worst_in, rel_err({g.data().begin(), g.data().end()}, finite_difference_grad(m, x0, h)));

    MlpModel logit(MlpSpec{widths, OutputHead::Logit}, m.params());
    std::vector<double> y(6);
    for (auto& v : y) v = double(rng.uniform_index(2));
    const LossGradients lg = loss_gradients(logit, X, y);
    std::vector<double> bp, fd;
    for (std::size_t l = 0; l < widths.size() - 1; ++l) {
      for (int k = 0; k < 5; ++k) {
        const bool bias = k == 4;
        MlpParams p = logit.params();
        const std::size_t idx = bias ? rng.uniform_index(p.layers[l].bias.size())
                                     : rng.uniform_index(p.layers[l].weight.size());
        double& param = bias ? p.layers[l].bias[idx] : p.layers[l].weight[idx];
        const double orig = param;
        param = orig + h;
        const double up = loss_gradients(MlpModel(logit.spec(), p), X, y).loss;
        param = orig - h;
        const double down = loss_gradients(MlpModel(logit.spec(), p), X, y).loss;
        fd.push_back((up - down) / (2 * h));
        bp.push_back(bias ? lg.bias[l][idx] : lg.weight[l][idx]);
      }
    }
    worst_par = std::max(worst_par, rel_err(bp, fd));
  }
  return {worst_in < 1e-4 && worst_par < 1e-4, "max relative error: input gradients " + fmt("%.1e", worst_in) +
                                                   ", parameter gradients " + fmt("%.1e", worst_par) + " (100 nets)"};
}

// --- 10 --------------------------------------------------------------------

Verdict band_demo_recovery() {
  int hits = 0;
  std::ostringstream misses;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BandDemoResult r = band_demo(seed);
    if (r.argmax_band == r.injected_band) {
      ++hits;
    } else {
      misses << " seed " << seed << " (injected " << r.injected_band << ", argmax " << r.argmax_band << ")";
    }
  }
  return {hits >= 19, std::to_string(hits) + "/20 runs recover the injected band" + misses.str()};
}

// --- 11 --------------------------------------------------------------------

Verdict learned_transform() {
  const NdArray X = read_csv_matrix(std::string(TRIM_FIXTURE_DIR) + "/sparse_synthetic.csv");
  DictionaryConfig cfg;
  cfg.atoms = 8;
  cfg.lambda_sparse = 0.1;
  cfg.steps = 1000;
  cfg.learning_rate = 0.05;
  SeededRng rng(11);
  const DictionaryResult r = learn_dictionary(X, cfg, nullptr, rng);
  const auto& first = r.history.front();
  const auto& last = r.history.back();
  const double recon_ratio = last.reconstruction / first.reconstruction;

  DictionaryConfig id;
  id.atoms = X.cols();
  id.init = DictionaryInit::Identity;
  id.steps = 200;
  const DictionaryResult fixed = learn_dictionary(X, id, nullptr, rng);
  const NdArray eye = NdArray::identity(X.cols());
  const double drift = std::max(max_abs_diff(fixed.dictionary.analysis.values(), eye.values()),
                                max_abs_diff(fixed.dictionary.synthesis.values(), eye.values()));
  return {recon_ratio < 0.1 && last.sparsity < first.sparsity && drift == 0.0,
          "reconstruction " + fmt("%.3g", first.reconstruction) + " -> " + fmt("%.3g", last.reconstruction) + " (" +
              fmt("%.1f", 100 * recon_ratio) + "%), l1 " + fmt("%.3g", first.sparsity) + " -> " +
              fmt("%.3g", last.sparsity) + ", identity drift " + fmt("%.1e", drift)};
}

// --- 12 --------------------------------------------------------------------

Verdict cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "trim_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "bench.ini").string();
  std::ofstream(cfg) << "[run]\nseed = 12\nformat = json\n[benchmark]\nn_datasets = 4\n";
  auto run = [&](const std::string& threads, const std::string& out) {
    std::ostringstream o, e;
    const int code = run_cli({"benchmark", "--config", cfg, "--threads", threads, "--out", (dir / out).string()}, o, e);
    std::ifstream in(dir / out / "benchmark.json");
    return std::make_pair(code, std::string(std::istreambuf_iterator<char>(in), {}));
  };
  const auto a = run("1", "a"), b = run("1", "b"), c = run("3", "c");
  fs::remove_all(dir);
  const bool ran = a.first == 0 && b.first == 0 && c.first == 0 && !a.second.empty();
  const bool bytes = ran && a.second == b.second;
  const bool aggregates = ran && nlohmann::json::parse(a.second).at("methods") ==
                                     nlohmann::json::parse(c.second).at("methods");
  return {bytes && aggregates, std::string("threads=1 twice ") + (bytes ? "byte-identical" : "DIFFER") +
                                   ", threads=3 aggregates " + (aggregates ? "equal" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"benchmark ordering (CD <= others or within one pooled SE)", benchmark_ordering},
      {"oracle ceiling (0% error for every method, 50 trials)", oracle_ceiling},
      {"CD exactness (beta + gamma == f within 1e-9)", cd_exactness},
      {"IG completeness (<1% at 4096 steps, better than 64)", ig_completeness},
      {"Shapley axioms (efficiency, linear case, sampled vs exact)", shapley_axioms},
      {"spectral kernel (dense oracle, Parseval, leakage)", spectral_kernel},
      {"reduction identity (identity transform == raw attribution)", reduction_identity},
      {"linear-model cross-method agreement", linear_agreement},
      {"gradient check (backprop vs finite differences)", gradient_check},
      {"band demo (injected band is argmax in >= 95% of runs)", band_demo_recovery},
      {"learned transform (reconstruction, sparsity, identity fixed point)", learned_transform},
      {"determinism (CLI benchmark JSON)", cli_determinism},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].first << " -- "
              << v.detail << " [" << fmt("%.1f", secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
