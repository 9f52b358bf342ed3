#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "latent_score/em.hpp"
#include "latent_score/scoring.hpp"
#include "latent_score/synth.hpp"
#include "test_support.hpp"

using namespace latent_score;
using latent_score::testing::random_incomplete;
using latent_score::testing::random_params;

namespace {

// Sequential log predictive of a complete dataset, processed in row order.
double sequential_log_predictive(const Dataset& data, const PriorSet& prior) {
  StatSet counts(prior.spec());
  double total = 0.0;
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    const auto h = static_cast<std::size_t>(data.hidden()[t]);
    total += std::log((prior.root(h) + counts.root(h)) / (prior.row_total(0) + counts.row_total(0)));
    for (std::size_t var = 0; var < data.num_observed(); ++var) {
      const auto k = static_cast<std::size_t>(data.value(t, var));
      const std::size_t row = counts.leaf_row(var, h);
      total += std::log((prior.leaf(var, h, k) + counts.leaf(var, h, k)) / (prior.row_total(row) + counts.row_total(row)));
    }
    counts.root(h) += 1.0;
    for (std::size_t var = 0; var < data.num_observed(); ++var) {
      counts.leaf(var, h, static_cast<std::size_t>(data.value(t, var))) += 1.0;
    }
  }
  return total;
}

// Literal enumeration: log-sum-exp of bd_complete over every completion.
double brute_force_oracle(const Dataset& data, const ModelSpec& spec, const PriorSet& prior) {
  const std::size_t n = data.num_samples();
  const auto c = static_cast<std::size_t>(spec.hidden_arity);
  std::vector<int> hidden(n, 0);
  std::vector<double> terms;
  while (true) {
    terms.push_back(bd_complete(sufficient_stats(attach_hidden(data, hidden, spec.hidden_arity)), prior));
    std::size_t pos = 0;
    while (pos < n && static_cast<std::size_t>(++hidden[pos]) == c) hidden[pos++] = 0;
    if (pos == n) break;
  }
  return log_sum_exp(terms);
}

EmResult tight_fit(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, std::uint64_t seed) {
  EmConfig config;
  config.rel_tol = 1e-13;
  config.max_iters_after_init = 20000;
  return fit(data, spec, prior, config, SeededStream(seed, 0));
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("bd_complete hand cases") {
  const auto spec = binary_spec(1, 1);
  const auto prior = PriorSet::uniform(spec, 1.0);
  const Dataset one({2}, {1}, std::vector<int>{0}, 1);
  CHECK(std::abs(bd_complete(sufficient_stats(one), prior) - std::log(0.5)) < 1e-14);
  const Dataset two({2}, {1, 1}, std::vector<int>{0, 0}, 1);
  CHECK(std::abs(bd_complete(sufficient_stats(two), prior) - std::log(1.0 / 3.0)) < 1e-14);

  StatSet fractional(spec);
  fractional.root(0) = 0.5;
  CHECK_THROWS_AS(bd_complete(fractional, prior), ContractError);
}

TEST_CASE("bd_complete equals the summed sequential predictive") {
  SeededStream rng(70, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelSpec spec{{2, 3, 2}, 1 + trial % 4};
    const auto model = generate_model(spec, rng);
    const auto data = sample_dataset(model, 5 + static_cast<std::size_t>(trial) * 3, rng);
    PriorSet prior(spec);
    for (double& a : prior.values()) a = 0.3 + 2.0 * rng.uniform();
    CHECK(std::abs(bd_complete(sufficient_stats(data), prior) - sequential_log_predictive(data, prior)) < 1e-9);
  }
}

TEST_CASE("fractional_bd") {
  SeededStream rng(71, 0);
  const auto spec = binary_spec(2, 2);
  const auto data = sample_dataset(generate_model(spec, rng), 15, rng);
  const auto prior = PriorSet::uniform(spec, 1.5);
  const auto stats = sufficient_stats(data);
  CHECK(fractional_bd(stats, prior) == bd_complete(stats, prior));
  CHECK(fractional_bd(StatSet(spec), prior) == 0.0);

  // Single row (1.4, 0.6) under alpha = (1, 1).
  StatSet row(binary_spec(1, 1));
  row.leaf(0, 0, 0) = 1.4;
  row.leaf(0, 0, 1) = 0.6;
  const double expected = std::lgamma(2.0) - std::lgamma(4.0) + std::lgamma(2.4) + std::lgamma(1.6);
  CHECK(std::abs(fractional_bd(row, PriorSet::uniform(row.spec(), 1.0)) - expected) < 1e-13);
}

TEST_CASE("oracle_exact hand case and brute-force agreement") {
  const auto spec = binary_spec(1, 2);
  const Dataset one({2}, {1});
  CHECK(std::abs(oracle_exact(one, spec, PriorSet::uniform(spec, 1.0)) - std::log(0.5)) < 1e-14);

  SeededStream rng(72, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelSpec tiny{{2, 3}, 2 + trial % 2};
    const auto data = random_incomplete(tiny, 4 + static_cast<std::size_t>(trial % 3), rng);
    const auto prior = PriorSet::uniform(tiny, 1.01);
    CHECK(std::abs(oracle_exact(data, tiny, prior) - brute_force_oracle(data, tiny, prior)) < 1e-10);
  }
}

TEST_CASE("oracle_exact with one hidden state is the complete-data score") {
  const auto spec = binary_spec(3, 1);
  SeededStream rng(73, 0);
  const auto data = random_incomplete(spec, 25, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto forced = sufficient_stats(attach_hidden(data, std::vector<int>(25, 0), 1));
  CHECK(oracle_exact(data, spec, prior) == bd_complete(forced, prior));
}

TEST_CASE("oracle_exact is invariant to row order") {
  const auto spec = binary_spec(3, 2);
  SeededStream rng(74, 0);
  const auto data = random_incomplete(spec, 10, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const double base = oracle_exact(data, spec, prior);
  std::vector<std::size_t> order(10);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<int> rows;
    for (std::size_t t : order) rows.insert(rows.end(), data.record(t).begin(), data.record(t).end());
    CHECK(std::abs(oracle_exact(Dataset(data.observed_arities(), rows), spec, prior) - base) < 1e-9);
  }
}

TEST_CASE("oracle_exact refuses beyond the cap") {
  const auto spec = binary_spec(2, 2);
  SeededStream rng(75, 0);
  const auto data = random_incomplete(spec, 21, rng);
  CHECK_THROWS_AS(oracle_exact(data, spec, PriorSet::uniform(spec, 1.01)), InfeasibleError);
  CHECK_THROWS_AS(oracle_exact(random_incomplete(spec, 5, rng), spec, PriorSet::uniform(spec, 1.01), 16),
                  InfeasibleError);
  CHECK_NOTHROW(oracle_exact(random_incomplete(spec, 4, rng), spec, PriorSet::uniform(spec, 1.01), 16));
}

TEST_CASE("neg_hessian of a single complete-data row") {
  const auto spec = binary_spec(1, 1);
  const double a = 7.0;
  const double b = 3.0;
  std::vector<int> rows;
  for (int i = 0; i < 7; ++i) rows.push_back(0);
  for (int i = 0; i < 3; ++i) rows.push_back(1);
  const Dataset data({2}, rows, std::vector<int>(10, 0), 1);
  ParamSet mode(spec);
  mode.root(0) = 1.0;
  mode.leaf(0, 0, 0) = a / (a + b);
  mode.leaf(0, 0, 1) = b / (a + b);
  const auto hess = neg_hessian(to_free(mode), data, PriorSet::uniform(spec, 1.0));
  REQUIRE(hess.order() == 1);
  const double theta = a / (a + b);
  const double expected = a / (theta * theta) + b / ((1 - theta) * (1 - theta));
  CHECK(std::abs(hess(0, 0) - expected) / expected < 1e-8);
}

TEST_CASE("neg_hessian is nearly symmetric and agrees with second differences of g") {
  SeededStream rng(76, 0);
  const auto spec = binary_spec(3, 2);
  const auto data = random_incomplete(spec, 12, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  for (int trial = 0; trial < 5; ++trial) {
    const auto coords = to_free(random_params(spec, rng));
    const auto raw = raw_neg_hessian(coords, data, prior);
    const std::size_t d = coords.values.size();
    double asym = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) asym = std::max(asym, std::abs(raw[i * d + j] - raw[j * d + i]));
    }
    CHECK(asym / max_abs(raw) < 1e-5);

    const auto sym = neg_hessian(coords, data, prior);
    const auto oracle = latent_score::testing::fd_neg_hessian_of_g(coords, data, prior, 1e-4);
    double diff = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(sym(i, j) - oracle[i * d + j]));
    }
    CHECK(diff / max_abs(oracle) < 1e-3);

    double fd_gap = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        fd_gap = std::max(fd_gap, std::abs(sym(i, j) - 0.5 * (raw[i * d + j] + raw[j * d + i])));
      }
    }
    CHECK(fd_gap / max_abs(raw) < 1e-6);
  }
}

TEST_CASE("neg_hessian is positive definite at interior MAPs of tiny instances") {
  SeededStream rng(77, 0);
  for (int seed = 0; seed < 20; ++seed) {
    const auto spec = binary_spec(1 + seed % 3, 2);
    const auto data = random_incomplete(spec, 5 + static_cast<std::size_t>(seed % 16), rng);
    const auto prior = PriorSet::uniform(spec, 1.01);
    const auto em = tight_fit(data, spec, prior, 100 + static_cast<std::uint64_t>(seed));
    CHECK_NOTHROW(log_det_pd(neg_hessian(to_free(em.params), data, prior)));
  }
}

TEST_CASE("gradient vanishes at a converged MAP") {
  SeededStream rng(78, 0);
  const auto spec = binary_spec(3, 2);
  const auto data = random_incomplete(spec, 20, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 5);
  CHECK(em.converged);
  CHECK(max_abs(grad_g(to_free(em.params), data, prior)) < 1e-4);
}

TEST_CASE("bic and draper arithmetic") {
  CHECK(std::abs(bic_score(-100.0, 5, 100) - (-111.51292546497023)) < 1e-9);
  CHECK(std::abs(draper_score(-100.0, 5, 100) - (-106.91823279894687)) < 1e-9);
  CHECK(bic_score(-42.0, 0, 100) == -42.0);
  CHECK(bic_score(-42.0, 7, 1) == -42.0);
  CHECK(draper_score(-42.0, 0, 100) == bic_score(-42.0, 0, 100));
  for (double ll : {-1.0, -1e4}) {
    for (std::size_t n : {1u, 50u, 4000u}) {
      for (std::size_t d : {0u, 3u, 2079u}) {
        CHECK(std::abs(draper_score(ll, d, n) - bic_score(ll, d, n) - 0.5 * d * std::log(2 * std::numbers::pi)) <
              1e-12 * std::max(1.0, 0.5 * d * std::log(2 * std::numbers::pi)));
      }
    }
  }
}

TEST_CASE("Laplace is accurate in the conjugate case") {
  const auto spec = binary_spec(1, 1);
  std::vector<int> rows(100, 0);
  std::fill(rows.begin(), rows.begin() + 60, 1);
  const Dataset data({2}, rows);
  const auto prior = PriorSet::uniform(spec, 2.0);
  ParamSet init(spec);
  init.root(0) = 1.0;
  init.leaf(0, 0, 0) = 0.5;
  init.leaf(0, 0, 1) = 0.5;
  EmConfig config;
  const auto em = run_em(init, data, prior, config);
  CHECK(std::abs(em.params.leaf(0, 0, 1) - 61.0 / 102.0) < 1e-12);
  const double exact = bd_complete(sufficient_stats(attach_hidden(data, std::vector<int>(100, 0), 1)), prior);
  CHECK(std::abs(laplace_score(em, data, prior) - exact) < 0.05);
}

TEST_CASE("Laplace minus BIC decomposes into its terms") {
  SeededStream rng(79, 0);
  const auto spec = binary_spec(3, 2);
  const auto data = random_incomplete(spec, 15, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 9);
  const double d = static_cast<double>(dimension(spec));
  const double loglik = log_likelihood(em.params, data);
  const double g = log_posterior_g(em.params, data, prior);
  const double log_det = log_det_pd(neg_hessian(to_free(em.params), data, prior));
  const double gap = laplace_score(em, data, prior) - bic_score(loglik, dimension(spec), 15);
  const double expected = 0.5 * d * std::log(2 * std::numbers::pi) + (g - loglik) - 0.5 * log_det + 0.5 * d * std::log(15.0);
  CHECK(std::abs(gap - expected) < 1e-9);
}

TEST_CASE("complete-data collapse with one hidden state") {
  SeededStream rng(80, 0);
  const auto spec = binary_spec(4, 1);
  const auto data = random_incomplete(spec, 150, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 3);
  const double exact = bd_complete(sufficient_stats(attach_hidden(data, std::vector<int>(150, 0), 1)), prior);
  CHECK(mled_score(em, data, prior) == exact);
  CHECK(std::abs(cs_score(em, data, prior) - exact) < 1e-9);
  CHECK(std::abs(laplace_score(em, data, prior) - exact) < 0.1);

  const double loglik = log_likelihood(em.params, data);
  CHECK(bic_score(loglik, dimension(spec), 150) == loglik - 0.5 * 4 * std::log(150.0));
}

TEST_CASE("CS minus MLED is the likelihood correction") {
  SeededStream rng(81, 0);
  const auto spec = binary_spec(4, 3);
  const auto data = random_incomplete(spec, 40, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 4);
  const auto stats = e_step(em.params, data);
  const double correction = log_likelihood(em.params, data) - expected_complete_loglik(stats, em.params);
  CHECK(std::abs(cs_score(em, data, prior) - mled_score(em, data, prior) - correction) < 1e-9);
}

TEST_CASE("scores are invariant to hidden-label permutation") {
  SeededStream rng(82, 0);
  const auto spec = binary_spec(3, 3);
  const auto data = random_incomplete(spec, 12, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 6);
  ScoreOptions options;
  options.measures.assign(std::begin(kAllMeasures), std::end(kAllMeasures));
  options.measures.pop_back();  // 3^12 completions is over the default cap
  const auto base = score_at_mode(em.params, data, prior, options);
  REQUIRE(base.laplace.value.has_value());
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto permuted = score_at_mode(permute_hidden(em.params, perm), data, prior, options);
  for (Measure m : options.measures) {
    INFO(measure_name(m));
    REQUIRE(permuted.get(m).value.has_value());
    CHECK(std::abs(*permuted.get(m).value - *base.get(m).value) < 1e-9);
  }
}

TEST_CASE("MLED lies within a sanity band of the oracle") {
  // Well-separated components keep the completion posterior sharp; on
  // overlapping ones the oracle also collects the completion entropy.
  const auto spec = binary_spec(3, 2);
  ParamSet model(spec);
  model.root(0) = 0.5;
  model.root(1) = 0.5;
  for (std::size_t var = 0; var < 3; ++var) {
    model.leaf(var, 0, 0) = 0.97;
    model.leaf(var, 0, 1) = 0.03;
    model.leaf(var, 1, 0) = 0.03;
    model.leaf(var, 1, 1) = 0.97;
  }
  SeededStream rng(83, 0);
  const auto data = strip_hidden(sample_dataset(model, 12, rng));
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 200);
  CHECK(std::abs(mled_score(em, data, prior) - oracle_exact(data, spec, prior)) < 3.0);
}

TEST_CASE("score_at_mode agrees with the standalone measures") {
  SeededStream rng(84, 0);
  const auto spec = binary_spec(3, 2);
  const auto data = random_incomplete(spec, 9, rng);
  const auto prior = PriorSet::uniform(spec, 1.01);
  const auto em = tight_fit(data, spec, prior, 8);
  ScoreOptions options;
  options.measures.assign(std::begin(kAllMeasures), std::end(kAllMeasures));
  const auto report = score_at_mode(em.params, data, prior, options);
  const double loglik = log_likelihood(em.params, data);
  CHECK(report.d == 7);
  CHECK(report.n == 9);
  CHECK(std::abs(report.loglik_at_mode - loglik) < 1e-12);
  CHECK(std::abs(*report.laplace.value - laplace_score(em, data, prior)) < 1e-12);
  CHECK(std::abs(*report.bic.value - bic_score(loglik, 7, 9)) < 1e-12);
  CHECK(std::abs(*report.draper.value - draper_score(loglik, 7, 9)) < 1e-12);
  CHECK(std::abs(*report.mled.value - mled_score(em, data, prior)) < 1e-12);
  CHECK(std::abs(*report.cs.value - cs_score(em, data, prior)) < 1e-12);
  CHECK(std::abs(*report.oracle.value - oracle_exact(data, spec, prior)) < 1e-12);
  CHECK(std::abs(*report.draper.value - *report.bic.value - 3.5 * std::log(2 * std::numbers::pi)) < 1e-12);

  const auto row = score_report_csv_row(report);
  CHECK(std::count(row.begin(), row.end(), ',') == 9);
  CHECK(score_report_csv_header() == "laplace,bic,draper,mled,cs,oracle,d,N,g_at_mode,loglik_at_mode");

  ScoreOptions capped = options;
  capped.oracle_cap = 4;
  const auto infeasible = score_at_mode(em.params, data, prior, capped);
  CHECK_FALSE(infeasible.oracle.value.has_value());
  CHECK(infeasible.oracle.reason == "enumeration infeasible");
}

TEST_CASE("measure names round trip") {
  for (Measure m : kAllMeasures) CHECK(parse_measure(measure_name(m)) == m);
  CHECK_THROWS_AS(parse_measure("aic"), ContractError);
}
