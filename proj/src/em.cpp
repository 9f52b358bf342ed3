#include "latent_score/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "latent_score/parallel.hpp"
#include "latent_score/synth.hpp"

namespace latent_score {

void EmConfig::validate() const {
  if (!(rel_tol > 0.0)) throw ContractError("rel_tol must be positive");
  if (max_iters_after_init < 1) throw ContractError("max_iters_after_init must be at least 1");
  if (tournament_start < 2 || (tournament_start & (tournament_start - 1)) != 0) {
    throw ContractError("tournament_start must be a power of two, at least 2");
  }
}

StatSet e_step(const ParamSet& params, const Dataset& data) {
  if (data.has_hidden()) throw ContractError("e_step: dataset is complete, use sufficient_stats");
  return expected_stats(params, data).stats;
}

ParamSet m_step_map(const StatSet& stats, const PriorSet& prior) {
  check_compatible(stats.spec(), prior);
  ParamSet params(stats.spec());
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto n = stats.row(r);
    const auto alpha = prior.row(r);
    auto theta = params.row(r);
    double denom = 0.0;
    for (std::size_t k = 0; k < n.size(); ++k) denom += n[k] + alpha[k] - 1.0;
    if (!(denom > 0.0)) throw DegeneratePriorError("MAP M step: non-positive denominator in row " + std::to_string(r));
    for (std::size_t k = 0; k < n.size(); ++k) theta[k] = (n[k] + alpha[k] - 1.0) / denom;
  }
  clamp_and_normalize(params);
  return params;
}

ParamSet m_step_ml(const StatSet& stats) {
  ParamSet params(stats.spec());
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto n = stats.row(r);
    auto theta = params.row(r);
    const double total = std::accumulate(n.begin(), n.end(), 0.0);
    if (!(total > 0.0)) throw StarvedRowError("ML M step: row " + std::to_string(r) + " has no expected count", r);
    for (std::size_t k = 0; k < n.size(); ++k) theta[k] = n[k] / total;
  }
  clamp_and_normalize(params);
  return params;
}

namespace {

ParamSet m_step(EmMode mode, const StatSet& stats, const PriorSet& prior) {
  return mode == EmMode::Map ? m_step_map(stats, prior) : m_step_ml(stats);
}

double objective_from(EmMode mode, double loglik, const ParamSet& params, const PriorSet& prior) {
  return mode == EmMode::Map ? loglik + log_prior(params, prior) : loglik;
}

ParamSet iterate(EmMode mode, ParamSet params, const Dataset& data, const PriorSet& prior, std::size_t iterations) {
  for (std::size_t i = 0; i < iterations; ++i) {
    params = m_step(mode, expected_stats(params, data).stats, prior);
  }
  return params;
}

}  // namespace

double em_objective(EmMode mode, const ParamSet& params, const Dataset& data, const PriorSet& prior) {
  return objective_from(mode, log_likelihood(params, data), params, prior);
}

ParamSet tournament_init(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, const EmConfig& config,
                         const SeededStream& rng, std::vector<TournamentStage>* log) {
  config.validate();
  check_compatible(spec, data);
  check_compatible(spec, prior);
  if (data.has_hidden()) throw ContractError("tournament_init: dataset is complete");

  const std::size_t start = config.tournament_start;
  std::vector<std::optional<ParamSet>> copies(start);
  for (std::size_t k = 0; k < start; ++k) {
    auto stream = rng.child(k);
    copies[k] = generate_model(spec, stream);
  }

  std::vector<std::size_t> alive(start);
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  std::vector<double> objective(start, 0.0);
  std::size_t iterations = 1;
  while (alive.size() > 1) {
    parallel_for(alive.size(), config.threads, [&](std::size_t slot) {
      const std::size_t k = alive[slot];
      copies[k] = iterate(config.mode, std::move(*copies[k]), data, prior, iterations);
      objective[k] = em_objective(config.mode, *copies[k], data, prior);
    });

    std::vector<std::size_t> ranked = alive;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      const double ga = std::isnan(objective[a]) ? -INFINITY : objective[a];
      const double gb = std::isnan(objective[b]) ? -INFINITY : objective[b];
      return ga > gb;
    });
    std::vector<std::size_t> survivors(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(alive.size() / 2));
    std::sort(survivors.begin(), survivors.end());
    if (log) {
      TournamentStage stage;
      stage.iterations = iterations;
      stage.copies = alive;
      for (std::size_t k : alive) stage.objective.push_back(objective[k]);
      stage.survivors = survivors;
      log->push_back(std::move(stage));
    }
    for (std::size_t k : alive) {
      if (!std::binary_search(survivors.begin(), survivors.end(), k)) copies[k].reset();
    }
    alive = std::move(survivors);
    iterations *= 2;
  }
  return std::move(*copies[alive.front()]);
}

EmResult run_em(const ParamSet& init, const Dataset& data, const PriorSet& prior, const EmConfig& config) {
  config.validate();
  check_compatible(init.spec(), prior);
  if (data.has_hidden()) throw ContractError("run_em: dataset is complete");
  require_interior(init);

  EmResult result{init, 0.0, false, 0, {}};
  auto es = expected_stats(result.params, data);
  double previous = objective_from(config.mode, es.log_likelihood, result.params, prior);
  if (!std::isfinite(previous)) throw NumericalFailure("non-finite objective at the initial parameters", 0);
  result.g_trace.push_back(previous);

  for (std::size_t it = 1; it <= config.max_iters_after_init; ++it) {
    result.params = m_step(config.mode, es.stats, prior);
    es = expected_stats(result.params, data);
    const double current = objective_from(config.mode, es.log_likelihood, result.params, prior);
    if (!std::isfinite(current)) {
      throw NumericalFailure("non-finite objective at EM iteration " + std::to_string(it), it);
    }
    result.g_trace.push_back(current);
    result.iterations_used = it;
    const double change = std::abs(current - previous);
    const double scale = previous == 0.0 ? 1.0 : std::abs(previous);
    previous = current;
    result.converged = change / scale < config.rel_tol;
    if (result.converged && config.stop_early) break;
  }
  result.final_g = previous;
  return result;
}

EmResult fit(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, const EmConfig& config,
             const SeededStream& rng) {
  return run_em(tournament_init(data, spec, prior, config, rng), data, prior, config);
}

}  // namespace latent_score
