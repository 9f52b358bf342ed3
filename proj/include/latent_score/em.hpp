#pragma once

#include <cstddef>
#include <vector>

#include "latent_score/model.hpp"
#include "latent_score/numerics.hpp"

namespace latent_score {

enum class EmMode { Map, Ml };

struct EmConfig {
  EmMode mode = EmMode::Map;
  double rel_tol = 1e-5;
  std::size_t max_iters_after_init = 200;
  std::size_t tournament_start = 64;
  // When false, run all max_iters_after_init iterations and judge
  // convergence by the last relative change only.
  bool stop_early = true;
  // Worker threads for tournament copies; 0 picks hardware concurrency.
  // The survivor does not depend on this value.
  std::size_t threads = 1;

  void validate() const;
};

struct EmResult {
  ParamSet params;
  // Objective at params: g in MAP mode, log likelihood in ML mode.
  double final_g = 0.0;
  bool converged = false;
  std::size_t iterations_used = 0;
  // Objective before the first iteration followed by one entry per iteration.
  std::vector<double> g_trace;
};

// Expected sufficient statistics. Throws ContractError on complete data.
StatSet e_step(const ParamSet& params, const Dataset& data);

// theta_ijk = (E_ijk + alpha_ijk - 1) / (E_ij + alpha_ij - r_i), clamped.
ParamSet m_step_map(const StatSet& stats, const PriorSet& prior);
// theta_ijk = E_ijk / E_ij, clamped. Throws StarvedRowError on an empty row.
ParamSet m_step_ml(const StatSet& stats);

// Objective maximized in the given mode.
double em_objective(EmMode mode, const ParamSet& params, const Dataset& data, const PriorSet& prior);

// Selection record of one tournament stage.
struct TournamentStage {
  std::size_t iterations = 0;
  std::vector<std::size_t> copies;     // copy indices that ran in this stage
  std::vector<double> objective;       // objective of each copy after the stage
  std::vector<std::size_t> survivors;  // copy indices retained
};

// Random restarts halved by objective ranking: with a start of 64 the copy
// counts are 64, 32, ..., 2 and each stage runs 1, 2, ..., 32 EM iterations.
// Copy k starts from generate_model on rng.child(k). Ties go to the lower
// copy index.
ParamSet tournament_init(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, const EmConfig& config,
                         const SeededStream& rng, std::vector<TournamentStage>* log = nullptr);

// E and M steps until the relative change of the objective drops below
// rel_tol or max_iters_after_init iterations have run. Throws
// NumericalFailure on a non-finite objective.
EmResult run_em(const ParamSet& init, const Dataset& data, const PriorSet& prior, const EmConfig& config);

// tournament_init followed by run_em.
EmResult fit(const Dataset& data, const ModelSpec& spec, const PriorSet& prior, const EmConfig& config,
             const SeededStream& rng);

}  // namespace latent_score
