#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latent_score/em.hpp"
#include "latent_score/model.hpp"
#include "latent_score/numerics.hpp"

namespace latent_score {

enum class Measure { Laplace, Bic, Draper, Mled, Cs, Oracle };

inline constexpr Measure kAllMeasures[] = {Measure::Laplace, Measure::Bic, Measure::Draper,
                                           Measure::Mled,    Measure::Cs,  Measure::Oracle};

std::string measure_name(Measure m);
// Throws ContractError for an unknown name.
Measure parse_measure(const std::string& name);

inline constexpr std::uint64_t kDefaultOracleCap = std::uint64_t{1} << 20;

// Closed-form log marginal likelihood of complete data under Dirichlet
// priors. bd_complete insists on integer counts; fractional_bd accepts any
// non-negative statistics.
double bd_complete(const StatSet& stats, const PriorSet& prior);
double fractional_bd(const StatSet& stats, const PriorSet& prior);

// Exact log marginal likelihood of incomplete data by summing the complete
// data score over all c^N hidden completions. Throws InfeasibleError when
// c^N exceeds cap.
double oracle_exact(const Dataset& data, const ModelSpec& spec, const PriorSet& prior,
                    std::uint64_t cap = kDefaultOracleCap);

// Finite-difference step used for free coordinate j: 1e-5 scaled by the
// smaller of the coordinate and its row's dropped component, capped at 1e-5.
std::vector<double> hessian_steps(const FreeCoords& coords, const ModelSpec& spec);

// Negative Hessian of g by central differences of grad_g, before
// symmetrization (row-major d x d). Kept as a cross-check for neg_hessian.
std::vector<double> raw_neg_hessian(const FreeCoords& coords, const Dataset& data, const PriorSet& prior);
// Analytic negative Hessian of g in free coordinates. Throws
// NumericalFailure on non-finite entries.
SymMatrix neg_hessian(const FreeCoords& coords, const Dataset& data, const PriorSet& prior);

// g + (d/2) log 2 pi - (1/2) log|A|. Throws NonPdError when A is not
// positive definite.
double laplace_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior);
double laplace_score(const EmResult& em, const Dataset& data, const PriorSet& prior);

double bic_score(double loglik_at_mode, std::size_t d, std::size_t n_samples);
double draper_score(double loglik_at_mode, std::size_t d, std::size_t n_samples);

// BD score of the expected data at the mode.
double mled_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior);
double mled_score(const EmResult& em, const Dataset& data, const PriorSet& prior);

// sum_ijk E_ijk log theta_ijk.
double expected_complete_loglik(const StatSet& stats, const ParamSet& params);

// MLED - log p(D'|theta) + log p(D|theta), dimension terms cancelled.
double cs_score(const ParamSet& mode, const Dataset& data, const PriorSet& prior);
double cs_score(const EmResult& em, const Dataset& data, const PriorSet& prior);

struct MeasureValue {
  std::optional<double> value;
  std::string reason;  // why value is absent; empty when present or not requested
};

struct ScoreReport {
  MeasureValue laplace, bic, draper, mled, cs, oracle;
  std::size_t d = 0;
  std::size_t n = 0;
  double g_at_mode = 0.0;
  double loglik_at_mode = 0.0;

  const MeasureValue& get(Measure m) const;
  MeasureValue& get(Measure m);
};

struct ScoreOptions {
  std::vector<Measure> measures{Measure::Laplace, Measure::Bic, Measure::Draper, Measure::Mled, Measure::Cs};
  std::uint64_t oracle_cap = kDefaultOracleCap;
};

// Scores one mode all requested ways from a shared E step. A failing
// measure (non-PD Hessian, infeasible oracle) is recorded with its reason
// rather than thrown.
ScoreReport score_at_mode(const ParamSet& mode, const Dataset& data, const PriorSet& prior,
                          const ScoreOptions& options = {});

// Header and row for the one-line CSV form of a report.
std::string score_report_csv_header();
std::string score_report_csv_row(const ScoreReport& report);

}  // namespace latent_score
