#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_score/em.hpp"
#include "latent_score/scoring.hpp"

namespace latent_score {

struct ExperimentConfig {
  std::size_t n_observed = 8;
  int c_true = 4;
  std::size_t n_samples = 400;
  int test_c_min = 2;
  int test_c_max = 8;
  std::size_t replicates = 5;
  double epsilon = 0.01;
  std::uint64_t master_seed = 1;
  std::vector<Measure> measures{Measure::Laplace, Measure::Bic, Measure::Draper, Measure::Mled, Measure::Cs};
  std::string output_dir = "runs/sweep";
  double em_rel_tol = 1e-5;
  std::size_t em_max_iters = 200;
  // Stop EM at the first small relative change instead of running all
  // em_max_iters iterations.
  bool em_stop_early = false;
  std::size_t tournament_start = 64;
  std::uint64_t oracle_cap = kDefaultOracleCap;
  // Not part of the resolved config: results do not depend on it.
  std::size_t threads = 1;

  // Throws ContractError on an invalid configuration. Also puts measures in
  // canonical order without duplicates.
  void validate();
  EmConfig em_config() const;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
// Keys absent from the document keep the values already in `base`.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});

struct CellResult {
  std::size_t replicate = 0;
  int test_c = 0;
  bool valid = true;
  std::string reason;  // set when the whole cell failed (EM error)
  ScoreReport scores;
  double final_g = 0.0;
  bool converged = false;
  std::size_t iterations_used = 0;
};

struct Selection {
  std::size_t replicate = 0;
  Measure measure = Measure::Laplace;
  std::optional<int> selected_c;
  std::optional<int> delta_c;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;  // replicate-major, then ascending test_c
  std::vector<Selection> selections;
};

// Largest score wins; ties go to the smallest test_c. Throws SelectionError
// on an empty curve.
int select_model(const std::map<int, double>& curve);

// selected_c(measure) - selected_c(laplace); laplace maps to 0. Throws
// ContractError when laplace is missing.
std::map<Measure, int> delta_c(const std::map<Measure, int>& selections);

// Per-replicate selection and delta_c computed from the cell scores.
std::vector<Selection> compute_selections(const ExperimentConfig& config, const std::vector<CellResult>& cells);

// Curve of one measure for one replicate over the valid cells.
std::map<int, double> curve_for(const std::vector<CellResult>& cells, std::size_t replicate, Measure measure);

SweepResult run_sweep(ExperimentConfig config);

struct DeltaSummary {
  Measure measure = Measure::Laplace;
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // sample standard deviation, needs count >= 2
};
std::vector<DeltaSummary> summarize(const SweepResult& result);

// Creates the directory and verifies it accepts files. Throws IoError.
void prepare_output_dir(const std::filesystem::path& dir);

std::string curves_csv(const SweepResult& result);
std::string selection_csv(const SweepResult& result);
std::string summary_csv(const SweepResult& result);
std::string run_json(const SweepResult& result);

nlohmann::json sweep_to_json(const SweepResult& result);
SweepResult sweep_from_json(const nlohmann::json& doc);

// Writes curves.csv, selection.csv, summary.csv, run.json and result.json.
void emit_reports(const SweepResult& result, const std::filesystem::path& dir);

// Thread count from LATENT_SCORE_THREADS (0 or unset means auto).
std::size_t threads_from_env();

}  // namespace latent_score
