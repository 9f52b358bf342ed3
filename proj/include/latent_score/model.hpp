#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "latent_score/errors.hpp"

namespace latent_score {

// Naive-Bayes structure: a hidden root with `hidden_arity` states and one
// observed discrete leaf per entry of `observed_arities`.
struct ModelSpec {
  std::vector<int> observed_arities;
  int hidden_arity = 1;

  std::size_t num_observed() const noexcept { return observed_arities.size(); }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelSpec binary_spec(std::size_t n_observed, int hidden_arity);

// Number of free parameters, (c - 1) + sum_i c (r_i - 1).
std::size_t dimension(const ModelSpec& spec);

// Storage shared by parameters, priors and statistics: one row for the root
// (length c) followed by c rows per observed variable (length r_i). Row
// index of leaf (var, hidden) is 1 + var * c + hidden.
class RowTable {
 public:
  explicit RowTable(ModelSpec spec, double fill = 0.0);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t num_rows() const noexcept { return offsets_.size() - 1; }
  std::size_t row_size(std::size_t row) const { return offsets_[row + 1] - offsets_[row]; }
  std::size_t leaf_row(std::size_t var, std::size_t hidden) const {
    return 1 + var * static_cast<std::size_t>(spec_.hidden_arity) + hidden;
  }

  std::span<double> row(std::size_t r) { return {values_.data() + offsets_[r], row_size(r)}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + offsets_[r], row_size(r)}; }

  double& root(std::size_t k) { return values_[k]; }
  double root(std::size_t k) const { return values_[k]; }
  double& leaf(std::size_t var, std::size_t hidden, std::size_t k) {
    return values_[offsets_[leaf_row(var, hidden)] + k];
  }
  double leaf(std::size_t var, std::size_t hidden, std::size_t k) const {
    return values_[offsets_[leaf_row(var, hidden)] + k];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double row_total(std::size_t r) const;

 private:
  ModelSpec spec_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

// Conditional probability tables; every row a simplex.
class ParamSet : public RowTable {
 public:
  using RowTable::RowTable;
};

// Dirichlet hyperparameters, one per parameter.
class PriorSet : public RowTable {
 public:
  using RowTable::RowTable;
  static PriorSet uniform(const ModelSpec& spec, double alpha);
};

// Counts N_ijk or expected counts E(N_ijk).
class StatSet : public RowTable {
 public:
  using RowTable::RowTable;
};

// Throws ContractError unless rows sum to 1 within 1e-9 and entries lie in
// (0, 1]. The upper bound admits the single-entry root row of c = 1.
void validate_params(const ParamSet& params);
// Throws DomainError if any entry is not strictly positive.
void require_interior(const ParamSet& params);

// Clamps every entry to [1e-12, 1 - 1e-12] and renormalizes each row.
void clamp_and_normalize(ParamSet& params);

// Relabels hidden states: state h of the result is state perm[h] of params.
ParamSet permute_hidden(const ParamSet& params, std::span<const std::size_t> perm);

// Observed records (0-based state indices) and an optional hidden column.
class Dataset {
 public:
  // rows is row-major N x n. hidden_arity is required when hidden is present.
  Dataset(std::vector<int> observed_arities, std::vector<int> rows,
          std::optional<std::vector<int>> hidden = std::nullopt, int hidden_arity = 0);

  std::size_t num_samples() const noexcept { return num_samples_; }
  std::size_t num_observed() const noexcept { return arities_.size(); }
  const std::vector<int>& observed_arities() const noexcept { return arities_; }
  std::span<const int> record(std::size_t t) const { return {rows_.data() + t * arities_.size(), arities_.size()}; }
  int value(std::size_t t, std::size_t var) const { return rows_[t * arities_.size() + var]; }
  const std::vector<int>& flat_rows() const noexcept { return rows_; }

  bool has_hidden() const noexcept { return hidden_.has_value(); }
  const std::vector<int>& hidden() const;
  int hidden_arity() const noexcept { return hidden_arity_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<int> arities_;
  std::vector<int> rows_;
  std::optional<std::vector<int>> hidden_;
  int hidden_arity_ = 0;
  std::size_t num_samples_ = 0;
};

// Free coordinates: each simplex row minus its last component, rows in
// RowTable order.
struct FreeCoords {
  std::vector<double> values;
};

FreeCoords to_free(const ParamSet& params);
// Throws DomainError if an implied row leaves the open simplex.
ParamSet from_free(const FreeCoords& coords, const ModelSpec& spec);

double log_likelihood(const ParamSet& params, const Dataset& data);
double log_prior(const ParamSet& params, const PriorSet& prior);
double log_posterior_g(const ParamSet& params, const Dataset& data, const PriorSet& prior);

std::vector<double> posterior_over_hidden(const ParamSet& params, std::span<const int> record);

// Posterior-weighted counts together with the log likelihood, both from one
// pass over the data. With a hidden column present the counts are exact.
struct ExpectedStats {
  StatSet stats;
  double log_likelihood;
};
ExpectedStats expected_stats(const ParamSet& params, const Dataset& data);

// Analytic gradient of log_posterior_g with respect to FreeCoords.
std::vector<double> grad_g(const FreeCoords& coords, const Dataset& data, const PriorSet& prior);

// Throws ContractError if params, prior and data disagree on shape.
void check_compatible(const ModelSpec& spec, const Dataset& data);
void check_compatible(const ModelSpec& spec, const RowTable& table);

}  // namespace latent_score
