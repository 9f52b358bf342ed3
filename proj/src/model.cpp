#include "latent_score/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "latent_score/numerics.hpp"

namespace latent_score {

namespace {

constexpr double kClampLow = 1e-12;
constexpr double kClampHigh = 1.0 - 1e-12;

struct LogTables {
  std::vector<double> log_root;
  std::vector<std::vector<double>> log_leaf;  // indexed by var * c + hidden
};

LogTables log_tables(const ParamSet& params) {
  LogTables t;
  const auto root = params.row(0);
  t.log_root.resize(root.size());
  for (std::size_t k = 0; k < root.size(); ++k) t.log_root[k] = std::log(root[k]);
  t.log_leaf.resize(params.num_rows() - 1);
  for (std::size_t r = 1; r < params.num_rows(); ++r) {
    const auto row = params.row(r);
    auto& out = t.log_leaf[r - 1];
    out.resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) out[k] = std::log(row[k]);
  }
  return t;
}

// Joint log score log p(C = h, x_t) for every h.
void component_scores(const ParamSet& params, const LogTables& logs, std::span<const int> record,
                      std::vector<double>& out) {
  const std::size_t c = static_cast<std::size_t>(params.spec().hidden_arity);
  out.assign(logs.log_root.begin(), logs.log_root.end());
  for (std::size_t var = 0; var < record.size(); ++var) {
    const auto k = static_cast<std::size_t>(record[var]);
    const std::size_t base = var * c;
    for (std::size_t h = 0; h < c; ++h) out[h] += logs.log_leaf[base + h][k];
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (observed_arities.empty()) throw ContractError("model needs at least one observed variable");
  if (hidden_arity < 1) throw ContractError("hidden arity must be at least 1");
  for (int r : observed_arities) {
    if (r < 2) throw ContractError("observed arities must be at least 2");
  }
}

ModelSpec binary_spec(std::size_t n_observed, int hidden_arity) {
  ModelSpec spec{std::vector<int>(n_observed, 2), hidden_arity};
  spec.validate();
  return spec;
}

std::size_t dimension(const ModelSpec& spec) {
  const auto c = static_cast<std::size_t>(spec.hidden_arity);
  std::size_t d = c - 1;
  for (int r : spec.observed_arities) d += c * static_cast<std::size_t>(r - 1);
  return d;
}

RowTable::RowTable(ModelSpec spec, double fill) : spec_(std::move(spec)) {
  spec_.validate();
  const auto c = static_cast<std::size_t>(spec_.hidden_arity);
  offsets_.reserve(1 + c * spec_.num_observed() + 1);
  offsets_.push_back(0);
  offsets_.push_back(c);
  for (int r : spec_.observed_arities) {
    for (std::size_t h = 0; h < c; ++h) offsets_.push_back(offsets_.back() + static_cast<std::size_t>(r));
  }
  values_.assign(offsets_.back(), fill);
}

double RowTable::row_total(std::size_t r) const {
  const auto v = row(r);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

PriorSet PriorSet::uniform(const ModelSpec& spec, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("Dirichlet hyperparameters must be positive");
  return PriorSet(spec, alpha);
}

void validate_params(const ParamSet& params) {
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto row = params.row(r);
    double sum = 0.0;
    for (double v : row) {
      if (!(v > 0.0 && v <= 1.0)) throw ContractError("parameter outside (0, 1] in row " + std::to_string(r));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("parameter row " + std::to_string(r) + " does not sum to 1");
  }
}

void require_interior(const ParamSet& params) {
  for (double v : params.values()) {
    if (!(v > 0.0)) throw DomainError("parameters must be strictly positive");
  }
}

void clamp_and_normalize(ParamSet& params) {
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    auto row = params.row(r);
    double sum = 0.0;
    for (double& v : row) {
      v = std::clamp(v, kClampLow, kClampHigh);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

ParamSet permute_hidden(const ParamSet& params, std::span<const std::size_t> perm) {
  const auto c = static_cast<std::size_t>(params.spec().hidden_arity);
  if (perm.size() != c) throw ContractError("permutation length must equal hidden arity");
  ParamSet out(params.spec());
  for (std::size_t h = 0; h < c; ++h) {
    out.root(h) = params.root(perm[h]);
    for (std::size_t var = 0; var < params.spec().num_observed(); ++var) {
      const auto src = params.row(params.leaf_row(var, perm[h]));
      std::copy(src.begin(), src.end(), out.row(out.leaf_row(var, h)).begin());
    }
  }
  return out;
}

Dataset::Dataset(std::vector<int> observed_arities, std::vector<int> rows,
                 std::optional<std::vector<int>> hidden, int hidden_arity)
    : arities_(std::move(observed_arities)), rows_(std::move(rows)), hidden_(std::move(hidden)) {
  if (arities_.empty()) throw ContractError("dataset needs at least one observed variable");
  for (int r : arities_) {
    if (r < 2) throw ContractError("observed arities must be at least 2");
  }
  if (rows_.size() % arities_.size() != 0) throw ContractError("row data is not a whole number of records");
  num_samples_ = rows_.size() / arities_.size();
  if (num_samples_ == 0) throw ContractError("dataset must contain at least one record");
  for (std::size_t t = 0; t < num_samples_; ++t) {
    for (std::size_t i = 0; i < arities_.size(); ++i) {
      const int v = rows_[t * arities_.size() + i];
      if (v < 0 || v >= arities_[i]) {
        throw ContractError("record " + std::to_string(t) + " variable " + std::to_string(i) + " out of range");
      }
    }
  }
  if (hidden_) {
    if (hidden_->size() != num_samples_) throw ContractError("hidden column length must equal record count");
    if (hidden_arity < 1) throw ContractError("hidden arity required with a hidden column");
    for (int h : *hidden_) {
      if (h < 0 || h >= hidden_arity) throw ContractError("hidden state out of range");
    }
    hidden_arity_ = hidden_arity;
  }
}

const std::vector<int>& Dataset::hidden() const {
  if (!hidden_) throw ContractError("dataset has no hidden column");
  return *hidden_;
}

FreeCoords to_free(const ParamSet& params) {
  FreeCoords coords;
  coords.values.reserve(dimension(params.spec()));
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto row = params.row(r);
    coords.values.insert(coords.values.end(), row.begin(), row.end() - 1);
  }
  return coords;
}

ParamSet from_free(const FreeCoords& coords, const ModelSpec& spec) {
  if (coords.values.size() != dimension(spec)) throw ContractError("free coordinate count does not match model dimension");
  ParamSet params(spec);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    auto row = params.row(r);
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < row.size(); ++k) {
      const double v = coords.values[pos++];
      if (!(v > 0.0)) throw DomainError("free coordinate on or beyond the simplex boundary");
      row[k] = v;
      sum += v;
    }
    const double last = 1.0 - sum;
    if (!(last > 0.0)) throw DomainError("free coordinates leave no mass for the dropped component");
    row[row.size() - 1] = last;
  }
  return params;
}

void check_compatible(const ModelSpec& spec, const Dataset& data) {
  if (spec.observed_arities != data.observed_arities()) {
    throw ContractError("dataset observed arities do not match the model");
  }
}

void check_compatible(const ModelSpec& spec, const RowTable& table) {
  if (!(spec == table.spec())) throw ContractError("table shape does not match the model");
}

double log_likelihood(const ParamSet& params, const Dataset& data) {
  check_compatible(params.spec(), data);
  const auto logs = log_tables(params);
  const auto c = static_cast<std::size_t>(params.spec().hidden_arity);
  double total = 0.0;
  if (data.has_hidden()) {
    const auto& hidden = data.hidden();
    for (std::size_t t = 0; t < data.num_samples(); ++t) {
      const auto h = static_cast<std::size_t>(hidden[t]);
      if (h >= c) throw ContractError("hidden state exceeds model hidden arity");
      double s = logs.log_root[h];
      const auto rec = data.record(t);
      for (std::size_t var = 0; var < rec.size(); ++var) {
        s += logs.log_leaf[var * c + h][static_cast<std::size_t>(rec[var])];
      }
      total += s;
    }
    return total;
  }
  std::vector<double> scores;
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    component_scores(params, logs, data.record(t), scores);
    total += log_sum_exp(scores);
  }
  return total;
}

double log_prior(const ParamSet& params, const PriorSet& prior) {
  check_compatible(params.spec(), prior);
  double total = 0.0;
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto theta = params.row(r);
    const auto alpha = prior.row(r);
    double alpha_total = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (!(theta[k] > 0.0)) throw DomainError("log_prior: parameter must be positive");
      alpha_total += alpha[k];
      total += (alpha[k] - 1.0) * std::log(theta[k]) - log_gamma(alpha[k]);
    }
    total += log_gamma(alpha_total);
  }
  return total;
}

double log_posterior_g(const ParamSet& params, const Dataset& data, const PriorSet& prior) {
  return log_likelihood(params, data) + log_prior(params, prior);
}

std::vector<double> posterior_over_hidden(const ParamSet& params, std::span<const int> record) {
  if (record.size() != params.spec().num_observed()) throw ContractError("record length does not match the model");
  const auto logs = log_tables(params);
  std::vector<double> scores;
  component_scores(params, logs, record, scores);
  const double norm = log_sum_exp(scores);
  for (double& s : scores) s = std::exp(s - norm);
  return scores;
}

ExpectedStats expected_stats(const ParamSet& params, const Dataset& data) {
  check_compatible(params.spec(), data);
  const auto logs = log_tables(params);
  const auto c = static_cast<std::size_t>(params.spec().hidden_arity);
  ExpectedStats out{StatSet(params.spec()), 0.0};
  if (data.has_hidden()) {
    // Observed hidden column: the posterior is an indicator.
    out.log_likelihood = log_likelihood(params, data);
    const auto& hidden = data.hidden();
    for (std::size_t t = 0; t < data.num_samples(); ++t) {
      const auto h = static_cast<std::size_t>(hidden[t]);
      const auto rec = data.record(t);
      out.stats.root(h) += 1.0;
      for (std::size_t var = 0; var < rec.size(); ++var) out.stats.leaf(var, h, static_cast<std::size_t>(rec[var])) += 1.0;
    }
    return out;
  }
  std::vector<double> scores;
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    const auto rec = data.record(t);
    component_scores(params, logs, rec, scores);
    const double norm = log_sum_exp(scores);
    out.log_likelihood += norm;
    for (std::size_t h = 0; h < c; ++h) {
      const double w = std::exp(scores[h] - norm);
      out.stats.root(h) += w;
      for (std::size_t var = 0; var < rec.size(); ++var) {
        out.stats.leaf(var, h, static_cast<std::size_t>(rec[var])) += w;
      }
    }
  }
  return out;
}

std::vector<double> grad_g(const FreeCoords& coords, const Dataset& data, const PriorSet& prior) {
  const ParamSet params = from_free(coords, prior.spec());
  const auto es = expected_stats(params, data);
  // d g / d theta_k in full coordinates is (E_k + alpha_k - 1) / theta_k;
  // a free coordinate moves theta_k up and the dropped theta_r down.
  std::vector<double> grad;
  grad.reserve(coords.values.size());
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    const auto theta = params.row(r);
    const auto alpha = prior.row(r);
    const auto stats = es.stats.row(r);
    const std::size_t last = theta.size() - 1;
    const double tail = (stats[last] + alpha[last] - 1.0) / theta[last];
    for (std::size_t k = 0; k < last; ++k) {
      grad.push_back((stats[k] + alpha[k] - 1.0) / theta[k] - tail);
    }
  }
  return grad;
}

}  // namespace latent_score
