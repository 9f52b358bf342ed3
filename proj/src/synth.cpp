#include "latent_score/synth.hpp"

#include <algorithm>

namespace latent_score {

ParamSet generate_model(const ModelSpec& spec, SeededStream& rng) {
  ParamSet params(spec);
  for (std::size_t r = 0; r < params.num_rows(); ++r) {
    auto row = params.row(r);
    if (row.size() == 1) {
      row[0] = 1.0;
      continue;
    }
    const std::vector<double> ones(row.size(), 1.0);
    const auto draw = sample_dirichlet(ones, rng);
    std::copy(draw.begin(), draw.end(), row.begin());
  }
  return params;
}

Dataset sample_dataset(const ParamSet& model, std::size_t n_samples, SeededStream& rng) {
  if (n_samples == 0) throw ContractError("sample_dataset: need at least one sample");
  const auto& spec = model.spec();
  const std::size_t n = spec.num_observed();
  std::vector<int> rows(n_samples * n);
  std::vector<int> hidden(n_samples);
  for (std::size_t t = 0; t < n_samples; ++t) {
    const std::size_t h = rng.categorical(model.row(0));
    hidden[t] = static_cast<int>(h);
    for (std::size_t var = 0; var < n; ++var) {
      rows[t * n + var] = static_cast<int>(rng.categorical(model.row(model.leaf_row(var, h))));
    }
  }
  return Dataset(spec.observed_arities, std::move(rows), std::move(hidden), spec.hidden_arity);
}

Dataset strip_hidden(const Dataset& data) {
  if (!data.has_hidden()) throw ContractError("strip_hidden: dataset has no hidden column");
  return Dataset(data.observed_arities(), data.flat_rows());
}

Dataset attach_hidden(const Dataset& data, std::vector<int> hidden, int hidden_arity) {
  if (data.has_hidden()) throw ContractError("attach_hidden: dataset already has a hidden column");
  return Dataset(data.observed_arities(), data.flat_rows(), std::move(hidden), hidden_arity);
}

StatSet sufficient_stats(const Dataset& data) {
  if (!data.has_hidden()) throw ContractError("sufficient_stats: incomplete data, use the E step");
  StatSet stats(ModelSpec{data.observed_arities(), data.hidden_arity()});
  const auto& hidden = data.hidden();
  for (std::size_t t = 0; t < data.num_samples(); ++t) {
    const auto h = static_cast<std::size_t>(hidden[t]);
    stats.root(h) += 1.0;
    const auto rec = data.record(t);
    for (std::size_t var = 0; var < rec.size(); ++var) {
      stats.leaf(var, h, static_cast<std::size_t>(rec[var])) += 1.0;
    }
  }
  return stats;
}

}  // namespace latent_score
