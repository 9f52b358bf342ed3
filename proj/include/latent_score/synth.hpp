#pragma once

#include <cstddef>
#include <vector>

#include "latent_score/model.hpp"
#include "latent_score/numerics.hpp"

namespace latent_score {

// Every simplex row drawn independently from Dirichlet(1, ..., 1).
ParamSet generate_model(const ModelSpec& spec, SeededStream& rng);

// Ancestral sampling: draw C from the root, then each leaf given C. The
// result keeps the hidden column.
Dataset sample_dataset(const ParamSet& model, std::size_t n_samples, SeededStream& rng);

// Drops the hidden column. Throws ContractError if it is already absent.
Dataset strip_hidden(const Dataset& data);
Dataset attach_hidden(const Dataset& data, std::vector<int> hidden, int hidden_arity);

// Integer counts from complete data. Throws ContractError on incomplete data.
StatSet sufficient_stats(const Dataset& data);

}  // namespace latent_score
