#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latent_score/model.hpp"

namespace latent_score {

// CSV with header x1,...,xn[,hidden] and 0-based integer states.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& data);

// Arities are inferred as max(2, largest state + 1) unless given; the hidden
// arity likewise unless given. Throws ParseError naming the offending line.
Dataset read_dataset(const std::filesystem::path& path,
                     const std::optional<std::vector<int>>& observed_arities = std::nullopt,
                     std::optional<int> hidden_arity = std::nullopt);
Dataset parse_dataset_csv(const std::string& text,
                          const std::optional<std::vector<int>>& observed_arities = std::nullopt,
                          std::optional<int> hidden_arity = std::nullopt);

// Trained-model metadata stored next to the parameters.
struct FitMetadata {
  double final_g = 0.0;
  bool converged = false;
  std::size_t iterations_used = 0;
};

// {spec: {hidden_arity, observed_arities}, root, leaves[var][hidden][k]}
// plus an optional metadata block. Doubles are written with round-trip
// precision.
std::string model_to_json(const ParamSet& params, const std::optional<FitMetadata>& metadata = std::nullopt);
void write_model(const ParamSet& params, const std::filesystem::path& path,
                 const std::optional<FitMetadata>& metadata = std::nullopt);

struct LoadedModel {
  ParamSet params;
  std::optional<FitMetadata> metadata;
};
LoadedModel model_from_json(const std::string& text);
LoadedModel read_model(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace latent_score
