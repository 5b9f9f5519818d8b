#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "carbcal/dpmm.hpp"

namespace carbcal {

nlohmann::json to_json(const Hyperparameters& hyper);
// Missing keys keep the values already in `base`; unknown keys throw.
Hyperparameters hyper_from_json(const nlohmann::json& j, Hyperparameters base = {});

nlohmann::json to_json(const ChainConfig& cfg);
ChainConfig chain_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StoredState& state);
StoredState stored_state_from_json(const nlohmann::json& j);

// Directory layout:
//   theta.csv      iteration,<id_1>,...,<id_n>; one row per stored iteration
//   clusters.jsonl one record per stored iteration (labels, phi, tau,
//                  weights or counts, alpha, mu_phi)
//   config.json    chain configuration including the seed
void write_samples(const std::filesystem::path& dir, const PosteriorSamples& samples,
                   std::span<const std::string> ids);

struct LoadedSamples {
  PosteriorSamples samples;
  std::vector<std::string> ids;
};

LoadedSamples read_samples(const std::filesystem::path& dir);

}  // namespace carbcal
