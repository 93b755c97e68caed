#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crl/dp.hpp"
#include "crl/env.hpp"
#include "crl/npg.hpp"

namespace crl {

struct SolveConfig {
  double tol = 1e-9;
  int lambda_grid = 21;    // points across [0, lambda_max]
  double lambda_max = 0.0; // 0: derive 2N/((1-gamma)*xi) from the train section
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvConfig env;
  TrainConfig train;
  SolveConfig solve;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string checkpoint;             // optional trained-artifact path
  std::vector<std::string> reports;   // verification checks to run; empty = all

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Reads a config file and applies the two environment overrides
// (THRESHOLD_CRL_OUT, THRESHOLD_CRL_SEED). The builtin names tiny, tiny2 and
// reference resolve without a file.
ExperimentConfig load_config(const std::string& path_or_name);

// FNV-1a over the canonical serialized form; guards checkpoint resumption.
std::uint64_t config_hash(const ExperimentConfig& cfg);

ExperimentConfig tiny_config();       // 1 client, uniform start
ExperimentConfig tiny_pair_config();  // 2 tiny clients, K_bar = 0.5/(1-gamma)
ExperimentConfig reference_config();  // 6 streaming clients, K = 2

// The per-client solve view: model plus start distribution.
std::vector<ClientSpec> client_specs(const ExperimentConfig& cfg);

double derived_lambda_max(const ExperimentConfig& cfg);

}  // namespace crl
