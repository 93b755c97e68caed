#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crl/actor_critic.hpp"
#include "crl/npg.hpp"

namespace crl {

// Versioned, self-describing snapshot of a training run. Doubles survive the
// JSON round trip bit-for-bit (shortest round-trip formatting), the RNG as its
// textual engine state, so resumption continues the identical trajectory.
struct Checkpoint {
  int version = 1;
  std::string kind;  // "exact" or "ac"
  std::uint64_t config_hash = 0;
  ExactRunState exact;
  AcRunState ac;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// The per-client logit tables, whichever loop produced them.
std::vector<SoftThresholdPolicy> checkpoint_policies(const Checkpoint& ck);
std::vector<ValueTable> checkpoint_values(const Checkpoint& ck);

}  // namespace crl
