#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crl/dp.hpp"
#include "crl/model.hpp"
#include "crl/policies.hpp"
#include "crl/rng.hpp"
#include "crl/soft_threshold.hpp"

namespace crl {

enum class ConstraintMode { Soft, Hard };

struct EnvConfig {
  std::vector<ClientModel> clients;
  std::vector<std::vector<double>> rho;  // one start distribution per client
  int K = 0;
  ConstraintMode mode = ConstraintMode::Soft;
  int horizon = 200;
  std::uint64_t seed = 0;
  // When >= 0, every client's Low service rate is replaced by this equal-share
  // rate. Meant for vanilla runs that model one merged service class.
  double mu_share = -1.0;
};

std::vector<std::string> validate_env(const EnvConfig& cfg);

struct ConstraintViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StepOutcome {
  std::vector<ClientState> next;
  std::vector<double> c;
  std::vector<double> g;
  std::vector<bool> resets;
  int epoch = 0;
};

// All clients advance independently through the single-client kernel; the
// environment only couples them through the hard budget check.
class Env {
 public:
  explicit Env(EnvConfig cfg);

  std::vector<ClientState> reset(int episode);
  StepOutcome step(const Assignment& assignment);

  const std::vector<ClientState>& states() const { return s_; }
  const std::vector<ClientModel>& models() const { return models_; }
  const EnvConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }

 private:
  EnvConfig cfg_;
  std::vector<ClientModel> models_;  // mu_share folded in
  std::vector<ClientState> s_;
  std::vector<Rng> rngs_;
  int epoch_ = 0;
};

struct StepRecord {
  int t = 0;
  int client = 0;
  int x = 0;  // state the action was taken in
  int y = 0;
  ActionClass action = ActionClass::Low;
  double c = 0.0;
  double g = 0.0;
  bool reset = false;
};

struct EpisodeTrace {
  int clients = 0;
  std::vector<StepRecord> rows;  // horizon * clients, client-major within each epoch
};

struct QoeParams {
  double drop = 0.25;     // per stalled step
  double recover = 0.1;   // per smooth step, divided by (1 + stall count)
};

// Per-client score starts at 5, loses `drop` on each stalled step (buffer
// empty), regains recover/(1+y) otherwise, clamped to [1,5]; the episode value
// is the final score averaged over clients.
double qoe_proxy(const EpisodeTrace& trace, const QoeParams& params = {});

struct Metrics {
  std::vector<double> discounted_cost;   // per client
  std::vector<double> discounted_usage;  // per client
  int stall_steps = 0;                   // stalled client-steps
  double mean_buffer = 0.0;
  double qoe = 0.0;

  double total_cost() const;
  double total_usage() const;
};

// Recomputes every metric from the raw rows; the environment's running
// accumulation must agree with this exactly.
Metrics episode_metrics(const EpisodeTrace& trace, const std::vector<ClientModel>& models,
                        const QoeParams& params = {});

enum class PolicyKind { Vanilla, GreedyBuffer, HardThreshold, Index, SoftThreshold };

// Value-semantic description of the decision rule under evaluation.
struct PolicyBundle {
  PolicyKind kind = PolicyKind::Vanilla;
  std::vector<ThresholdFunction> thresholds;  // HardThreshold
  std::vector<SoftThresholdPolicy> soft;      // Index, SoftThreshold
  IndexScore index_score = IndexScore::Logit;
  std::vector<ValueTable> values;  // Index with value ranking
};

// One epoch's joint decision. Hard mode trims the hard-threshold rule to its
// K most urgent takers (deepest below the cutoff); SoftThreshold samples and
// is therefore soft-mode only.
Assignment decide(const PolicyBundle& policy, const std::vector<ClientState>& states, int K,
                  ConstraintMode mode, std::vector<Rng>& policy_rngs);

struct EpisodeResult {
  EpisodeTrace trace;
  Metrics metrics;
};

EpisodeResult run_episode(Env& env, const PolicyBundle& policy, int episode,
                          const QoeParams& qoe = {});

struct MetricsSummary {
  int episodes = 0;
  double cost_mean = 0.0, cost_se = 0.0;
  double usage_mean = 0.0, usage_se = 0.0;
  double stalls_mean = 0.0, stalls_se = 0.0;
  double buffer_mean = 0.0, buffer_se = 0.0;
  double qoe_mean = 0.0, qoe_se = 0.0;
  std::vector<Metrics> per_episode;
};

MetricsSummary evaluate_policy_in_env(const PolicyBundle& policy, const EnvConfig& cfg,
                                      int episodes);

}  // namespace crl
