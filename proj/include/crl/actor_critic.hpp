#pragma once

#include <string>
#include <vector>

#include "crl/npg.hpp"
#include "crl/rng.hpp"

namespace crl {

// One client's learning state in the stochastic loop: its logit table, the
// tabular estimate of the lambda-composite value, per-state visit counts
// (initialized to 1, used as the step-size denominator before incrementing,
// so the first visit takes the full TD target), and its current state.
struct ClientLearner {
  SoftThresholdPolicy policy;
  ValueTable J;
  StateTable<int> counts;
  ClientState s;

  ClientLearner() = default;
  explicit ClientLearner(StateSpace sp) : policy(sp), J(sp), counts(sp, 1) {}
};

struct AcStepOutcome {
  ActionClass a = ActionClass::Low;
  double c = 0.0;
  double g = 0.0;
  bool reset = false;
  ClientState next;
};

// One Algorithm-step for one client at the current multiplier: sample the
// action, step the kernel, update J(s) by the count-weighted TD rule, update
// theta(s) from the configured advantage estimate, advance the state.
AcStepOutcome actor_critic_step(ClientLearner& cl, double lambda, const ClientModel& m,
                                const Kernel& k, const TrainConfig& cfg, double gamma, Rng& rng);

struct AcRunState {
  std::vector<ClientLearner> learners;
  DualState dual;
  int t = 0;
  double cost_sum = 0.0;   // sum over steps of sum_n c
  double usage_sum = 0.0;  // sum over steps of (sum_n g - dual budget)
  std::vector<TraceRow> rows;
  std::vector<double> sampled_usage;
  std::string rng_state;  // one stream drives all clients, in client order
};

class ThresholdNpg {
 public:
  ThresholdNpg(std::vector<ClientSpec> clients, TrainConfig cfg);

  void step();
  bool done() const { return state_.t >= cfg_.T; }
  int t() const { return state_.t; }

  TrainTrace finish();

  AcRunState snapshot() const;
  void restore(AcRunState s);
  const TrainConfig& config() const { return cfg_; }
  const ResolvedTrainParams& params() const { return params_; }
  const std::vector<ClientLearner>& learners() const { return state_.learners; }

 private:
  std::vector<ClientSpec> clients_;
  TrainConfig cfg_;
  ResolvedTrainParams params_;
  std::vector<Kernel> kernels_;
  AcRunState state_;
  Rng rng_;
  int trace_every_ = 1;
};

TrainTrace run_threshold_npg(const std::vector<ClientSpec>& clients, const TrainConfig& cfg);

}  // namespace crl
