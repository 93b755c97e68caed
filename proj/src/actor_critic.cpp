#include "crl/actor_critic.hpp"

#include <algorithm>
#include <cmath>

namespace crl {

namespace {

// Composite one-step lookahead under the current value estimate:
// A(s,a) = lambda*g(a) + sum_s' p(s'|s,a)[c(s,s') + gamma*J(s')] - J(s).
double model_advantage(const Kernel& k, const ValueTable& J, ClientState s, ActionClass a,
                       double lambda, double gamma) {
  double q = lambda * constraint_cost(a);
  for (const TransitionEntry& e : k.at(s, a)) q += e.prob * (e.cost + gamma * J.at(e.next));
  return q - J.at(s);
}

}  // namespace

AcStepOutcome actor_critic_step(ClientLearner& cl, double lambda, const ClientModel& m,
                                const Kernel& k, const TrainConfig& cfg, double gamma, Rng& rng) {
  const ClientState s = cl.s;
  const ActionClass a =
      rng.bernoulli(cl.policy.p_high(s)) ? ActionClass::High : ActionClass::Low;
  const TransitionEntry e = sample_transition(m, s, a, rng);

  AcStepOutcome out;
  out.a = a;
  out.c = e.cost;
  out.g = constraint_cost(a);
  out.reset = e.is_reset;
  out.next = e.next;

  const double td_target = e.cost + lambda * out.g + gamma * cl.J.at(e.next);
  const double td_error = td_target - cl.J.at(s);

  // Count is the step-size denominator first, then incremented; a first visit
  // (count 1) takes the full TD target.
  cl.J.at(s) += td_error / cl.counts.at(s);
  cl.counts.at(s) += 1;

  double adv_high = 0.0;
  double adv_low = 0.0;
  if (cfg.advantage_mode == AdvantageMode::ModelBased) {
    adv_high = model_advantage(k, cl.J, s, ActionClass::High, lambda, gamma);
    adv_low = model_advantage(k, cl.J, s, ActionClass::Low, lambda, gamma);
  } else {
    (a == ActionClass::High ? adv_high : adv_low) = td_error;
  }

  const double scale = cfg.eta1 / (1.0 - gamma);
  const double update =
      cfg.update_mode == UpdateMode::Difference ? adv_high - adv_low : adv_high;
  cl.policy.theta.at(s) = clamp_theta(cl.policy.theta.at(s) - scale * update);

  cl.s = e.next;
  return out;
}

ThresholdNpg::ThresholdNpg(std::vector<ClientSpec> clients, TrainConfig cfg)
    : clients_(std::move(clients)), cfg_(cfg), params_(resolve_train_params(clients_, cfg_)) {
  kernels_.reserve(clients_.size());
  for (const ClientSpec& cl : clients_) kernels_.push_back(build_kernel(cl.model));

  state_.learners.reserve(clients_.size());
  for (size_t n = 0; n < clients_.size(); ++n) {
    ClientLearner cl(clients_[n].model.space());
    Rng init = Rng::substream(cfg_.seed, {stream::kTrainInit, n});
    double u = init.uniform01();
    double acc = 0.0;
    int idx = cl.J.size() - 1;
    for (int i = 0; i < cl.J.size(); ++i) {
      acc += clients_[n].rho[i];
      if (u < acc) {
        idx = i;
        break;
      }
    }
    cl.s = cl.J.space.state(idx);
    state_.learners.push_back(std::move(cl));
  }
  state_.dual = DualState{0.0, params_.lambda_max, params_.eta2};
  rng_ = Rng::substream(cfg_.seed, {stream::kTrainStep});
  state_.rng_state = rng_.save();
  trace_every_ = cfg_.trace_every > 0 ? cfg_.trace_every : std::max(1, cfg_.T / 2000);
}

void ThresholdNpg::step() {
  const int N = params_.N;
  const double lambda = state_.dual.lambda;

  double cost_t = 0.0;
  double usage_t = 0.0;
  std::vector<AcStepOutcome> outcomes(N);
  for (int n = 0; n < N; ++n) {
    outcomes[n] = actor_critic_step(state_.learners[n], lambda, clients_[n].model, kernels_[n],
                                    cfg_, params_.gamma, rng_);
    cost_t += outcomes[n].c;
    usage_t += outcomes[n].g;
  }

  state_.cost_sum += cost_t;
  state_.usage_sum += usage_t - params_.dual_budget;
  state_.sampled_usage.push_back(usage_t);

  if (state_.t % trace_every_ == 0) {
    const double denom = state_.t + 1;
    const double cost_avg = state_.cost_sum / denom;
    const double violation_avg = std::max(state_.usage_sum / denom, 0.0);
    for (int n = 0; n < N; ++n)
      state_.rows.push_back({state_.t, n, outcomes[n].c, outcomes[n].g, lambda, 0.0, cost_avg,
                             violation_avg});
  }

  state_.dual = dual_step(state_.dual, usage_t, params_.dual_budget);
  ++state_.t;
  state_.rng_state = rng_.save();
}

TrainTrace ThresholdNpg::finish() {
  TrainTrace trace;
  trace.rows = state_.rows;
  trace.final_lambda = state_.dual.lambda;
  trace.sampled_usage = state_.sampled_usage;
  for (int n = 0; n < params_.N; ++n) {
    EvalResult ev = evaluate_policy(kernels_[n], state_.learners[n].policy.distribution(),
                                    state_.dual.lambda);
    trace.final_J_c.push_back(expect(clients_[n].rho, ev.J_c));
    trace.final_J_g.push_back(expect(clients_[n].rho, ev.J_g));
  }
  return trace;
}

AcRunState ThresholdNpg::snapshot() const { return state_; }

void ThresholdNpg::restore(AcRunState s) {
  state_ = std::move(s);
  rng_.restore(state_.rng_state);
}

TrainTrace run_threshold_npg(const std::vector<ClientSpec>& clients, const TrainConfig& cfg) {
  ThresholdNpg run(clients, cfg);
  while (!run.done()) run.step();
  return run.finish();
}

}  // namespace crl
