#pragma once

#include <string>
#include <vector>

#include "crl/rng.hpp"
#include "crl/state.hpp"

namespace crl {

// Stage-cost parameters. The cost of a transition s -> s' is
//
//   c_term                        if s' == (0,0),
//   delta*y + c_stall*[x == 0]    otherwise,
//
// so every transition into (0,0) — the departure reset, and the natural
// self-loops that exist only at (0,0) itself — carries the one termination
// cost. Shipped configs keep c_term == c_stall, which makes the switching
// constant c0 vanish at every state, (0,0) included.
//
// With normalize set, (delta, c_stall, c_term) are rescaled by
// 1/(delta*M + c_stall + c_term) so every stage cost lies in [0,1].
struct CostParams {
  double delta = 0.5;
  double c_stall = 2.0;
  double c_term = 2.0;
  bool normalize = false;
};

struct ClientModel {
  double mu_high = 0.9;  // delivery success probability under high service
  double mu_low = 0.3;   // delivery success probability under low service
  double beta = 0.5;     // playout consumption probability
  double alpha = 0.05;   // per-step departure probability (reset to (0,0))
  int L = 2;             // buffer capacity
  int M = 1;             // stall-count cap
  double gamma = 0.9;
  CostParams cost;

  StateSpace space() const { return {L, M}; }
  double mu(ActionClass a) const { return a == ActionClass::High ? mu_high : mu_low; }
  // Branch probabilities before the departure mix-in.
  double p_up(ActionClass a) const { return mu(a) * (1.0 - beta); }
  double p_down(ActionClass a) const { return (1.0 - mu(a)) * beta; }
  double p_stay(ActionClass a) const { return 1.0 - p_up(a) - p_down(a); }

  CostParams effective_cost() const;  // normalization applied
  double stage_cost(ClientState s, ClientState next) const;
};

struct TransitionEntry {
  ClientState next;
  double prob = 0.0;
  double cost = 0.0;  // stage cost c(s, next) along this branch
  bool is_reset = false;
};

// One-step successors of (s, a): stay / buffer-up / buffer-down weighted by
// (1 - alpha), plus the departure reset to (0,0) at alpha. Branches landing
// on the same (state, reset flag) are merged with probability-weighted cost.
std::vector<TransitionEntry> transition_distribution(const ClientModel& m, ClientState s,
                                                     ActionClass a);

struct StageCost {
  double c = 0.0;  // QoE stage cost
  double g = 0.0;  // constraint cost, 1 for the high class
};
StageCost stage_costs(const ClientModel& m, ClientState s, const TransitionEntry& e,
                      ActionClass a);

TransitionEntry sample_transition(const ClientModel& m, ClientState s, ActionClass a, Rng& rng);

// Parameter sanity; returns human-readable violations, empty when usable.
std::vector<std::string> validate_model(const ClientModel& m);

// Exhaustive check of the cost-shape assumptions the threshold results rest
// on: strictly increasing in the stall count at fixed buffer, independent of
// the buffer level above the empty boundary, and a single termination cost.
std::vector<std::string> check_cost_assumptions(const ClientModel& m);

ClientModel tiny_model();       // 6-state desk model
ClientModel reference_model();  // 44-state streaming client

}  // namespace crl
