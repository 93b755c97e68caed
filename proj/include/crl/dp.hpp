#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crl/model.hpp"
#include "crl/state.hpp"

namespace crl {

// Transition lists for every (state, action), built once and shared by the solvers.
struct Kernel {
  StateSpace space;
  double gamma = 0.0;
  std::vector<std::vector<TransitionEntry>> rows;

  const std::vector<TransitionEntry>& at(ClientState s, ActionClass a) const {
    return rows[2 * space.index(s) + static_cast<int>(a)];
  }
};

Kernel build_kernel(const ClientModel& m);

struct SolveError : std::runtime_error {
  double residual;
  int iters;
  SolveError(const std::string& msg, double residual_, int iters_)
      : std::runtime_error(msg), residual(residual_), iters(iters_) {}
};

struct BackupResult {
  ValueTable J;
  DeterministicPolicy greedy;  // ties go to Low
};

// One application of T_lambda: (TJ)(s) = min_a E[c + lambda*g + gamma*J(s')].
BackupResult bellman_backup(const Kernel& k, const ValueTable& J, double lambda);
BackupResult bellman_backup(const ClientModel& m, const ValueTable& J, double lambda);

struct VIResult {
  ValueTable J;
  DeterministicPolicy policy;
  int iters = 0;
  double residual = 0.0;
};

// Starts from J0 = 0; stops once the sup-norm step is below tol*(1-gamma)/(2*gamma),
// which bounds the distance to the fixed point by tol.
VIResult value_iteration(const ClientModel& m, double lambda, double tol = 1e-9,
                         int max_iter = 200000);
VIResult value_iteration(const Kernel& k, double lambda, double tol = 1e-9,
                         int max_iter = 200000);

// f(y) = largest buffer level where the policy still picks High, -1 if it never does.
struct ThresholdFunction {
  std::vector<int> f;
  int L = 0;

  ActionClass action(ClientState s) const {
    return s.x <= f[s.y] ? ActionClass::High : ActionClass::Low;
  }
  DeterministicPolicy induced_policy(const StateSpace& space) const;
};

// Two states at the same stall count that break the prefix shape.
struct ThresholdWitness {
  int y = 0;
  int x_low = 0;   // picks Low
  int x_high = 0;  // picks High, x_high > x_low
};

struct ThresholdExtraction {
  std::optional<ThresholdFunction> threshold;
  std::optional<ThresholdWitness> witness;

  bool is_threshold() const { return threshold.has_value(); }
};

ThresholdExtraction extract_threshold(const DeterministicPolicy& pi);

// One-step switching rule evaluated on a converged value table.
// lhs weighs the value increments across the two non-reset moves; picking Low is
// optimal exactly when lhs >= r. q_gap = gamma*(1-alpha)*(mu_high-mu_low)*(lhs-r)
// equals Q(s,High) - Q(s,Low).
struct SwitchingDecision {
  double lhs = 0.0;
  double r = 0.0;
  double c0 = 0.0;
  ActionClass action = ActionClass::Low;
};

SwitchingDecision threshold_condition(const ClientModel& m, const ValueTable& J, ClientState s,
                                      double lambda);

struct EvalResult {
  ValueTable J_c;
  ValueTable J_g;
  double lambda = 0.0;

  // E_rho[J_c + lambda*J_g] - lambda*budget_share, the per-client Lagrangian value.
  double lagrangian(const std::vector<double>& rho, double budget_share) const;
};

EvalResult evaluate_policy(const ClientModel& m, const StochasticPolicy& pi, double lambda);
EvalResult evaluate_policy(const ClientModel& m, const DeterministicPolicy& pi, double lambda);
EvalResult evaluate_policy(const Kernel& k, const StochasticPolicy& pi, double lambda);

StochasticPolicy to_stochastic(const DeterministicPolicy& pi);

struct AdvantageTables {
  StateActionTable A_lambda;
  StateActionTable A_c;
  StateActionTable A_g;
};

AdvantageTables advantage_table(const ClientModel& m, const StochasticPolicy& pi, double lambda);
AdvantageTables advantage_table(const Kernel& k, const EvalResult& eval);

struct OccupancyMeasure {
  StateSpace space;
  std::vector<double> d;    // discounted visitation, sums to 1
  std::vector<double> rho;  // start distribution it came from
};

OccupancyMeasure occupancy_measure(const ClientModel& m, const StochasticPolicy& pi,
                                   const std::vector<double>& rho);

// One client of the decomposed problem: its dynamics plus its start distribution.
struct ClientSpec {
  ClientModel model;
  std::vector<double> rho;
};

std::vector<double> uniform_rho(const StateSpace& space);
std::vector<double> point_mass_rho(const StateSpace& space, ClientState s);

double expect(const std::vector<double>& rho, const ValueTable& v);

struct DualValue {
  double D = 0.0;
  std::vector<VIResult> per_client;
};

// D(lambda) = sum_n min_pi E_rho_n[J_lambda] - lambda*K_bar; the decomposition solves
// each client independently.
DualValue dual_function(const std::vector<ClientSpec>& clients, double lambda, double K_bar,
                        double tol = 1e-9);

struct DualOracle {
  double lambda_star = 0.0;
  double D_star = 0.0;
  double optimal_cost = 0.0;      // sum_n E_rho_n[J_c] of the boundary mixture
  double constraint_value = 0.0;  // sum_n E_rho_n[J_g] of the same mixture
  double slackness = 0.0;         // lambda_star * (constraint_value - K_bar)
  double mixture_weight = 1.0;    // weight on the low-lambda (high usage) endpoint
  double grid_step = 0.0;
};

// Grid search over [0, lambda_max]. Around the maximizer the constraint value crosses
// the budget; mixing the two adjacent deterministic optima pins the primal optimum.
DualOracle dual_grid_search(const std::vector<ClientSpec>& clients, double K_bar,
                            double lambda_max, double step = 1e-3, double tol = 1e-9);

}  // namespace crl
