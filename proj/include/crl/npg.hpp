#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/dp.hpp"
#include "crl/model.hpp"
#include "crl/soft_threshold.hpp"
#include "crl/state.hpp"

namespace crl {

enum class AdvantageMode { ModelBased, Sampled };
enum class UpdateMode { Difference, A1Only };

// What the dual update compares the sampled high-class usage against in the
// stochastic loop. DiscountedBudget is the written update (instantaneous
// counts against the discounted budget K_bar, scales mismatched as noted in
// the README); PerStepBudget compares against K = (1-gamma)*K_bar so the
// multiplier settles where the long-run per-step usage meets the slot count.
enum class DualTarget { DiscountedBudget, PerStepBudget };

struct DualState {
  double lambda = 0.0;
  double lambda_max = 0.0;
  double eta2 = 0.0;
};

// lambda' = clip(lambda + eta2*(usage - budget), [0, lambda_max])
DualState dual_step(DualState d, double usage, double budget);

struct TrainConfig {
  int T = 400;
  double eta1 = 0.6931471805599453;  // log 2
  double eta2 = 0.0;                 // 0: (1-gamma)/(N*sqrt(T))
  double K_bar = 0.0;                // relaxed discounted budget, required > 0
  double xi = 0.0;                   // Slater margin; 0: K_bar (always-Low certificate)
  double lambda_max = 0.0;           // 0: 2N/((1-gamma)*xi)
  std::uint64_t seed = 0;
  AdvantageMode advantage_mode = AdvantageMode::ModelBased;
  UpdateMode update_mode = UpdateMode::Difference;
  DualTarget dual_target = DualTarget::DiscountedBudget;
  double solve_tol = 1e-9;
  double oracle_grid_step = 1e-3;
  bool compute_oracle = true;  // exact mode: optimal cost for the gap column
  int trace_every = 0;         // 0: every iteration (exact), ~T/2000 (stochastic)
  int checkpoint_every = 0;    // 0: off
};

struct ResolvedTrainParams {
  int N = 0;
  double gamma = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double K_bar = 0.0;
  double xi = 0.0;
  double lambda_max = 0.0;
  double dual_budget = 0.0;  // what sampled usage is compared against
};

// Fills the derived defaults; rejects mixed discount factors and a missing
// budget. Joint averages only make sense when every client discounts alike.
ResolvedTrainParams resolve_train_params(const std::vector<ClientSpec>& clients,
                                         const TrainConfig& cfg);

struct TraceRow {
  int t = 0;
  int client = 0;
  double J_c = 0.0;
  double J_g = 0.0;
  double lambda = 0.0;
  double logZ_mean = 0.0;
  double gap_avg = 0.0;
  double violation_avg = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  // Exact mode: evaluation of the post-final-update policies, so the last
  // recorded iteration still has a successor for improvement checks.
  std::vector<double> final_J_c;
  std::vector<double> final_J_g;
  double final_lambda = 0.0;
  // Stochastic mode: per-step sampled sum_n g, for constraint-tracking checks.
  std::vector<double> sampled_usage;
  DualOracle oracle;
  bool has_oracle = false;
};

struct ExactStep {
  SoftThresholdPolicy next;
  std::vector<double> log_Z;    // per state, from the matching multiplicative form
  double expected_logZ = 0.0;   // E_rho log Z
};

// Eq.-style simultaneous logit update: theta'(s) = theta(s) -
// eta1/(1-gamma) * [A_lambda(s, High) - A_lambda(s, Low)], advantages exact.
ExactStep exact_primal_step(const SoftThresholdPolicy& pi, double lambda, const ClientModel& m,
                            const std::vector<double>& rho, double eta1);

struct MultiplicativeUpdate {
  StateTable<double> p_high;
  std::vector<double> log_Z;
};

// pi'(s,a) = pi(s,a) exp(-eta1/(1-gamma) A(s,a)) / Z(s), computed max-shifted.
MultiplicativeUpdate multiplicative_policy_update(const StochasticPolicy& pi,
                                                  const StateActionTable& A_lambda, double eta1,
                                                  double gamma);

struct NaturalGradientCheck {
  std::vector<double> grad;            // dJ(rho;lambda)/dtheta(s)
  std::vector<double> direction;       // pinv(F) * grad
  std::vector<double> advantage_diff;  // [A(s,High)-A(s,Low)]/(1-gamma)
  std::vector<double> occupancy;       // d_rho(s)
  double max_offdiag = 0.0;            // largest |F| entry off the diagonal
  int rank = 0;                        // numerical rank of F
};

// Materializes the Fisher matrix of the logit parameterization outer-product
// by outer-product and applies its pseudo-inverse to the exact policy
// gradient. Exists to be compared against the advantage-difference form.
NaturalGradientCheck natural_gradient_oracle(const SoftThresholdPolicy& pi, double lambda,
                                             const ClientModel& m, const std::vector<double>& rho);

// Central differences of E_rho[J_c + lambda*J_g] in each logit coordinate.
std::vector<double> fd_policy_gradient(const SoftThresholdPolicy& pi, double lambda,
                                       const ClientModel& m, const std::vector<double>& rho,
                                       double h = 1e-5);

// Resumable state of the exact primal-dual loop. No RNG: the iteration is
// deterministic, so this plus the config reproduces the rest of the run.
struct ExactRunState {
  std::vector<SoftThresholdPolicy> theta;
  DualState dual;
  int t = 0;
  double cost_sum = 0.0;   // sum over past iterations of sum_n J_c
  double usage_sum = 0.0;  // sum over past iterations of (sum_n J_g - K_bar)
  std::vector<TraceRow> rows;
};

class ExactPrimalDual {
 public:
  ExactPrimalDual(std::vector<ClientSpec> clients, TrainConfig cfg);

  void step();
  bool done() const { return state_.t >= cfg_.T; }
  int t() const { return state_.t; }

  // Evaluates the current policies and closes out the trace; call once done.
  TrainTrace finish();

  const ExactRunState& state() const { return state_; }
  void restore(ExactRunState s) { state_ = std::move(s); }
  const TrainConfig& config() const { return cfg_; }
  const ResolvedTrainParams& params() const { return params_; }

 private:
  std::vector<ClientSpec> clients_;
  TrainConfig cfg_;
  ResolvedTrainParams params_;
  std::vector<Kernel> kernels_;
  ExactRunState state_;
  DualOracle oracle_;
  bool has_oracle_ = false;
};

TrainTrace run_exact_primal_dual(const std::vector<ClientSpec>& clients, const TrainConfig& cfg);

}  // namespace crl
