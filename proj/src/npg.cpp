#include "crl/npg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crl {

DualState dual_step(DualState d, double usage, double budget) {
  d.lambda = std::clamp(d.lambda + d.eta2 * (usage - budget), 0.0, d.lambda_max);
  return d;
}

ResolvedTrainParams resolve_train_params(const std::vector<ClientSpec>& clients,
                                         const TrainConfig& cfg) {
  if (clients.empty()) throw std::invalid_argument("no clients");
  if (cfg.T < 1) throw std::invalid_argument("T must be at least 1");
  if (!(cfg.K_bar > 0.0)) throw std::invalid_argument("K_bar must be positive");
  ResolvedTrainParams p;
  p.N = static_cast<int>(clients.size());
  p.gamma = clients[0].model.gamma;
  for (const ClientSpec& cl : clients)
    if (cl.model.gamma != p.gamma)
      throw std::invalid_argument("clients must share one discount factor");
  p.eta1 = cfg.eta1;
  p.eta2 = cfg.eta2 > 0.0 ? cfg.eta2 : (1.0 - p.gamma) / (p.N * std::sqrt(double(cfg.T)));
  p.K_bar = cfg.K_bar;
  p.xi = cfg.xi > 0.0 ? cfg.xi : cfg.K_bar;
  p.lambda_max = cfg.lambda_max > 0.0 ? cfg.lambda_max : 2.0 * p.N / ((1.0 - p.gamma) * p.xi);
  p.dual_budget =
      cfg.dual_target == DualTarget::PerStepBudget ? (1.0 - p.gamma) * cfg.K_bar : cfg.K_bar;
  if (!(p.eta1 > 0.0) || !(p.eta2 > 0.0)) throw std::invalid_argument("step sizes must be positive");
  return p;
}

MultiplicativeUpdate multiplicative_policy_update(const StochasticPolicy& pi,
                                                  const StateActionTable& A_lambda, double eta1,
                                                  double gamma) {
  const StateSpace sp = pi.p_high.space;
  const double scale = eta1 / (1.0 - gamma);
  MultiplicativeUpdate out{StateTable<double>(sp), std::vector<double>(sp.size())};
  for (int i = 0; i < sp.size(); ++i) {
    ClientState s = sp.state(i);
    double w_high = -scale * A_lambda.at(s, ActionClass::High);
    double w_low = -scale * A_lambda.at(s, ActionClass::Low);
    double mx = std::max(w_high, w_low);
    double num = pi.prob(s, ActionClass::High) * std::exp(w_high - mx);
    double den = num + pi.prob(s, ActionClass::Low) * std::exp(w_low - mx);
    out.p_high[i] = num / den;
    out.log_Z[i] = mx + std::log(den);
  }
  return out;
}

ExactStep exact_primal_step(const SoftThresholdPolicy& pi, double lambda, const ClientModel& m,
                            const std::vector<double>& rho, double eta1) {
  const Kernel k = build_kernel(m);
  const StochasticPolicy dist = pi.distribution();
  const AdvantageTables adv = advantage_table(k, evaluate_policy(k, dist, lambda));
  const double scale = eta1 / (1.0 - m.gamma);

  ExactStep out;
  out.next = pi;
  const StateSpace sp = k.space;
  for (int i = 0; i < sp.size(); ++i) {
    ClientState s = sp.state(i);
    double diff = adv.A_lambda.at(s, ActionClass::High) - adv.A_lambda.at(s, ActionClass::Low);
    out.next.theta[i] = clamp_theta(pi.theta[i] - scale * diff);
  }
  MultiplicativeUpdate mult = multiplicative_policy_update(dist, adv.A_lambda, eta1, m.gamma);
  out.log_Z = std::move(mult.log_Z);
  for (int i = 0; i < sp.size(); ++i) out.expected_logZ += rho[i] * out.log_Z[i];
  return out;
}

NaturalGradientCheck natural_gradient_oracle(const SoftThresholdPolicy& pi, double lambda,
                                             const ClientModel& m,
                                             const std::vector<double>& rho) {
  const Kernel k = build_kernel(m);
  const int n = k.space.size();
  if (n > 256) throw std::invalid_argument("state space too large to materialize the Fisher matrix");
  const StochasticPolicy dist = pi.distribution();
  const EvalResult ev = evaluate_policy(k, dist, lambda);
  const AdvantageTables adv = advantage_table(k, ev);
  const OccupancyMeasure occ = occupancy_measure(m, dist, rho);

  NaturalGradientCheck out;
  out.grad.assign(n, 0.0);
  out.advantage_diff.assign(n, 0.0);
  out.occupancy = occ.d;

  // F = sum_{s,a} d(s) pi(s,a) glog glog^T with glog supported on coordinate s:
  // dlog pi(s,a)/dtheta(s) = (1{a=High} - 1{a=Low}) (1 - pi(s,a)).
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    ClientState s = k.space.state(i);
    for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
      double sign = a == ActionClass::High ? 1.0 : -1.0;
      double glog = sign * (1.0 - dist.prob(s, a));
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = glog;
      F += occ.d[i] * dist.prob(s, a) * (e * e.transpose());
      grad[i] += occ.d[i] * dist.prob(s, a) * glog * adv.A_lambda.at(s, a) / (1.0 - m.gamma);
    }
    out.advantage_diff[i] =
        (adv.A_lambda.at(s, ActionClass::High) - adv.A_lambda.at(s, ActionClass::Low)) /
        (1.0 - m.gamma);
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out.max_offdiag = std::max(out.max_offdiag, std::abs(F(i, j)));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // Absolute cutoff near the underflow floor: a state only drops out when its
  // visitation-weighted policy variance is exactly zero, not merely small.
  constexpr double kPinvCutoff = 1e-300;
  Eigen::VectorXd inv_sv = svd.singularValues();
  out.rank = 0;
  for (int i = 0; i < inv_sv.size(); ++i) {
    if (inv_sv[i] > kPinvCutoff) {
      inv_sv[i] = 1.0 / inv_sv[i];
      ++out.rank;
    } else {
      inv_sv[i] = 0.0;
    }
  }
  Eigen::VectorXd dir =
      svd.matrixV() * inv_sv.asDiagonal() * (svd.matrixU().transpose() * grad);
  out.direction.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    out.grad[i] = grad[i];
    out.direction[i] = dir[i];
  }
  return out;
}

std::vector<double> fd_policy_gradient(const SoftThresholdPolicy& pi, double lambda,
                                       const ClientModel& m, const std::vector<double>& rho,
                                       double h) {
  const Kernel k = build_kernel(m);
  const int n = k.space.size();
  std::vector<double> grad(n, 0.0);
  auto value = [&](const SoftThresholdPolicy& p) {
    EvalResult ev = evaluate_policy(k, p.distribution(), lambda);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += rho[i] * (ev.J_c[i] + lambda * ev.J_g[i]);
    return acc;
  };
  for (int i = 0; i < n; ++i) {
    SoftThresholdPolicy hi = pi;
    SoftThresholdPolicy lo = pi;
    hi.theta[i] += h;
    lo.theta[i] -= h;
    grad[i] = (value(hi) - value(lo)) / (2.0 * h);
  }
  return grad;
}

ExactPrimalDual::ExactPrimalDual(std::vector<ClientSpec> clients, TrainConfig cfg)
    : clients_(std::move(clients)), cfg_(cfg), params_(resolve_train_params(clients_, cfg_)) {
  kernels_.reserve(clients_.size());
  for (const ClientSpec& cl : clients_) kernels_.push_back(build_kernel(cl.model));
  state_.theta.reserve(clients_.size());
  for (const ClientSpec& cl : clients_) state_.theta.emplace_back(cl.model.space());
  state_.dual = DualState{0.0, params_.lambda_max, params_.eta2};
  if (cfg_.compute_oracle) {
    oracle_ = dual_grid_search(clients_, params_.K_bar, params_.lambda_max,
                               cfg_.oracle_grid_step, cfg_.solve_tol);
    has_oracle_ = true;
  }
}

void ExactPrimalDual::step() {
  const int N = params_.N;
  const double lambda = state_.dual.lambda;

  double cost_t = 0.0;
  double usage_t = 0.0;
  std::vector<double> jc(N), jg(N), logz(N);
  std::vector<ExactStep> steps(N);
  for (int n = 0; n < N; ++n) {
    const StochasticPolicy dist = state_.theta[n].distribution();
    EvalResult ev = evaluate_policy(kernels_[n], dist, lambda);
    jc[n] = expect(clients_[n].rho, ev.J_c);
    jg[n] = expect(clients_[n].rho, ev.J_g);
    cost_t += jc[n];
    usage_t += jg[n];

    const AdvantageTables adv = advantage_table(kernels_[n], ev);
    const double scale = params_.eta1 / (1.0 - params_.gamma);
    ExactStep& st = steps[n];
    st.next = state_.theta[n];
    for (int i = 0; i < kernels_[n].space.size(); ++i) {
      ClientState s = kernels_[n].space.state(i);
      double diff = adv.A_lambda.at(s, ActionClass::High) - adv.A_lambda.at(s, ActionClass::Low);
      st.next.theta[i] = clamp_theta(state_.theta[n].theta[i] - scale * diff);
    }
    MultiplicativeUpdate mult =
        multiplicative_policy_update(dist, adv.A_lambda, params_.eta1, params_.gamma);
    st.log_Z = std::move(mult.log_Z);
    st.expected_logZ = 0.0;
    for (int i = 0; i < kernels_[n].space.size(); ++i)
      st.expected_logZ += clients_[n].rho[i] * st.log_Z[i];
    logz[n] = st.expected_logZ;
  }

  state_.cost_sum += cost_t;
  state_.usage_sum += usage_t - params_.K_bar;
  const double denom = state_.t + 1;
  const double gap_avg =
      state_.cost_sum / denom - (has_oracle_ ? oracle_.optimal_cost : 0.0);
  const double violation_avg = std::max(state_.usage_sum / denom, 0.0);
  for (int n = 0; n < N; ++n)
    state_.rows.push_back(
        {state_.t, n, jc[n], jg[n], lambda, logz[n], gap_avg, violation_avg});

  for (int n = 0; n < N; ++n) state_.theta[n] = std::move(steps[n].next);
  state_.dual = dual_step(state_.dual, usage_t, params_.K_bar);
  ++state_.t;
}

TrainTrace ExactPrimalDual::finish() {
  TrainTrace trace;
  trace.rows = state_.rows;
  trace.final_lambda = state_.dual.lambda;
  for (int n = 0; n < params_.N; ++n) {
    EvalResult ev =
        evaluate_policy(kernels_[n], state_.theta[n].distribution(), state_.dual.lambda);
    trace.final_J_c.push_back(expect(clients_[n].rho, ev.J_c));
    trace.final_J_g.push_back(expect(clients_[n].rho, ev.J_g));
  }
  if (has_oracle_) {
    trace.oracle = oracle_;
    trace.has_oracle = true;
  }
  return trace;
}

TrainTrace run_exact_primal_dual(const std::vector<ClientSpec>& clients, const TrainConfig& cfg) {
  ExactPrimalDual run(clients, cfg);
  while (!run.done()) run.step();
  return run.finish();
}

}  // namespace crl
