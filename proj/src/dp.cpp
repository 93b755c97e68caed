#include "crl/dp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace crl {

namespace {

constexpr int kDirectSolveLimit = 4096;
constexpr double kIterativeTol = 1e-12;

}  // namespace

Kernel build_kernel(const ClientModel& m) {
  Kernel k;
  k.space = m.space();
  k.gamma = m.gamma;
  k.rows.resize(2 * k.space.size());
  for (int i = 0; i < k.space.size(); ++i) {
    ClientState s = k.space.state(i);
    for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
      k.rows[2 * i + static_cast<int>(a)] = transition_distribution(m, s, a);
    }
  }
  return k;
}

BackupResult bellman_backup(const Kernel& k, const ValueTable& J, double lambda) {
  const StateSpace sp = k.space;
  BackupResult out{ValueTable(sp), DeterministicPolicy(sp, ActionClass::Low)};
  for (int i = 0; i < sp.size(); ++i) {
    double q[2];
    for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
      double acc = lambda * constraint_cost(a);
      for (const TransitionEntry& e : k.rows[2 * i + static_cast<int>(a)])
        acc += e.prob * (e.cost + k.gamma * J.at(e.next));
      q[static_cast<int>(a)] = acc;
    }
    bool high = q[0] < q[1];  // tie keeps Low
    out.J[i] = high ? q[0] : q[1];
    out.greedy[i] = high ? ActionClass::High : ActionClass::Low;
  }
  return out;
}

BackupResult bellman_backup(const ClientModel& m, const ValueTable& J, double lambda) {
  return bellman_backup(build_kernel(m), J, lambda);
}

VIResult value_iteration(const Kernel& k, double lambda, double tol, int max_iter) {
  const double stop = tol * (1.0 - k.gamma) / (2.0 * k.gamma);
  ValueTable J(k.space);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    BackupResult b = bellman_backup(k, J, lambda);
    residual = 0.0;
    for (int i = 0; i < J.size(); ++i) residual = std::max(residual, std::abs(b.J[i] - J[i]));
    J = std::move(b.J);
    if (residual <= stop) return {std::move(J), std::move(b.greedy), it, residual};
  }
  throw SolveError("value iteration did not converge", residual, max_iter);
}

VIResult value_iteration(const ClientModel& m, double lambda, double tol, int max_iter) {
  return value_iteration(build_kernel(m), lambda, tol, max_iter);
}

DeterministicPolicy ThresholdFunction::induced_policy(const StateSpace& space) const {
  DeterministicPolicy pi(space, ActionClass::Low);
  for (int i = 0; i < space.size(); ++i) pi[i] = action(space.state(i));
  return pi;
}

ThresholdExtraction extract_threshold(const DeterministicPolicy& pi) {
  const StateSpace sp = pi.space;
  ThresholdFunction tf;
  tf.L = sp.L;
  tf.f.assign(sp.M + 1, -1);
  for (int y = 0; y <= sp.M; ++y) {
    int last_low = -1;
    for (int x = 0; x <= sp.L; ++x) {
      if (pi.at({x, y}) == ActionClass::Low) {
        last_low = x;
      } else {
        if (last_low >= 0) return {std::nullopt, ThresholdWitness{y, last_low, x}};
        tf.f[y] = x;
      }
    }
  }
  return {std::move(tf), std::nullopt};
}

SwitchingDecision threshold_condition(const ClientModel& m, const ValueTable& J, ClientState s,
                                      double lambda) {
  const ClientState up = plus_ex(s, 1, m.L);
  const ClientState down = minus_ex(s, 1, m.M);
  SwitchingDecision d;
  d.lhs = (1.0 - m.beta) * (J.at(up) - J.at(s)) + m.beta * (J.at(s) - J.at(down));
  d.c0 = ((1.0 - m.beta) * (m.stage_cost(s, s) - m.stage_cost(s, up)) +
          m.beta * (m.stage_cost(s, down) - m.stage_cost(s, s))) /
         m.gamma;
  d.r = d.c0 - lambda / (m.gamma * (1.0 - m.alpha) * (m.mu_high - m.mu_low));
  d.action = d.lhs >= d.r ? ActionClass::Low : ActionClass::High;
  return d;
}

StochasticPolicy to_stochastic(const DeterministicPolicy& pi) {
  StochasticPolicy sp;
  sp.p_high = StateTable<double>(pi.space);
  for (int i = 0; i < pi.size(); ++i) sp.p_high[i] = pi[i] == ActionClass::High ? 1.0 : 0.0;
  return sp;
}

double EvalResult::lagrangian(const std::vector<double>& rho, double budget_share) const {
  double acc = 0.0;
  for (int i = 0; i < J_c.size(); ++i) acc += rho[i] * (J_c[i] + lambda * J_g[i]);
  return acc - lambda * budget_share;
}

namespace {

struct PolicyChain {
  Eigen::MatrixXd P;  // row-stochastic transition matrix under pi
  Eigen::VectorXd c;  // expected one-step stage cost
  Eigen::VectorXd g;  // expected one-step constraint cost
};

PolicyChain policy_chain(const Kernel& k, const StochasticPolicy& pi) {
  const int n = k.space.size();
  PolicyChain pc{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    ClientState s = k.space.state(i);
    for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
      double w = pi.prob(s, a);
      if (w == 0.0) continue;
      pc.g[i] += w * constraint_cost(a);
      for (const TransitionEntry& e : k.rows[2 * i + static_cast<int>(a)]) {
        pc.P(i, k.space.index(e.next)) += w * e.prob;
        pc.c[i] += w * e.prob * e.cost;
      }
    }
  }
  return pc;
}

// Solves J = b + gamma*P*J: direct factorization at small sizes, otherwise the
// fixed-point iteration (a gamma-contraction in sup norm).
Eigen::VectorXd solve_value(const Eigen::MatrixXd& P, const Eigen::VectorXd& b, double gamma) {
  const int n = static_cast<int>(b.size());
  if (n <= kDirectSolveLimit) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - gamma * P;
    return Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);
  }
  constexpr int kMaxSweeps = 10000000;
  Eigen::VectorXd J = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < kMaxSweeps; ++it) {
    Eigen::VectorXd next = b + gamma * (P * J);
    double step = (next - J).lpNorm<Eigen::Infinity>();
    J = std::move(next);
    if (step <= kIterativeTol) return J;
  }
  throw SolveError("policy evaluation iteration did not converge", kIterativeTol, kMaxSweeps);
}

}  // namespace

EvalResult evaluate_policy(const Kernel& k, const StochasticPolicy& pi, double lambda) {
  const PolicyChain pc = policy_chain(k, pi);
  Eigen::VectorXd jc = solve_value(pc.P, pc.c, k.gamma);
  Eigen::VectorXd jg = solve_value(pc.P, pc.g, k.gamma);
  EvalResult out{ValueTable(k.space), ValueTable(k.space), lambda};
  for (int i = 0; i < k.space.size(); ++i) {
    out.J_c[i] = jc[i];
    out.J_g[i] = jg[i];
  }
  return out;
}

EvalResult evaluate_policy(const ClientModel& m, const StochasticPolicy& pi, double lambda) {
  return evaluate_policy(build_kernel(m), pi, lambda);
}

EvalResult evaluate_policy(const ClientModel& m, const DeterministicPolicy& pi, double lambda) {
  return evaluate_policy(m, to_stochastic(pi), lambda);
}

AdvantageTables advantage_table(const Kernel& k, const EvalResult& eval) {
  AdvantageTables out{StateActionTable(k.space), StateActionTable(k.space),
                      StateActionTable(k.space)};
  for (int i = 0; i < k.space.size(); ++i) {
    ClientState s = k.space.state(i);
    for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
      double qc = 0.0;
      double qg = constraint_cost(a);
      for (const TransitionEntry& e : k.rows[2 * i + static_cast<int>(a)]) {
        qc += e.prob * (e.cost + k.gamma * eval.J_c.at(e.next));
        qg += e.prob * k.gamma * eval.J_g.at(e.next);
      }
      out.A_c.at(s, a) = qc - eval.J_c[i];
      out.A_g.at(s, a) = qg - eval.J_g[i];
      out.A_lambda.at(s, a) = out.A_c.at(s, a) + eval.lambda * out.A_g.at(s, a);
    }
  }
  return out;
}

AdvantageTables advantage_table(const ClientModel& m, const StochasticPolicy& pi, double lambda) {
  const Kernel k = build_kernel(m);
  return advantage_table(k, evaluate_policy(k, pi, lambda));
}

OccupancyMeasure occupancy_measure(const ClientModel& m, const StochasticPolicy& pi,
                                   const std::vector<double>& rho) {
  const Kernel k = build_kernel(m);
  const PolicyChain pc = policy_chain(k, pi);
  const int n = k.space.size();
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = (1.0 - m.gamma) * rho[i];
  // d^T = (1-gamma) rho^T (I - gamma P)^{-1}
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - m.gamma * pc.P.transpose();
  Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(rhs);
  double total = d.sum();
  OccupancyMeasure out{k.space, std::vector<double>(n), rho};
  for (int i = 0; i < n; ++i) out.d[i] = d[i] / total;
  return out;
}

std::vector<double> uniform_rho(const StateSpace& space) {
  return std::vector<double>(space.size(), 1.0 / space.size());
}

std::vector<double> point_mass_rho(const StateSpace& space, ClientState s) {
  std::vector<double> rho(space.size(), 0.0);
  rho[space.index(s)] = 1.0;
  return rho;
}

double expect(const std::vector<double>& rho, const ValueTable& v) {
  double acc = 0.0;
  for (int i = 0; i < v.size(); ++i) acc += rho[i] * v[i];
  return acc;
}

DualValue dual_function(const std::vector<ClientSpec>& clients, double lambda, double K_bar,
                        double tol) {
  DualValue out;
  out.per_client.reserve(clients.size());
  for (const ClientSpec& cl : clients) {
    VIResult vi = value_iteration(cl.model, lambda, tol);
    out.D += expect(cl.rho, vi.J);
    out.per_client.push_back(std::move(vi));
  }
  out.D -= lambda * K_bar;
  return out;
}

namespace {

struct GridPoint {
  double D = 0.0;
  double cost = 0.0;   // sum_n E_rho[J_c] of the per-lambda greedy policies
  double usage = 0.0;  // sum_n E_rho[J_g]
};

}  // namespace

DualOracle dual_grid_search(const std::vector<ClientSpec>& clients, double K_bar,
                            double lambda_max, double step, double tol) {
  std::vector<Kernel> kernels;
  kernels.reserve(clients.size());
  for (const ClientSpec& cl : clients) kernels.push_back(build_kernel(cl.model));

  const int n_pts = static_cast<int>(std::floor(lambda_max / step + 1e-9)) + 1;
  std::vector<GridPoint> grid(n_pts);
  int best = 0;
  for (int i = 0; i < n_pts; ++i) {
    const double lambda = i * step;
    GridPoint& gp = grid[i];
    for (size_t n = 0; n < clients.size(); ++n) {
      VIResult vi = value_iteration(kernels[n], lambda, tol);
      EvalResult ev = evaluate_policy(kernels[n], to_stochastic(vi.policy), lambda);
      gp.D += expect(clients[n].rho, vi.J);
      gp.cost += expect(clients[n].rho, ev.J_c);
      gp.usage += expect(clients[n].rho, ev.J_g);
    }
    gp.D -= lambda * K_bar;
    if (gp.D > grid[best].D) best = i;
  }

  DualOracle out;
  out.lambda_star = best * step;
  out.D_star = grid[best].D;
  out.grid_step = step;

  // Constraint usage falls as lambda grows. At the first feasible grid point,
  // mixing with its infeasible neighbor makes the constraint exactly tight;
  // that mixture is the primal optimum complementary slackness asks for.
  int hi = 0;
  while (hi < n_pts && grid[hi].usage > K_bar) ++hi;
  if (hi == n_pts) {
    out.optimal_cost = grid[n_pts - 1].cost;
    out.constraint_value = grid[n_pts - 1].usage;
    out.mixture_weight = 1.0;
  } else if (hi == 0) {
    out.optimal_cost = grid[0].cost;
    out.constraint_value = grid[0].usage;
    out.mixture_weight = 1.0;
  } else {
    const GridPoint& inf = grid[hi - 1];
    const GridPoint& fea = grid[hi];
    double w = (K_bar - fea.usage) / (inf.usage - fea.usage);
    w = std::clamp(w, 0.0, 1.0);
    out.mixture_weight = w;
    out.optimal_cost = w * inf.cost + (1.0 - w) * fea.cost;
    out.constraint_value = w * inf.usage + (1.0 - w) * fea.usage;
  }
  out.slackness = out.lambda_star * (out.constraint_value - K_bar);
  return out;
}

}  // namespace crl
