#include "crl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace crl {

std::vector<std::string> validate_env(const EnvConfig& cfg) {
  std::vector<std::string> bad;
  if (cfg.clients.empty()) bad.push_back("no clients configured");
  if (cfg.K < 0 || cfg.K > static_cast<int>(cfg.clients.size()))
    bad.push_back("K must lie in [0, N]");
  if (cfg.horizon < 1) bad.push_back("horizon must be at least 1");
  if (cfg.rho.size() != cfg.clients.size())
    bad.push_back("need one start distribution per client");
  for (size_t n = 0; n < cfg.clients.size() && n < cfg.rho.size(); ++n) {
    ClientModel m = cfg.clients[n];
    if (cfg.mu_share >= 0.0) m.mu_low = cfg.mu_share;
    auto model_bad = validate_model(m);
    for (const std::string& s : model_bad)
      bad.push_back("client " + std::to_string(n) + ": " + s);
    if (static_cast<int>(cfg.rho[n].size()) != m.space().size()) {
      bad.push_back("client " + std::to_string(n) + ": start distribution has wrong length");
      continue;
    }
    double total = std::accumulate(cfg.rho[n].begin(), cfg.rho[n].end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9)
      bad.push_back("client " + std::to_string(n) + ": start distribution sums to " +
                    std::to_string(total));
  }
  return bad;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  auto bad = validate_env(cfg_);
  if (!bad.empty()) throw std::invalid_argument("invalid environment config: " + bad.front());
  models_ = cfg_.clients;
  if (cfg_.mu_share >= 0.0)
    for (ClientModel& m : models_) m.mu_low = cfg_.mu_share;
  s_.resize(models_.size());
  rngs_.resize(models_.size());
}

std::vector<ClientState> Env::reset(int episode) {
  for (size_t n = 0; n < models_.size(); ++n) {
    rngs_[n] = Rng::substream(cfg_.seed,
                              {stream::kEnvEpisode, static_cast<std::uint64_t>(episode), n});
    const StateSpace sp = models_[n].space();
    double u = rngs_[n].uniform01();
    double acc = 0.0;
    int idx = sp.size() - 1;
    for (int i = 0; i < sp.size(); ++i) {
      acc += cfg_.rho[n][i];
      if (u < acc) {
        idx = i;
        break;
      }
    }
    s_[n] = sp.state(idx);
  }
  epoch_ = 0;
  return s_;
}

StepOutcome Env::step(const Assignment& assignment) {
  const int N = static_cast<int>(models_.size());
  if (static_cast<int>(assignment.size()) != N)
    throw std::invalid_argument("assignment length does not match client count");
  if (cfg_.mode == ConstraintMode::Hard && high_count(assignment) > cfg_.K) {
    std::ostringstream os;
    os << "hard mode allows " << cfg_.K << " high slots, assignment uses "
       << high_count(assignment) << " (clients";
    for (int n = 0; n < N; ++n)
      if (assignment[n] == ActionClass::High) os << ' ' << n;
    os << ")";
    throw ConstraintViolation(os.str());
  }

  StepOutcome out;
  out.next.resize(N);
  out.c.resize(N);
  out.g.resize(N);
  out.resets.resize(N);
  out.epoch = epoch_;
  for (int n = 0; n < N; ++n) {
    TransitionEntry e = sample_transition(models_[n], s_[n], assignment[n], rngs_[n]);
    out.next[n] = e.next;
    out.c[n] = e.cost;
    out.g[n] = constraint_cost(assignment[n]);
    out.resets[n] = e.is_reset;
  }
  s_ = out.next;
  ++epoch_;
  return out;
}

double qoe_proxy(const EpisodeTrace& trace, const QoeParams& params) {
  if (trace.clients == 0) return 5.0;
  std::vector<double> q(trace.clients, 5.0);
  for (const StepRecord& r : trace.rows) {
    double& v = q[r.client];
    if (r.x == 0)
      v -= params.drop;
    else
      v += params.recover / (1.0 + r.y);
    v = std::clamp(v, 1.0, 5.0);
  }
  return std::accumulate(q.begin(), q.end(), 0.0) / trace.clients;
}

double Metrics::total_cost() const {
  return std::accumulate(discounted_cost.begin(), discounted_cost.end(), 0.0);
}

double Metrics::total_usage() const {
  return std::accumulate(discounted_usage.begin(), discounted_usage.end(), 0.0);
}

Metrics episode_metrics(const EpisodeTrace& trace, const std::vector<ClientModel>& models,
                        const QoeParams& params) {
  Metrics m;
  m.discounted_cost.assign(trace.clients, 0.0);
  m.discounted_usage.assign(trace.clients, 0.0);
  double buffer_sum = 0.0;
  for (const StepRecord& r : trace.rows) {
    double w = std::pow(models[r.client].gamma, r.t);
    m.discounted_cost[r.client] += w * r.c;
    m.discounted_usage[r.client] += w * r.g;
    m.stall_steps += r.x == 0 ? 1 : 0;
    buffer_sum += r.x;
  }
  m.mean_buffer = trace.rows.empty() ? 0.0 : buffer_sum / trace.rows.size();
  m.qoe = qoe_proxy(trace, params);
  return m;
}

Assignment decide(const PolicyBundle& policy, const std::vector<ClientState>& states, int K,
                  ConstraintMode mode, std::vector<Rng>& policy_rngs) {
  switch (policy.kind) {
    case PolicyKind::Vanilla:
      return vanilla_assign(states);
    case PolicyKind::GreedyBuffer:
      return greedy_buffer_assign(states, K);
    case PolicyKind::HardThreshold: {
      const size_t n = states.size();
      if (policy.thresholds.size() < n)
        throw std::invalid_argument("fewer thresholds than clients");
      Assignment out(n, ActionClass::Low);
      if (mode == ConstraintMode::Soft) {
        for (size_t i = 0; i < n; ++i)
          out[i] = hard_threshold_action(policy.thresholds[i], states[i]);
        return out;
      }
      // Budgeted variant: among takers, grant the K deepest below their cutoff.
      std::vector<int> takers;
      for (size_t i = 0; i < n; ++i)
        if (states[i].x <= policy.thresholds[i].f[states[i].y])
          takers.push_back(static_cast<int>(i));
      std::sort(takers.begin(), takers.end(), [&](int a, int b) {
        int da = policy.thresholds[a].f[states[a].y] - states[a].x;
        int db = policy.thresholds[b].f[states[b].y] - states[b].x;
        if (da != db) return da > db;
        if (states[a].y != states[b].y) return states[a].y > states[b].y;
        return a < b;
      });
      for (size_t i = 0; i < takers.size() && i < static_cast<size_t>(K); ++i)
        out[takers[i]] = ActionClass::High;
      return out;
    }
    case PolicyKind::Index:
      return index_assign(policy.soft, states, K, policy.index_score,
                          policy.values.empty() ? nullptr : &policy.values);
    case PolicyKind::SoftThreshold: {
      if (mode == ConstraintMode::Hard)
        throw std::invalid_argument("sampled soft-threshold policy cannot honor a hard budget");
      const size_t n = states.size();
      if (policy.soft.size() < n) throw std::invalid_argument("fewer policies than clients");
      Assignment out(n, ActionClass::Low);
      for (size_t i = 0; i < n; ++i)
        out[i] = policy_rngs[i].bernoulli(policy.soft[i].p_high(states[i]))
                     ? ActionClass::High
                     : ActionClass::Low;
      return out;
    }
  }
  throw std::logic_error("unhandled policy kind");
}

EpisodeResult run_episode(Env& env, const PolicyBundle& policy, int episode,
                          const QoeParams& qoe) {
  const int N = static_cast<int>(env.models().size());
  std::vector<Rng> policy_rngs(N);
  for (int n = 0; n < N; ++n)
    policy_rngs[n] = Rng::substream(env.config().seed,
                                    {stream::kEnvPolicy, static_cast<std::uint64_t>(episode),
                                     static_cast<std::uint64_t>(n)});

  EpisodeResult out;
  out.trace.clients = N;
  out.trace.rows.reserve(static_cast<size_t>(env.config().horizon) * N);

  std::vector<ClientState> s = env.reset(episode);
  for (int t = 0; t < env.config().horizon; ++t) {
    Assignment a = decide(policy, s, env.config().K, env.config().mode, policy_rngs);
    StepOutcome o = env.step(a);
    for (int n = 0; n < N; ++n)
      out.trace.rows.push_back({t, n, s[n].x, s[n].y, a[n], o.c[n], o.g[n],
                                static_cast<bool>(o.resets[n])});
    s = o.next;
  }
  out.metrics = episode_metrics(out.trace, env.models(), qoe);
  return out;
}

MetricsSummary evaluate_policy_in_env(const PolicyBundle& policy, const EnvConfig& cfg,
                                      int episodes) {
  Env env(cfg);
  MetricsSummary out;
  out.episodes = episodes;
  out.per_episode.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep)
    out.per_episode.push_back(run_episode(env, policy, ep).metrics);

  auto summarize = [&](auto get, double& mean, double& se) {
    double acc = 0.0;
    for (const Metrics& m : out.per_episode) acc += get(m);
    mean = episodes > 0 ? acc / episodes : 0.0;
    double var = 0.0;
    for (const Metrics& m : out.per_episode) {
      double d = get(m) - mean;
      var += d * d;
    }
    se = episodes > 1 ? std::sqrt(var / (episodes - 1) / episodes) : 0.0;
  };
  summarize([](const Metrics& m) { return m.total_cost(); }, out.cost_mean, out.cost_se);
  summarize([](const Metrics& m) { return m.total_usage(); }, out.usage_mean, out.usage_se);
  summarize([](const Metrics& m) { return double(m.stall_steps); }, out.stalls_mean,
            out.stalls_se);
  summarize([](const Metrics& m) { return m.mean_buffer; }, out.buffer_mean, out.buffer_se);
  summarize([](const Metrics& m) { return m.qoe; }, out.qoe_mean, out.qoe_se);
  return out;
}

}  // namespace crl
