#include "crl/model.hpp"

#include <cmath>
#include <sstream>

namespace crl {

CostParams ClientModel::effective_cost() const {
  CostParams cp = cost;
  if (cp.normalize) {
    double scale = cp.delta * M + cp.c_stall + cp.c_term;
    if (scale > 0.0) {
      cp.delta /= scale;
      cp.c_stall /= scale;
      cp.c_term /= scale;
    }
    cp.normalize = false;
  }
  return cp;
}

double ClientModel::stage_cost(ClientState s, ClientState next) const {
  CostParams cp = effective_cost();
  if (next.x == 0 && next.y == 0) return cp.c_term;
  return cp.delta * s.y + (s.x == 0 ? cp.c_stall : 0.0);
}

std::vector<TransitionEntry> transition_distribution(const ClientModel& m, ClientState s,
                                                     ActionClass a) {
  struct Branch {
    ClientState next;
    double prob;
    bool reset;
  };
  const double keep = 1.0 - m.alpha;
  const Branch branches[] = {
      {s, keep * m.p_stay(a), false},
      {plus_ex(s, 1, m.L), keep * m.p_up(a), false},
      {minus_ex(s, 1, m.M), keep * m.p_down(a), false},
      {{0, 0}, m.alpha, true},
  };
  std::vector<TransitionEntry> out;
  out.reserve(4);
  for (const Branch& b : branches) {
    if (b.prob <= 0.0) continue;
    double c = m.stage_cost(s, b.next);
    bool merged = false;
    for (TransitionEntry& e : out) {
      if (e.next == b.next && e.is_reset == b.reset) {
        e.cost = (e.cost * e.prob + c * b.prob) / (e.prob + b.prob);
        e.prob += b.prob;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back({b.next, b.prob, c, b.reset});
  }
  return out;
}

StageCost stage_costs(const ClientModel& m, ClientState s, const TransitionEntry& e,
                      ActionClass a) {
  return {m.stage_cost(s, e.next), constraint_cost(a)};
}

TransitionEntry sample_transition(const ClientModel& m, ClientState s, ActionClass a, Rng& rng) {
  auto dist = transition_distribution(m, s, a);
  double u = rng.uniform01();
  double acc = 0.0;
  for (const TransitionEntry& e : dist) {
    acc += e.prob;
    if (u < acc) return e;
  }
  return dist.back();  // u fell in the floating-point tail
}

namespace {

template <class... Args>
void fail(std::vector<std::string>& out, Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  out.push_back(os.str());
}

}  // namespace

std::vector<std::string> validate_model(const ClientModel& m) {
  std::vector<std::string> bad;
  if (!(m.mu_high > 0.0 && m.mu_high <= 1.0))
    fail(bad, "mu_high in (0,1] required, got ", m.mu_high);
  if (!(m.mu_low >= 0.0 && m.mu_low < 1.0)) fail(bad, "mu_low in [0,1) required, got ", m.mu_low);
  if (!(m.mu_high > m.mu_low))
    fail(bad, "mu_high > mu_low required, got mu_high=", m.mu_high, " mu_low=", m.mu_low);
  if (!(m.beta > 0.0 && m.beta < 1.0)) fail(bad, "beta in (0,1) required, got ", m.beta);
  if (!(m.beta < m.mu_high))
    fail(bad, "beta < mu_high required, got beta=", m.beta, " mu_high=", m.mu_high);
  if (!(m.alpha > 0.0 && m.alpha < 1.0)) fail(bad, "alpha in (0,1) required, got ", m.alpha);
  if (!(m.gamma > 0.0 && m.gamma < 1.0)) fail(bad, "gamma in (0,1) required, got ", m.gamma);
  if (m.L < 1) fail(bad, "L >= 1 required, got ", m.L);
  if (m.M < 0) fail(bad, "M >= 0 required, got ", m.M);
  if (!(m.cost.delta > 0.0)) fail(bad, "cost.delta > 0 required, got ", m.cost.delta);
  if (m.cost.c_stall < 0.0) fail(bad, "cost.c_stall >= 0 required, got ", m.cost.c_stall);
  if (m.cost.c_term < 0.0) fail(bad, "cost.c_term >= 0 required, got ", m.cost.c_term);
  for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
    for (double p : {m.p_stay(a), m.p_up(a), m.p_down(a)}) {
      if (p < -1e-15 || p > 1.0 + 1e-15) {
        fail(bad, "branch probability out of [0,1]: ", p);
        break;
      }
    }
  }
  if (bad.empty() && m.space().size() <= 441) {
    auto cost_bad = check_cost_assumptions(m);
    bad.insert(bad.end(), cost_bad.begin(), cost_bad.end());
  }
  return bad;
}

std::vector<std::string> check_cost_assumptions(const ClientModel& m) {
  std::vector<std::string> bad;
  auto succ = [&](ClientState s, int dir) {
    if (dir > 0) return plus_ex(s, 1, m.L);
    if (dir < 0) return minus_ex(s, 1, m.M);
    return s;
  };
  // Strictly increasing in y at fixed x, for each one-step successor shape.
  for (int x = 0; x <= m.L; ++x)
    for (int y1 = 0; y1 <= m.M; ++y1)
      for (int y2 = y1 + 1; y2 <= m.M; ++y2)
        for (int dir : {-1, 0, 1}) {
          ClientState lo{x, y1}, hi{x, y2};
          double clo = m.stage_cost(lo, succ(lo, dir));
          double chi = m.stage_cost(hi, succ(hi, dir));
          if (!(chi > clo))
            fail(bad, "cost not increasing in stall count at x=", x, ": c((", x, ",", y2,
                 "),dir=", dir, ")=", chi, " <= c((", x, ",", y1, "),dir=", dir, ")=", clo);
        }
  // Independent of x above the empty-buffer boundary.
  for (int y = 0; y <= m.M; ++y)
    for (int x1 = 2; x1 <= m.L; ++x1)
      for (int x2 = x1 + 1; x2 <= m.L; ++x2)
        for (int dir : {-1, 0, 1}) {
          ClientState a{x1, y}, b{x2, y};
          double ca = m.stage_cost(a, succ(a, dir));
          double cb = m.stage_cost(b, succ(b, dir));
          if (ca != cb)
            fail(bad, "cost depends on buffer level above x=1: c((", x1, ",", y, "))=", ca,
                 " vs c((", x2, ",", y, "))=", cb, " dir=", dir);
        }
  // One termination cost for every origin state.
  const StateSpace sp = m.space();
  double cterm = m.stage_cost({0, 0}, {0, 0});
  for (int i = 0; i < sp.size(); ++i) {
    double c = m.stage_cost(sp.state(i), {0, 0});
    if (c != cterm)
      fail(bad, "termination cost varies with origin state (", sp.state(i).x, ",", sp.state(i).y,
           "): ", c, " vs ", cterm);
  }
  return bad;
}

ClientModel tiny_model() {
  ClientModel m;  // member defaults are the tiny client
  m.cost.normalize = true;
  return m;
}

ClientModel reference_model() {
  ClientModel m;
  m.mu_high = 0.8;
  m.mu_low = 0.35;
  m.beta = 0.5;
  m.alpha = 0.02;
  m.L = 10;
  m.M = 3;
  m.gamma = 0.95;
  m.cost = {0.25, 1.0, 1.0, true};
  return m;
}

}  // namespace crl
