#include "crl/policies.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace crl {

Assignment vanilla_assign(const std::vector<ClientState>& states) {
  return Assignment(states.size(), ActionClass::Low);
}

namespace {

// Stable top-K selection: order[i] gives client indices ranked best-first.
Assignment pick_top_k(const std::vector<ClientState>& states, int K,
                      const std::vector<int>& order) {
  Assignment out(states.size(), ActionClass::Low);
  const int n_high = std::min<int>(K, static_cast<int>(states.size()));
  for (int i = 0; i < n_high; ++i) out[order[i]] = ActionClass::High;
  return out;
}

}  // namespace

Assignment greedy_buffer_assign(const std::vector<ClientState>& states, int K) {
  std::vector<int> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (states[a].x != states[b].x) return states[a].x < states[b].x;
    if (states[a].y != states[b].y) return states[a].y > states[b].y;
    return a < b;
  });
  return pick_top_k(states, K, order);
}

Assignment index_assign(const std::vector<SoftThresholdPolicy>& policies,
                        const std::vector<ClientState>& states, int K, IndexScore score,
                        const std::vector<ValueTable>* values) {
  const size_t n = states.size();
  if (policies.size() < n) throw std::invalid_argument("fewer trained policies than clients");
  if (score == IndexScore::Value && (values == nullptr || values->size() < n))
    throw std::invalid_argument("value ranking requested without value tables");

  std::vector<double> s(n);
  for (size_t i = 0; i < n; ++i) {
    const StateSpace sp =
        score == IndexScore::Logit ? policies[i].theta.space : (*values)[i].space;
    if (!sp.contains(states[i]))
      throw std::invalid_argument("client state outside the trained table");
    s[i] = score == IndexScore::Logit ? policies[i].theta.at(states[i])
                                      : (*values)[i].at(states[i]);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (s[a] != s[b]) return s[a] > s[b];
    if (states[a].y != states[b].y) return states[a].y > states[b].y;
    return a < b;
  });
  return pick_top_k(states, K, order);
}

}  // namespace crl
