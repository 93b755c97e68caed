#pragma once

#include <vector>

#include "crl/dp.hpp"
#include "crl/soft_threshold.hpp"
#include "crl/state.hpp"

namespace crl {

// Per-client service classes for one decision epoch.
using Assignment = std::vector<ActionClass>;

inline int high_count(const Assignment& a) {
  int n = 0;
  for (ActionClass v : a) n += v == ActionClass::High ? 1 : 0;
  return n;
}

inline ActionClass hard_threshold_action(const ThresholdFunction& f, ClientState s) {
  return f.action(s);
}

// Single shared class: everyone Low. The simulator can model the merged pool
// with an equal-share service rate.
Assignment vanilla_assign(const std::vector<ClientState>& states);

// High for the K emptiest buffers; ties prefer more stalls, then lower index.
Assignment greedy_buffer_assign(const std::vector<ClientState>& states, int K);

// What the index ranking orders clients by.
enum class IndexScore { Logit, Value };

// High for the K clients whose trained policy most wants it, ranked by the
// logit theta_n(s_n) (or by the value estimate V_n(s_n) for comparison);
// ties prefer more stalls, then lower index. Works for any N and K <= N.
Assignment index_assign(const std::vector<SoftThresholdPolicy>& policies,
                        const std::vector<ClientState>& states, int K,
                        IndexScore score = IndexScore::Logit,
                        const std::vector<ValueTable>* values = nullptr);

}  // namespace crl
