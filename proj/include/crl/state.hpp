#pragma once

#include <cassert>
#include <vector>

namespace crl {

// Service classes a client can hold for one decision epoch.
enum class ActionClass : int { High = 0, Low = 1 };

inline constexpr int kNumActions = 2;

// Constraint cost g(a): one unit of the high-class budget.
inline double constraint_cost(ActionClass a) { return a == ActionClass::High ? 1.0 : 0.0; }

// Client state: playout buffer level x in [0,L], stall count y in [0,M].
struct ClientState {
  int x = 0;
  int y = 0;
  friend bool operator==(const ClientState&, const ClientState&) = default;
};

// Buffer arithmetic. Addition saturates at L. Subtraction floors at zero and
// bumps the stall count exactly when a positive drain empties the buffer
// (x == k), capped at M. Not associative: (s - e_x) + e_x can change y.
ClientState plus_ex(ClientState s, int k, int L);
ClientState minus_ex(ClientState s, int k, int M);

struct StateSpace {
  int L = 0;
  int M = 0;
  int size() const { return (L + 1) * (M + 1); }
  int index(ClientState s) const { return s.y * (L + 1) + s.x; }
  ClientState state(int i) const { return {i % (L + 1), i / (L + 1)}; }
  bool contains(ClientState s) const {
    return 0 <= s.x && s.x <= L && 0 <= s.y && s.y <= M;
  }
  friend bool operator==(const StateSpace&, const StateSpace&) = default;
};

template <class T>
struct StateTable {
  StateSpace space;
  std::vector<T> v;

  StateTable() = default;
  explicit StateTable(StateSpace sp, T init = T{}) : space(sp), v(sp.size(), init) {}

  T& at(ClientState s) { return v[space.index(s)]; }
  const T& at(ClientState s) const { return v[space.index(s)]; }
  T& operator[](int i) { return v[i]; }
  const T& operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }
};

using ValueTable = StateTable<double>;
using DeterministicPolicy = StateTable<ActionClass>;

// Stationary two-action policy stored as P(High | s).
struct StochasticPolicy {
  StateTable<double> p_high;
  double prob(ClientState s, ActionClass a) const {
    double p = p_high.at(s);
    return a == ActionClass::High ? p : 1.0 - p;
  }
};

struct StateActionTable {
  StateSpace space;
  std::vector<double> v;

  StateActionTable() = default;
  explicit StateActionTable(StateSpace sp) : space(sp), v(2 * sp.size(), 0.0) {}

  double& at(ClientState s, ActionClass a) { return v[2 * space.index(s) + static_cast<int>(a)]; }
  double at(ClientState s, ActionClass a) const {
    return v[2 * space.index(s) + static_cast<int>(a)];
  }
};

}  // namespace crl
