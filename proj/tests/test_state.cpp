#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crl/state.hpp"

using namespace crl;

TEST_CASE("plus_ex saturates at the buffer cap") {
  CHECK(plus_ex({0, 0}, 1, 2) == ClientState{1, 0});
  CHECK(plus_ex({1, 0}, 1, 2) == ClientState{2, 0});
  CHECK(plus_ex({2, 0}, 1, 2) == ClientState{2, 0});
  CHECK(plus_ex({1, 1}, 5, 2) == ClientState{2, 1});
  CHECK(plus_ex({1, 1}, 0, 2) == ClientState{1, 1});
}

TEST_CASE("minus_ex floors at zero and bumps the stall count only on a draining hit") {
  // k > 0 and x == k: the drain empties the buffer, one stall is charged.
  CHECK(minus_ex({1, 0}, 1, 1) == ClientState{0, 1});
  CHECK(minus_ex({2, 0}, 2, 1) == ClientState{0, 1});
  // x > k: buffer stays positive, no stall.
  CHECK(minus_ex({2, 0}, 1, 1) == ClientState{1, 0});
  // x < k, including the already-empty buffer: floored, no stall.
  CHECK(minus_ex({0, 0}, 1, 1) == ClientState{0, 0});
  CHECK(minus_ex({0, 1}, 1, 1) == ClientState{0, 1});
  CHECK(minus_ex({1, 0}, 2, 1) == ClientState{0, 0});
  // k == 0 is the identity.
  CHECK(minus_ex({1, 1}, 0, 1) == ClientState{1, 1});
  // Stall count caps at M.
  CHECK(minus_ex({1, 1}, 1, 1) == ClientState{0, 1});
  CHECK(minus_ex({1, 2}, 1, 3) == ClientState{0, 3});
}

TEST_CASE("buffer arithmetic is not associative across the empty boundary") {
  ClientState s{1, 0};
  ClientState down_up = plus_ex(minus_ex(s, 1, 1), 1, 2);
  CHECK(down_up == ClientState{1, 1});
  CHECK_FALSE(down_up == s);
  ClientState up_down = minus_ex(plus_ex(s, 1, 2), 1, 1);
  CHECK(up_down == ClientState{1, 0});
}

TEST_CASE("state space indexing round-trips and bounds-checks") {
  StateSpace sp{2, 1};
  CHECK(sp.size() == 6);
  for (int i = 0; i < sp.size(); ++i) {
    ClientState s = sp.state(i);
    CHECK(sp.contains(s));
    CHECK(sp.index(s) == i);
  }
  CHECK(sp.index({0, 0}) == 0);
  CHECK(sp.index({2, 1}) == 5);
  CHECK_FALSE(sp.contains({3, 0}));
  CHECK_FALSE(sp.contains({0, 2}));
  CHECK_FALSE(sp.contains({-1, 0}));
}

TEST_CASE("state tables default-fill and address by state") {
  StateSpace sp{2, 1};
  ValueTable v(sp, 1.5);
  for (int i = 0; i < v.size(); ++i) CHECK(v[i] == 1.5);
  v.at({2, 1}) = -3.0;
  CHECK(v[5] == -3.0);

  StateActionTable q(sp);
  q.at({1, 0}, ActionClass::High) = 2.0;
  q.at({1, 0}, ActionClass::Low) = 3.0;
  CHECK(q.at({1, 0}, ActionClass::High) == 2.0);
  CHECK(q.at({1, 0}, ActionClass::Low) == 3.0);
  CHECK(q.at({0, 0}, ActionClass::High) == 0.0);
}

TEST_CASE("constraint cost charges the high class only") {
  CHECK(constraint_cost(ActionClass::High) == 1.0);
  CHECK(constraint_cost(ActionClass::Low) == 0.0);
}
