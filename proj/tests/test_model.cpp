#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "crl/dp.hpp"
#include "crl/model.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

double prob_of(const std::vector<TransitionEntry>& row, ClientState next, bool is_reset) {
  for (const TransitionEntry& e : row)
    if (e.next == next && e.is_reset == is_reset) return e.prob;
  return -1.0;
}

double total_prob(const std::vector<TransitionEntry>& row) {
  double p = 0.0;
  for (const TransitionEntry& e : row) p += e.prob;
  return p;
}

ClientModel raw_tiny() {
  ClientModel m = tiny_model();
  m.cost.normalize = false;
  return m;
}

}  // namespace

// Hand-computed from mu_high=.9, mu_low=.3, beta=.5, alpha=.05:
// up = mu(a)/2, down = (1-mu(a))/2, all scaled by .95, plus the .05 reset.
TEST_CASE("one-step distributions of the six-state desk model") {
  ClientModel m = tiny_model();

  SUBCASE("interior state, high class") {
    auto row = transition_distribution(m, {1, 0}, ActionClass::High);
    CHECK(prob_of(row, {1, 0}, false) == doctest::Approx(0.475).epsilon(1e-14));
    CHECK(prob_of(row, {2, 0}, false) == doctest::Approx(0.4275).epsilon(1e-14));
    CHECK(prob_of(row, {0, 1}, false) == doctest::Approx(0.0475).epsilon(1e-14));
    CHECK(prob_of(row, {0, 0}, true) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(total_prob(row) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("interior state, low class") {
    auto row = transition_distribution(m, {1, 0}, ActionClass::Low);
    CHECK(prob_of(row, {1, 0}, false) == doctest::Approx(0.475).epsilon(1e-14));
    CHECK(prob_of(row, {2, 0}, false) == doctest::Approx(0.1425).epsilon(1e-14));
    CHECK(prob_of(row, {0, 1}, false) == doctest::Approx(0.3325).epsilon(1e-14));
    CHECK(prob_of(row, {0, 0}, true) == doctest::Approx(0.05).epsilon(1e-14));
  }

  SUBCASE("empty buffer at the stall cap merges stay and drain") {
    auto row = transition_distribution(m, {0, 1}, ActionClass::High);
    CHECK(row.size() == 3);
    CHECK(prob_of(row, {0, 1}, false) == doctest::Approx(0.5225).epsilon(1e-14));
    CHECK(prob_of(row, {1, 1}, false) == doctest::Approx(0.4275).epsilon(1e-14));
    CHECK(prob_of(row, {0, 0}, true) == doctest::Approx(0.05).epsilon(1e-14));
  }

  SUBCASE("full buffer merges stay and the saturated upward move") {
    auto row = transition_distribution(m, {2, 1}, ActionClass::Low);
    CHECK(row.size() == 3);
    CHECK(prob_of(row, {2, 1}, false) == doctest::Approx(0.6175).epsilon(1e-14));
    CHECK(prob_of(row, {1, 1}, false) == doctest::Approx(0.3325).epsilon(1e-14));
    CHECK(prob_of(row, {0, 0}, true) == doctest::Approx(0.05).epsilon(1e-14));
  }

  SUBCASE("the natural self-loop at the origin stays separate from the reset") {
    auto row = transition_distribution(m, {0, 0}, ActionClass::High);
    CHECK(prob_of(row, {0, 0}, false) == doctest::Approx(0.5225).epsilon(1e-14));
    CHECK(prob_of(row, {1, 0}, false) == doctest::Approx(0.4275).epsilon(1e-14));
    CHECK(prob_of(row, {0, 0}, true) == doctest::Approx(0.05).epsilon(1e-14));
  }
}

TEST_CASE("every distribution sums to one over both models and actions") {
  for (const ClientModel& m : {tiny_model(), reference_model()}) {
    StateSpace sp = m.space();
    for (int i = 0; i < sp.size(); ++i)
      for (ActionClass a : {ActionClass::High, ActionClass::Low}) {
        auto row = transition_distribution(m, sp.state(i), a);
        CHECK(std::abs(total_prob(row) - 1.0) <= 1e-12);
        for (const TransitionEntry& e : row) {
          CHECK(e.prob > 0.0);
          CHECK(sp.contains(e.next));
        }
      }
  }
}

TEST_CASE("stage costs: stall and termination, buffer level otherwise ignored") {
  ClientModel m = raw_tiny();
  // Any transition into the origin carries the termination cost.
  CHECK(m.stage_cost({1, 0}, {0, 0}) == 2.0);
  CHECK(m.stage_cost({0, 0}, {0, 0}) == 2.0);
  // Otherwise delta*y plus the stall charge at an empty buffer.
  CHECK(m.stage_cost({1, 0}, {2, 0}) == 0.0);
  CHECK(m.stage_cost({2, 1}, {1, 1}) == 0.5);
  CHECK(m.stage_cost({0, 1}, {1, 1}) == 2.5);
  CHECK(m.stage_cost({0, 1}, {0, 1}) == 2.5);

  // Normalization rescales by 1/(delta*M + c_stall + c_term) = 1/4.5.
  ClientModel n = tiny_model();
  CostParams eff = n.effective_cost();
  CHECK(eff.delta == doctest::Approx(0.5 / 4.5).epsilon(1e-15));
  CHECK(eff.c_stall == doctest::Approx(2.0 / 4.5).epsilon(1e-15));
  CHECK(eff.c_term == doctest::Approx(2.0 / 4.5).epsilon(1e-15));
  CHECK(n.stage_cost({0, 1}, {1, 1}) == doctest::Approx(2.5 / 4.5).epsilon(1e-15));
  // Every normalized stage cost lies in [0, 1].
  StateSpace sp = n.space();
  for (int i = 0; i < sp.size(); ++i)
    for (int j = 0; j < sp.size(); ++j) {
      double c = n.stage_cost(sp.state(i), sp.state(j));
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
}

TEST_CASE("per-branch costs pair the stage cost with the class charge") {
  ClientModel m = raw_tiny();
  auto row = transition_distribution(m, {1, 1}, ActionClass::High);
  for (const TransitionEntry& e : row) {
    StageCost sc = stage_costs(m, {1, 1}, e, ActionClass::High);
    CHECK(sc.c == e.cost);
    CHECK(sc.g == 1.0);
    StageCost sl = stage_costs(m, {1, 1}, e, ActionClass::Low);
    CHECK(sl.g == 0.0);
  }
}

TEST_CASE("model validation flags unusable parameters") {
  CHECK(validate_model(tiny_model()).empty());
  CHECK(validate_model(reference_model()).empty());

  ClientModel bad = tiny_model();
  bad.mu_high = 0.2;  // playout outpaces even the high class
  CHECK_FALSE(validate_model(bad).empty());

  ClientModel swapped = tiny_model();
  std::swap(swapped.mu_high, swapped.mu_low);
  CHECK_FALSE(validate_model(swapped).empty());

  ClientModel gamma_bad = tiny_model();
  gamma_bad.gamma = 1.0;
  CHECK_FALSE(validate_model(gamma_bad).empty());
}

TEST_CASE("cost-shape audit accepts the shipped models and catches violations") {
  CHECK(check_cost_assumptions(tiny_model()).empty());
  CHECK(check_cost_assumptions(reference_model()).empty());

  ClientModel flat = tiny_model();
  flat.cost.delta = 0.0;  // stall count no longer strictly increases the cost
  CHECK_FALSE(check_cost_assumptions(flat).empty());
}

TEST_CASE("sampled transitions match the stated branch probabilities") {
  ClientModel m = tiny_model();
  Rng rng = Rng::substream(7, {stream::kVerify, 1});
  const int n = 1000000;
  std::map<std::pair<int, int>, int> hits;
  int resets = 0;
  for (int i = 0; i < n; ++i) {
    TransitionEntry e = sample_transition(m, {1, 0}, ActionClass::High, rng);
    if (e.is_reset)
      ++resets;
    else
      ++hits[{e.next.x, e.next.y}];
  }
  auto within = [n](int count, double p) {
    double sigma = std::sqrt(p * (1.0 - p) / n);
    return std::abs(static_cast<double>(count) / n - p) <= 3.5 * sigma;
  };
  CHECK(within(hits[{1, 0}], 0.475));
  CHECK(within(hits[{2, 0}], 0.4275));
  CHECK(within(hits[{0, 1}], 0.0475));
  CHECK(within(resets, 0.05));
}
