#pragma once

#include <algorithm>
#include <cmath>

#include "crl/dp.hpp"
#include "crl/state.hpp"

namespace crl {

// Logit bound enforced by every update path. Keeps both action probabilities
// strictly positive, which the Fisher-information arguments need.
inline constexpr double kThetaClamp = 50.0;

inline double clamp_theta(double v) { return std::clamp(v, -kThetaClamp, kThetaClamp); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// P(High | s) = sigmoid(theta(s)). Readers see the stored logit as-is; writers
// are expected to clamp, so a table loaded from a corrupted artifact shows up
// as genuinely degenerate probabilities instead of being silently repaired.
struct SoftThresholdPolicy {
  StateTable<double> theta;

  SoftThresholdPolicy() = default;
  explicit SoftThresholdPolicy(StateSpace sp) : theta(sp, 0.0) {}

  double p_high(ClientState s) const { return sigmoid(theta.at(s)); }
  double prob(ClientState s, ActionClass a) const {
    double p = p_high(s);
    return a == ActionClass::High ? p : 1.0 - p;
  }
  StochasticPolicy distribution() const {
    StochasticPolicy out;
    out.p_high = StateTable<double>(theta.space);
    for (int i = 0; i < theta.size(); ++i)
      out.p_high[i] = sigmoid(theta.v[i]);
    return out;
  }
};

// theta(s) = f(y) - x, the linear logit the threshold correspondence is stated
// with. At x = f(y) this sits exactly on the fence (P(High) = sigmoid(0)).
inline SoftThresholdPolicy from_linear_threshold(const ThresholdFunction& tf, StateSpace sp) {
  SoftThresholdPolicy pi(sp);
  for (int i = 0; i < sp.size(); ++i) {
    ClientState s = sp.state(i);
    pi.theta[i] = clamp_theta(static_cast<double>(tf.f[s.y] - s.x));
  }
  return pi;
}

// Sharpened version centered half a cell past the cutoff, so the most likely
// action equals the hard rule at every state, x = f(y) included.
inline SoftThresholdPolicy from_hard_threshold(const ThresholdFunction& tf, StateSpace sp,
                                               double kappa = 12.0) {
  SoftThresholdPolicy pi(sp);
  for (int i = 0; i < sp.size(); ++i) {
    ClientState s = sp.state(i);
    pi.theta[i] = clamp_theta(kappa * (tf.f[s.y] - s.x + 0.5));
  }
  return pi;
}

// Zero-crossing readout: f(y) = largest x whose logit still favors High.
inline ThresholdFunction hard_threshold(const SoftThresholdPolicy& pi) {
  const StateSpace sp = pi.theta.space;
  ThresholdFunction tf;
  tf.L = sp.L;
  tf.f.assign(sp.M + 1, -1);
  for (int y = 0; y <= sp.M; ++y)
    for (int x = 0; x <= sp.L; ++x)
      if (pi.theta.at({x, y}) > 0.0) tf.f[y] = x;
  return tf;
}

}  // namespace crl
