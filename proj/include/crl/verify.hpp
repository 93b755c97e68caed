#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "crl/config.hpp"

namespace crl {

struct CheckResult {
  std::string name;
  bool pass = false;
  double slack = 0.0;  // worst measured deviation, sign convention per check
  double tol = 0.0;
  std::string note;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool pass() const {
    for (const CheckResult& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Known check names, in report order: threshold-structure, monotone-differences,
// switching-condition, lemma4-equivalence, corollary1-identity,
// improvement-lemma, theorem3-bounds, decentralization-slackness.
// cfg.reports selects a subset (empty = all). When cfg.checkpoint names a
// file, the lemma4 check audits the logit tables stored there instead of
// drawing random ones.
VerificationReport run_verification(const ExperimentConfig& cfg);

nlohmann::json report_json(const VerificationReport& report);
std::string report_text(const VerificationReport& report);

}  // namespace crl
