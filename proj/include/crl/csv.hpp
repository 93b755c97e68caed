#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crl/dp.hpp"
#include "crl/env.hpp"
#include "crl/npg.hpp"

namespace crl::csv {

// All CSV emitters share one float format (%.12g) and carry a versioned
// header comment; golden tests pin the exact bytes.

std::string format_double(double v);

std::string value_csv(const ValueTable& table);
std::string policy_csv(const DeterministicPolicy& pi);
std::string thresholds_csv(const std::vector<std::pair<double, ThresholdFunction>>& rows);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string episode_csv(const EpisodeTrace& trace);
std::string metrics_csv(const MetricsSummary& summary);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace crl::csv
