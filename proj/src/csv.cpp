#include "crl/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crl::csv {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

const char* action_name(ActionClass a) { return a == ActionClass::High ? "high" : "low"; }

}  // namespace

std::string value_csv(const ValueTable& table) {
  std::ostringstream os;
  os << "# value-table v1\n";
  os << "x,y,value\n";
  for (int i = 0; i < table.size(); ++i) {
    ClientState s = table.space.state(i);
    os << s.x << ',' << s.y << ',' << format_double(table[i]) << '\n';
  }
  return os.str();
}

std::string policy_csv(const DeterministicPolicy& pi) {
  std::ostringstream os;
  os << "# policy-table v1\n";
  os << "x,y,action\n";
  for (int i = 0; i < pi.size(); ++i) {
    ClientState s = pi.space.state(i);
    os << s.x << ',' << s.y << ',' << action_name(pi[i]) << '\n';
  }
  return os.str();
}

std::string thresholds_csv(const std::vector<std::pair<double, ThresholdFunction>>& rows) {
  std::ostringstream os;
  os << "# threshold-table v1\n";
  os << "lambda,y,f\n";
  for (const auto& [lambda, tf] : rows)
    for (size_t y = 0; y < tf.f.size(); ++y)
      os << format_double(lambda) << ',' << y << ',' << tf.f[y] << '\n';
  return os.str();
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "# train-trace v1\n";
  os << "t,client,J_c,J_g,lambda,logZ_mean,gap_avg,violation_avg\n";
  for (const TraceRow& r : rows) {
    os << r.t << ',' << r.client << ',' << format_double(r.J_c) << ',' << format_double(r.J_g)
       << ',' << format_double(r.lambda) << ',' << format_double(r.logZ_mean) << ','
       << format_double(r.gap_avg) << ',' << format_double(r.violation_avg) << '\n';
  }
  return os.str();
}

std::string episode_csv(const EpisodeTrace& trace) {
  std::ostringstream os;
  os << "# episode-trace v1\n";
  os << "t,client,x,y,action,c,g,reset\n";
  for (const StepRecord& r : trace.rows) {
    os << r.t << ',' << r.client << ',' << r.x << ',' << r.y << ',' << action_name(r.action)
       << ',' << format_double(r.c) << ',' << format_double(r.g) << ',' << (r.reset ? 1 : 0)
       << '\n';
  }
  return os.str();
}

std::string metrics_csv(const MetricsSummary& summary) {
  std::ostringstream os;
  os << "# metrics v1\n";
  os << "episode,cost,usage,stall_steps,mean_buffer,qoe\n";
  for (size_t ep = 0; ep < summary.per_episode.size(); ++ep) {
    const Metrics& m = summary.per_episode[ep];
    os << ep << ',' << format_double(m.total_cost()) << ',' << format_double(m.total_usage())
       << ',' << m.stall_steps << ',' << format_double(m.mean_buffer) << ','
       << format_double(m.qoe) << '\n';
  }
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace crl::csv
