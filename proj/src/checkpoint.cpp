#include "crl/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>

namespace crl {

using nlohmann::json;

namespace {

json space_to_json(const StateSpace& sp) { return json{{"L", sp.L}, {"M", sp.M}}; }

StateSpace space_from_json(const json& j) {
  return {j.at("L").get<int>(), j.at("M").get<int>()};
}

template <class T>
json table_to_json(const StateTable<T>& t) {
  return json{{"space", space_to_json(t.space)}, {"v", t.v}};
}

template <class T>
StateTable<T> table_from_json(const json& j) {
  StateTable<T> t(space_from_json(j.at("space")));
  t.v = j.at("v").get<std::vector<T>>();
  if (static_cast<int>(t.v.size()) != t.space.size())
    throw std::invalid_argument("table length does not match its state space");
  return t;
}

json dual_to_json(const DualState& d) {
  return json{{"lambda", d.lambda}, {"lambda_max", d.lambda_max}, {"eta2", d.eta2}};
}

DualState dual_from_json(const json& j) {
  return {j.at("lambda").get<double>(), j.at("lambda_max").get<double>(),
          j.at("eta2").get<double>()};
}

json rows_to_json(const std::vector<TraceRow>& rows) {
  json out = json::array();
  for (const TraceRow& r : rows)
    out.push_back(json::array(
        {r.t, r.client, r.J_c, r.J_g, r.lambda, r.logZ_mean, r.gap_avg, r.violation_avg}));
  return out;
}

std::vector<TraceRow> rows_from_json(const json& j) {
  std::vector<TraceRow> rows;
  rows.reserve(j.size());
  for (const json& r : j) {
    if (r.size() != 8) throw std::invalid_argument("trace row needs 8 fields");
    rows.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<double>(), r[3].get<double>(),
                    r[4].get<double>(), r[5].get<double>(), r[6].get<double>(),
                    r[7].get<double>()});
  }
  return rows;
}

json exact_to_json(const ExactRunState& s) {
  json theta = json::array();
  for (const SoftThresholdPolicy& p : s.theta) theta.push_back(table_to_json(p.theta));
  return json{{"theta", theta},         {"dual", dual_to_json(s.dual)},
              {"t", s.t},               {"cost_sum", s.cost_sum},
              {"usage_sum", s.usage_sum}, {"rows", rows_to_json(s.rows)}};
}

ExactRunState exact_from_json(const json& j) {
  ExactRunState s;
  for (const json& t : j.at("theta")) {
    SoftThresholdPolicy p;
    p.theta = table_from_json<double>(t);
    s.theta.push_back(std::move(p));
  }
  s.dual = dual_from_json(j.at("dual"));
  s.t = j.at("t").get<int>();
  s.cost_sum = j.at("cost_sum").get<double>();
  s.usage_sum = j.at("usage_sum").get<double>();
  s.rows = rows_from_json(j.at("rows"));
  return s;
}

json ac_to_json(const AcRunState& s) {
  json learners = json::array();
  for (const ClientLearner& cl : s.learners)
    learners.push_back(json{{"theta", table_to_json(cl.policy.theta)},
                            {"J", table_to_json(cl.J)},
                            {"counts", table_to_json(cl.counts)},
                            {"x", cl.s.x},
                            {"y", cl.s.y}});
  return json{{"learners", learners},
              {"dual", dual_to_json(s.dual)},
              {"t", s.t},
              {"cost_sum", s.cost_sum},
              {"usage_sum", s.usage_sum},
              {"rows", rows_to_json(s.rows)},
              {"sampled_usage", s.sampled_usage},
              {"rng", s.rng_state}};
}

AcRunState ac_from_json(const json& j) {
  AcRunState s;
  for (const json& l : j.at("learners")) {
    ClientLearner cl;
    cl.policy.theta = table_from_json<double>(l.at("theta"));
    cl.J = table_from_json<double>(l.at("J"));
    cl.counts = table_from_json<int>(l.at("counts"));
    cl.s = {l.at("x").get<int>(), l.at("y").get<int>()};
    s.learners.push_back(std::move(cl));
  }
  s.dual = dual_from_json(j.at("dual"));
  s.t = j.at("t").get<int>();
  s.cost_sum = j.at("cost_sum").get<double>();
  s.usage_sum = j.at("usage_sum").get<double>();
  s.rows = rows_from_json(j.at("rows"));
  s.sampled_usage = j.at("sampled_usage").get<std::vector<double>>();
  s.rng_state = j.at("rng").get<std::string>();
  return s;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ck) {
  json j{{"version", ck.version}, {"kind", ck.kind}, {"config_hash", ck.config_hash}};
  if (ck.kind == "exact")
    j["state"] = exact_to_json(ck.exact);
  else if (ck.kind == "ac")
    j["state"] = ac_to_json(ck.ac);
  else
    throw std::invalid_argument("unknown checkpoint kind: " + ck.kind);
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ck;
  ck.version = j.at("version").get<int>();
  if (ck.version != 1) throw std::invalid_argument("unsupported checkpoint version");
  ck.kind = j.at("kind").get<std::string>();
  ck.config_hash = j.at("config_hash").get<std::uint64_t>();
  if (ck.kind == "exact")
    ck.exact = exact_from_json(j.at("state"));
  else if (ck.kind == "ac")
    ck.ac = ac_from_json(j.at("state"));
  else
    throw std::invalid_argument("unknown checkpoint kind: " + ck.kind);
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << checkpoint_to_json(ck).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  in >> j;
  return checkpoint_from_json(j);
}

std::vector<SoftThresholdPolicy> checkpoint_policies(const Checkpoint& ck) {
  std::vector<SoftThresholdPolicy> out;
  if (ck.kind == "exact") {
    out = ck.exact.theta;
  } else {
    for (const ClientLearner& cl : ck.ac.learners) out.push_back(cl.policy);
  }
  return out;
}

std::vector<ValueTable> checkpoint_values(const Checkpoint& ck) {
  std::vector<ValueTable> out;
  if (ck.kind == "ac")
    for (const ClientLearner& cl : ck.ac.learners) out.push_back(cl.J);
  return out;
}

}  // namespace crl
