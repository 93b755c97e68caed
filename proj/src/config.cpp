#include "crl/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace crl {

using nlohmann::json;

namespace {

json model_to_json(const ClientModel& m) {
  return json{{"mu_high", m.mu_high}, {"mu_low", m.mu_low},   {"beta", m.beta},
              {"alpha", m.alpha},     {"L", m.L},             {"M", m.M},
              {"gamma", m.gamma},     {"delta", m.cost.delta}, {"c_stall", m.cost.c_stall},
              {"c_term", m.cost.c_term}, {"normalize", m.cost.normalize}};
}

ClientModel model_from_json(const json& j) {
  ClientModel m;
  m.mu_high = j.at("mu_high").get<double>();
  m.mu_low = j.at("mu_low").get<double>();
  m.beta = j.at("beta").get<double>();
  m.alpha = j.at("alpha").get<double>();
  m.L = j.at("L").get<int>();
  m.M = j.at("M").get<int>();
  m.gamma = j.at("gamma").get<double>();
  m.cost.delta = j.at("delta").get<double>();
  m.cost.c_stall = j.at("c_stall").get<double>();
  m.cost.c_term = j.at("c_term").get<double>();
  m.cost.normalize = j.at("normalize").get<bool>();
  return m;
}

std::string mode_name(ConstraintMode m) { return m == ConstraintMode::Hard ? "hard" : "soft"; }

ConstraintMode mode_from_name(const std::string& s) {
  if (s == "hard") return ConstraintMode::Hard;
  if (s == "soft") return ConstraintMode::Soft;
  throw std::invalid_argument("unknown constraint mode: " + s);
}

std::string advantage_name(AdvantageMode m) {
  return m == AdvantageMode::ModelBased ? "model_based" : "sampled";
}

AdvantageMode advantage_from_name(const std::string& s) {
  if (s == "model_based") return AdvantageMode::ModelBased;
  if (s == "sampled") return AdvantageMode::Sampled;
  throw std::invalid_argument("unknown advantage mode: " + s);
}

std::string update_name(UpdateMode m) {
  return m == UpdateMode::Difference ? "difference" : "a1_only";
}

UpdateMode update_from_name(const std::string& s) {
  if (s == "difference") return UpdateMode::Difference;
  if (s == "a1_only") return UpdateMode::A1Only;
  throw std::invalid_argument("unknown update mode: " + s);
}

std::string dual_target_name(DualTarget t) {
  return t == DualTarget::DiscountedBudget ? "discounted" : "per_step";
}

DualTarget dual_target_from_name(const std::string& s) {
  if (s == "discounted") return DualTarget::DiscountedBudget;
  if (s == "per_step") return DualTarget::PerStepBudget;
  throw std::invalid_argument("unknown dual target: " + s);
}

// Accepts "uniform", "zero" (point mass at (0,0)) or an explicit array;
// always serialized back as the explicit array.
std::vector<double> rho_from_json(const json& j, const StateSpace& sp) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "uniform") return uniform_rho(sp);
    if (s == "zero") return point_mass_rho(sp, {0, 0});
    throw std::invalid_argument("unknown start distribution shorthand: " + s);
  }
  auto rho = j.get<std::vector<double>>();
  if (static_cast<int>(rho.size()) != sp.size())
    throw std::invalid_argument("start distribution length does not match the state space");
  return rho;
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
  json env;
  env["clients"] = json::array();
  for (const ClientModel& m : cfg.env.clients) env["clients"].push_back(model_to_json(m));
  env["rho"] = cfg.env.rho;
  env["K"] = cfg.env.K;
  env["mode"] = mode_name(cfg.env.mode);
  env["horizon"] = cfg.env.horizon;
  env["mu_share"] = cfg.env.mu_share;

  json train;
  train["T"] = cfg.train.T;
  train["eta1"] = cfg.train.eta1;
  train["eta2"] = cfg.train.eta2;
  train["K_bar"] = cfg.train.K_bar;
  train["xi"] = cfg.train.xi;
  train["lambda_max"] = cfg.train.lambda_max;
  train["advantage_mode"] = advantage_name(cfg.train.advantage_mode);
  train["update_mode"] = update_name(cfg.train.update_mode);
  train["dual_target"] = dual_target_name(cfg.train.dual_target);
  train["solve_tol"] = cfg.train.solve_tol;
  train["oracle_grid_step"] = cfg.train.oracle_grid_step;
  train["compute_oracle"] = cfg.train.compute_oracle;
  train["trace_every"] = cfg.train.trace_every;
  train["checkpoint_every"] = cfg.train.checkpoint_every;

  json solve;
  solve["tol"] = cfg.solve.tol;
  solve["lambda_grid"] = cfg.solve.lambda_grid;
  solve["lambda_max"] = cfg.solve.lambda_max;

  return json{{"name", cfg.name},       {"env", env},
              {"train", train},         {"solve", solve},
              {"seed", cfg.seed},       {"out_dir", cfg.out_dir},
              {"checkpoint", cfg.checkpoint}, {"reports", cfg.reports}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.name = j.at("name").get<std::string>();

  const json& env = j.at("env");
  for (const json& m : env.at("clients")) cfg.env.clients.push_back(model_from_json(m));
  const json& rho = env.at("rho");
  if (!rho.is_array() || rho.size() != cfg.env.clients.size())
    throw std::invalid_argument("need one start distribution per client");
  for (size_t n = 0; n < cfg.env.clients.size(); ++n)
    cfg.env.rho.push_back(rho_from_json(rho[n], cfg.env.clients[n].space()));
  cfg.env.K = env.at("K").get<int>();
  cfg.env.mode = mode_from_name(env.at("mode").get<std::string>());
  cfg.env.horizon = env.at("horizon").get<int>();
  cfg.env.mu_share = env.value("mu_share", -1.0);

  const json& train = j.at("train");
  cfg.train.T = train.at("T").get<int>();
  cfg.train.eta1 = train.at("eta1").get<double>();
  cfg.train.eta2 = train.value("eta2", 0.0);
  cfg.train.K_bar = train.at("K_bar").get<double>();
  cfg.train.xi = train.value("xi", 0.0);
  cfg.train.lambda_max = train.value("lambda_max", 0.0);
  cfg.train.advantage_mode = advantage_from_name(train.value("advantage_mode", "model_based"));
  cfg.train.update_mode = update_from_name(train.value("update_mode", "difference"));
  cfg.train.dual_target = dual_target_from_name(train.value("dual_target", "discounted"));
  cfg.train.solve_tol = train.value("solve_tol", 1e-9);
  cfg.train.oracle_grid_step = train.value("oracle_grid_step", 1e-3);
  cfg.train.compute_oracle = train.value("compute_oracle", true);
  cfg.train.trace_every = train.value("trace_every", 0);
  cfg.train.checkpoint_every = train.value("checkpoint_every", 0);

  const json& solve = j.at("solve");
  cfg.solve.tol = solve.value("tol", 1e-9);
  cfg.solve.lambda_grid = solve.value("lambda_grid", 21);
  cfg.solve.lambda_max = solve.value("lambda_max", 0.0);

  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.out_dir = j.value("out_dir", "out");
  cfg.checkpoint = j.value("checkpoint", "");
  cfg.reports = j.value("reports", std::vector<std::string>{});

  cfg.env.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

ExperimentConfig load_config(const std::string& path_or_name) {
  ExperimentConfig cfg;
  if (std::filesystem::exists(path_or_name)) {
    std::ifstream in(path_or_name);
    json j;
    in >> j;
    cfg = config_from_json(j);
  } else if (path_or_name == "tiny") {
    cfg = tiny_config();
  } else if (path_or_name == "tiny2") {
    cfg = tiny_pair_config();
  } else if (path_or_name == "reference") {
    cfg = reference_config();
  } else {
    throw std::invalid_argument("config not found: " + path_or_name);
  }
  if (const char* out = std::getenv("THRESHOLD_CRL_OUT")) cfg.out_dir = out;
  if (const char* seed = std::getenv("THRESHOLD_CRL_SEED")) {
    cfg.seed = std::strtoull(seed, nullptr, 10);
    cfg.env.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
  }
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // Output locations do not change what an experiment computes, so they stay
  // out of the hash; a resumed run may legitimately write somewhere new.
  json j = config_to_json(cfg);
  j.erase("out_dir");
  j.erase("checkpoint");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  ClientModel m = tiny_model();
  cfg.env.clients = {m};
  cfg.env.rho = {uniform_rho(m.space())};
  cfg.env.K = 1;
  cfg.env.mode = ConstraintMode::Soft;
  cfg.env.horizon = 200;
  cfg.train.T = 400;
  cfg.train.K_bar = 1.0 / (1.0 - m.gamma);  // one slot, never binding
  cfg.seed = 1;
  cfg.env.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig tiny_pair_config() {
  ExperimentConfig cfg;
  cfg.name = "tiny2";
  ClientModel m = tiny_model();
  cfg.env.clients = {m, m};
  cfg.env.rho = {uniform_rho(m.space()), uniform_rho(m.space())};
  cfg.env.K = 1;
  cfg.env.mode = ConstraintMode::Soft;
  cfg.env.horizon = 200;
  cfg.train.T = 400;
  cfg.train.K_bar = 0.5 / (1.0 - m.gamma);  // binding: half a slot between two clients
  cfg.seed = 1;
  cfg.env.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig reference_config() {
  ExperimentConfig cfg;
  cfg.name = "reference";
  ClientModel m = reference_model();
  cfg.env.clients.assign(6, m);
  for (int n = 0; n < 6; ++n) cfg.env.rho.push_back(point_mass_rho(m.space(), {0, 0}));
  cfg.env.K = 2;
  cfg.env.mode = ConstraintMode::Hard;
  cfg.env.horizon = 200;
  cfg.train.T = 200000;
  cfg.train.K_bar = 2.0 / (1.0 - m.gamma);
  cfg.train.dual_target = DualTarget::PerStepBudget;
  cfg.train.compute_oracle = false;
  cfg.seed = 1;
  cfg.env.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

std::vector<ClientSpec> client_specs(const ExperimentConfig& cfg) {
  std::vector<ClientSpec> out;
  out.reserve(cfg.env.clients.size());
  for (size_t n = 0; n < cfg.env.clients.size(); ++n)
    out.push_back({cfg.env.clients[n], cfg.env.rho[n]});
  return out;
}

double derived_lambda_max(const ExperimentConfig& cfg) {
  if (cfg.solve.lambda_max > 0.0) return cfg.solve.lambda_max;
  if (cfg.train.lambda_max > 0.0) return cfg.train.lambda_max;
  const double gamma = cfg.env.clients.at(0).gamma;
  const double xi = cfg.train.xi > 0.0 ? cfg.train.xi : cfg.train.K_bar;
  const double N = static_cast<double>(cfg.env.clients.size());
  return 2.0 * N / ((1.0 - gamma) * xi);
}

}  // namespace crl
