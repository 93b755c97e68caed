#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <sys/utsname.h>
#include <vector>

#include "crl/actor_critic.hpp"
#include "crl/checkpoint.hpp"
#include "crl/config.hpp"
#include "crl/csv.hpp"
#include "crl/dp.hpp"
#include "crl/env.hpp"
#include "crl/npg.hpp"
#include "crl/policies.hpp"
#include "crl/rng.hpp"
#include "crl/soft_threshold.hpp"
#include "crl/verify.hpp"

namespace fs = std::filesystem;
using namespace crl;

namespace {

struct CommonOpts {
  std::string config = "tiny";
  std::uint64_t seed = 0;
  std::string out;
  double tol = 0.0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config,
                  "config file path, or a builtin name (tiny, tiny2, reference)");
  o.seed_opt = sub->add_option("--seed", o.seed, "override the top-level seed");
  sub->add_option("--out", o.out, "override the output directory");
  o.tol_opt = sub->add_option("--tol", o.tol, "override the solver tolerance");
}

// Precedence: config file < environment overrides < command line.
ExperimentConfig load_with_overrides(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed_opt != nullptr && o.seed_opt->count() > 0) {
    cfg.seed = o.seed;
    cfg.env.seed = o.seed;
    cfg.train.seed = o.seed;
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.tol_opt != nullptr && o.tol_opt->count() > 0) {
    cfg.solve.tol = o.tol;
    cfg.train.solve_tol = o.tol;
  }
  return cfg;
}

fs::path prepare_out_dir(const ExperimentConfig& cfg, bool write_config = true) {
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  if (write_config)
    csv::write_file((out / "config.json").string(), config_to_json(cfg).dump(2) + "\n");
  return out;
}

std::string pad3(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}

int cmd_solve(const ExperimentConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg);
  const ClientModel& m = cfg.env.clients.at(0);
  const double lmax = derived_lambda_max(cfg);
  const int points = cfg.solve.lambda_grid;

  std::vector<std::pair<double, ThresholdFunction>> thresholds;
  int failures = 0;
  for (int i = 0; i < points; ++i) {
    const double lambda = points > 1 ? lmax * i / (points - 1) : 0.0;
    VIResult vi = value_iteration(m, lambda, cfg.solve.tol);
    csv::write_file((out / ("value_" + pad3(i) + ".csv")).string(), csv::value_csv(vi.J));
    csv::write_file((out / ("policy_" + pad3(i) + ".csv")).string(), csv::policy_csv(vi.policy));
    ThresholdExtraction ex = extract_threshold(vi.policy);
    if (ex.is_threshold()) {
      thresholds.emplace_back(lambda, *ex.threshold);
    } else {
      ++failures;
      std::cout << "note: optimal policy at lambda=" << lambda << " is not a threshold (y="
                << ex.witness->y << ": low at x=" << ex.witness->x_low << ", high at x="
                << ex.witness->x_high << "); omitted from thresholds.csv\n";
    }
  }
  csv::write_file((out / "thresholds.csv").string(), csv::thresholds_csv(thresholds));

  // Observed, not asserted: whether the cutoff recedes as the multiplier grows.
  bool monotone = true;
  for (int y = 0; y <= m.M; ++y)
    for (size_t i = 0; i + 1 < thresholds.size(); ++i)
      if (thresholds[i + 1].second.f[y] > thresholds[i].second.f[y]) monotone = false;
  std::cout << "solved " << points << " multiplier points over [0, " << lmax << "] for client 0, "
            << failures << " non-threshold\n"
            << "threshold f(y) non-increasing in lambda: " << (monotone ? "yes" : "no")
            << " (reported only)\n"
            << "wrote " << out.string() << "\n";
  return 0;
}

Checkpoint make_exact_checkpoint(const ExactRunState& s, std::uint64_t hash) {
  Checkpoint ck;
  ck.kind = "exact";
  ck.config_hash = hash;
  ck.exact = s;
  return ck;
}

Checkpoint make_ac_checkpoint(const AcRunState& s, std::uint64_t hash) {
  Checkpoint ck;
  ck.kind = "ac";
  ck.config_hash = hash;
  ck.ac = s;
  return ck;
}

int cmd_train(const ExperimentConfig& cfg, bool exact) {
  const fs::path out = prepare_out_dir(cfg);
  const std::string ck_path = (out / "checkpoint.json").string();
  const std::uint64_t hash = config_hash(cfg);
  const auto clients = client_specs(cfg);
  const std::string kind = exact ? "exact" : "ac";

  Checkpoint resume;
  bool resuming = false;
  if (fs::exists(ck_path)) {
    resume = load_checkpoint(ck_path);
    if (resume.config_hash != hash) {
      std::cerr << "error: " << ck_path << " was produced by a different config (hash mismatch)\n";
      return 1;
    }
    if (resume.kind != kind) {
      std::cerr << "error: " << ck_path << " holds '" << resume.kind << "' training state, not '"
                << kind << "'\n";
      return 1;
    }
    resuming = true;
  }

  TrainTrace trace;
  if (exact) {
    ExactPrimalDual loop(clients, cfg.train);
    if (resuming) loop.restore(std::move(resume.exact));
    const int start_t = loop.t();
    while (!loop.done()) {
      loop.step();
      if (cfg.train.checkpoint_every > 0 && loop.t() % cfg.train.checkpoint_every == 0)
        save_checkpoint(ck_path, make_exact_checkpoint(loop.state(), hash));
    }
    save_checkpoint(ck_path, make_exact_checkpoint(loop.state(), hash));
    trace = loop.finish();
    std::cout << "exact primal-dual: " << (loop.t() - start_t) << " iterations run ("
              << start_t << " restored)\n";
  } else {
    ThresholdNpg loop(clients, cfg.train);
    if (resuming) loop.restore(std::move(resume.ac));
    const int start_t = loop.t();
    while (!loop.done()) {
      loop.step();
      if (cfg.train.checkpoint_every > 0 && loop.t() % cfg.train.checkpoint_every == 0)
        save_checkpoint(ck_path, make_ac_checkpoint(loop.snapshot(), hash));
    }
    save_checkpoint(ck_path, make_ac_checkpoint(loop.snapshot(), hash));
    trace = loop.finish();
    std::cout << "stochastic threshold npg: " << (loop.t() - start_t) << " steps run ("
              << start_t << " restored)\n";
  }

  csv::write_file((out / "trace.csv").string(), csv::trace_csv(trace.rows));
  std::cout << "final lambda " << csv::format_double(trace.final_lambda) << ", trace rows "
            << trace.rows.size() << "\n";
  if (trace.has_oracle)
    std::cout << "dual oracle: lambda* " << trace.oracle.lambda_star << ", optimal cost "
              << trace.oracle.optimal_cost << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& policy_name, int episodes) {
  const fs::path out = prepare_out_dir(cfg);
  const size_t n_clients = cfg.env.clients.size();

  PolicyBundle bundle;
  bool needs_artifacts = false;
  if (policy_name == "vanilla") {
    bundle.kind = PolicyKind::Vanilla;
  } else if (policy_name == "greedy") {
    bundle.kind = PolicyKind::GreedyBuffer;
  } else if (policy_name == "threshold") {
    bundle.kind = PolicyKind::HardThreshold;
    needs_artifacts = true;
  } else if (policy_name == "index" || policy_name == "index-value") {
    bundle.kind = PolicyKind::Index;
    bundle.index_score = policy_name == "index" ? IndexScore::Logit : IndexScore::Value;
    needs_artifacts = true;
  } else if (policy_name == "soft") {
    bundle.kind = PolicyKind::SoftThreshold;
    needs_artifacts = true;
  } else {
    std::cerr << "error: unknown policy '" << policy_name
              << "' (vanilla, greedy, threshold, index, index-value, soft)\n";
    return 1;
  }

  if (needs_artifacts) {
    if (cfg.checkpoint.empty()) {
      std::cerr << "error: policy '" << policy_name
                << "' needs a trained artifact; set \"checkpoint\" in the config\n";
      return 1;
    }
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    std::vector<SoftThresholdPolicy> policies = checkpoint_policies(ck);
    if (policies.size() < n_clients) {
      std::cerr << "error: checkpoint holds " << policies.size() << " policies for "
                << n_clients << " clients\n";
      return 1;
    }
    policies.resize(n_clients);
    if (bundle.kind == PolicyKind::HardThreshold) {
      for (const SoftThresholdPolicy& p : policies) bundle.thresholds.push_back(hard_threshold(p));
    } else {
      bundle.soft = std::move(policies);
    }
    if (bundle.index_score == IndexScore::Value && bundle.kind == PolicyKind::Index) {
      std::vector<ValueTable> values = checkpoint_values(ck);
      if (values.size() < n_clients) {
        std::cerr << "error: checkpoint has no per-client value tables (exact runs do not "
                     "keep them); index-value needs a stochastic-training checkpoint\n";
        return 1;
      }
      values.resize(n_clients);
      bundle.values = std::move(values);
    }
  }

  MetricsSummary summary = evaluate_policy_in_env(bundle, cfg.env, episodes);
  csv::write_file((out / "metrics.csv").string(), csv::metrics_csv(summary));
  std::cout << policy_name << " over " << episodes << " episodes:\n"
            << "  discounted cost " << summary.cost_mean << " +- " << summary.cost_se << "\n"
            << "  discounted usage " << summary.usage_mean << " +- " << summary.usage_se << "\n"
            << "  stalled steps " << summary.stalls_mean << " +- " << summary.stalls_se << "\n"
            << "  qoe proxy " << summary.qoe_mean << " +- " << summary.qoe_se << "\n"
            << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg);
  VerificationReport report = run_verification(cfg);
  csv::write_file((out / "report.json").string(), report_json(report).dump(2) + "\n");
  const std::string text = report_text(report);
  csv::write_file((out / "report.txt").string(), text);
  std::cout << text;
  return report.pass() ? 0 : 2;
}

struct BenchStats {
  double p50 = 0.0, p90 = 0.0, p99 = 0.0, max = 0.0;
};

BenchStats percentiles(std::vector<double>& ns) {
  std::sort(ns.begin(), ns.end());
  auto at = [&](double q) { return ns[static_cast<size_t>(q * (ns.size() - 1))]; };
  return {at(0.5), at(0.9), at(0.99), ns.back()};
}

volatile std::uint64_t bench_sink = 0;

template <typename F>
BenchStats time_op(int samples, int reps_per_sample, F&& op) {
  std::vector<double> ns(samples);
  for (int i = 0; i < samples; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps_per_sample; ++r) bench_sink = bench_sink + op();
    auto t1 = std::chrono::steady_clock::now();
    ns[i] = std::chrono::duration<double, std::nano>(t1 - t0).count() / reps_per_sample;
  }
  return percentiles(ns);
}

int cmd_bench(const ExperimentConfig& cfg) {
  const fs::path out = prepare_out_dir(cfg, false);
  const ClientModel& m = cfg.env.clients.at(0);
  const int N = static_cast<int>(cfg.env.clients.size());
  const int K = std::max(cfg.env.K, 1);
  const StateSpace sp = m.space();

  VIResult vi = value_iteration(m, 1.0, 1e-6);
  ThresholdExtraction ex = extract_threshold(vi.policy);
  ThresholdFunction tf = ex.is_threshold() ? *ex.threshold : ThresholdFunction{std::vector<int>(m.M + 1, m.L / 2), m.L};
  SoftThresholdPolicy soft = from_hard_threshold(tf, sp);
  std::vector<SoftThresholdPolicy> policies(N, soft);

  Rng rng = Rng::substream(cfg.seed, {stream::kBench});
  const int kStates = 4096;
  std::vector<ClientState> pool(kStates);
  for (ClientState& s : pool)
    s = {static_cast<int>(rng.uniform01() * (m.L + 1)), static_cast<int>(rng.uniform01() * (m.M + 1))};
  std::vector<std::vector<ClientState>> joint(kStates, std::vector<ClientState>(N));
  for (auto& js : joint)
    for (ClientState& s : js)
      s = pool[static_cast<size_t>(rng.uniform01() * kStates)];

  const int samples = 20001;
  int i = 0;
  BenchStats hard = time_op(samples, 64, [&] {
    const ClientState& s = pool[i++ & (kStates - 1)];
    return static_cast<std::uint64_t>(hard_threshold_action(tf, s));
  });
  i = 0;
  BenchStats soft_eval = time_op(samples, 64, [&] {
    const ClientState& s = pool[i++ & (kStates - 1)];
    return static_cast<std::uint64_t>(soft.p_high(s) > 0.5);
  });
  i = 0;
  BenchStats index = time_op(samples, 16, [&] {
    Assignment a = index_assign(policies, joint[i++ & (kStates - 1)], K);
    return static_cast<std::uint64_t>(high_count(a));
  });

  utsname uts{};
  uname(&uts);
  std::string cpu = "unknown cpu";
  {
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line))
      if (line.rfind("model name", 0) == 0) {
        cpu = line.substr(line.find(':') + 2);
        break;
      }
  }

  std::ostringstream os;
  os << "single-decision latency, nanoseconds (" << samples << " samples, batched)\n"
     << "machine: " << uts.sysname << " " << uts.release << " " << uts.machine << ", " << cpu
     << "\ncompiler: " << __VERSION__ << "\n\n";
  auto row = [&](const char* name, const BenchStats& b) {
    os << name << "  p50 " << b.p50 << "  p90 " << b.p90 << "  p99 " << b.p99 << "  max "
       << b.max << "\n";
  };
  row("hard-threshold decision (1 client)   ", hard);
  row("soft-policy evaluation (1 client)    ", soft_eval);
  std::string idx_label = "index assignment (" + std::to_string(N) + " clients, K=" +
                          std::to_string(K) + ")";
  idx_label.resize(37, ' ');
  row(idx_label.c_str(), index);
  os << "\nno assertions; measurements vary run to run\n";

  csv::write_file((out / "bench.txt").string(), os.str());
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"threshold policies for constrained streaming MDPs"};
  app.require_subcommand(1);

  CommonOpts solve_o, train_o, eval_o, verify_o, bench_o;
  bool exact = false, ac = false;
  std::string policy = "vanilla";
  int episodes = 100;

  CLI::App* solve = app.add_subcommand("solve", "value-iterate across a multiplier grid");
  add_common(solve, solve_o);
  CLI::App* train = app.add_subcommand("train", "run primal-dual training");
  add_common(train, train_o);
  train->add_flag("--exact", exact, "exact advantages, simultaneous updates");
  train->add_flag("--ac", ac, "sampled actor-critic loop");
  CLI::App* evaluate = app.add_subcommand("evaluate", "roll episodes under a decision rule");
  add_common(evaluate, eval_o);
  evaluate->add_option("--policy", policy,
                       "vanilla | greedy | threshold | index | index-value | soft");
  evaluate->add_option("--episodes", episodes, "episode count");
  CLI::App* verify = app.add_subcommand("verify", "run the verification report");
  add_common(verify, verify_o);
  CLI::App* bench = app.add_subcommand("bench", "decision-latency microbenchmark");
  add_common(bench, bench_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(load_with_overrides(solve_o));
    if (train->parsed()) {
      if (exact == ac) {
        std::cerr << "error: train needs exactly one of --exact, --ac\n";
        return 1;
      }
      return cmd_train(load_with_overrides(train_o), exact);
    }
    if (evaluate->parsed()) {
      if (episodes < 1) {
        std::cerr << "error: --episodes must be positive\n";
        return 1;
      }
      return cmd_evaluate(load_with_overrides(eval_o), policy, episodes);
    }
    if (verify->parsed()) return cmd_verify(load_with_overrides(verify_o));
    if (bench->parsed()) return cmd_bench(load_with_overrides(bench_o));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
