// hflsim: instance generation, experiment runs, single-trial replay and
// invariant verification for the two-level incentive game.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfl/coalition_game.hpp"
#include "hfl/digest.hpp"
#include "hfl/experiment.hpp"
#include "hfl/serialization.hpp"
#include "hfl/stackelberg.hpp"
#include "hfl/utility.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNonConvergence = 2;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw hfl::SpecError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw hfl::SpecError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::vector<hfl::PreferenceRule> parse_rules(const std::string& list) {
  std::vector<hfl::PreferenceRule> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) {
      try {
        out.push_back(hfl::parse_rule(item));
      } catch (const std::invalid_argument& e) {
        throw hfl::SpecError(e.what());
      }
    }
  if (out.empty()) throw hfl::SpecError("rule list must not be empty");
  return out;
}

struct Common {
  std::string spec_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string rules;
  std::string scenario;
  bool trace_gp = false;
  std::optional<int> workers;
};

hfl::ExperimentSpec load_spec(const Common& c) {
  hfl::ExperimentSpec spec =
      c.spec_file.empty() ? hfl::ExperimentSpec{} : hfl::spec_from_json(read_json(c.spec_file));
  if (!c.scenario.empty()) spec.scenario = hfl::parse_scenario(c.scenario);
  if (c.seed) spec.seed = *c.seed;
  if (c.trials) spec.trials = *c.trials;
  if (!c.rules.empty()) spec.rules = parse_rules(c.rules);
  if (c.trace_gp) spec.trace_gp = true;
  if (c.workers) spec.workers = *c.workers;
  spec.validate();
  return spec;
}

json state_report(const hfl::NetworkInstance& inst, const hfl::FormationResult& f,
                  hfl::PreferenceRule rule) {
  const auto& p = f.state.partition;
  json coalitions = json::array();
  for (std::size_t l = 0; l < p.num_edges(); ++l) {
    json c = {{"edge", l}, {"size", p.size(l)}, {"coalition_utility",
                                                 hfl::coalition_utility(inst, p.view(l))}};
    if (!p.members(l).empty()) {
      const auto aux = hfl::stackelberg::make_auxiliary(inst, p.view(l));
      const int k = p.agg_count(l);
      if (aux.participating() && k >= 1 && k <= aux.max_feasible_k)
        c["edge_utility"] = hfl::stackelberg::edge_utility(inst, aux, k, f.state.chi[l]);
    }
    coalitions.push_back(std::move(c));
  }
  json traj = json::array();
  for (double v : f.potential_per_accept) traj.push_back(v);
  return {{"rule", std::string(hfl::to_string(rule))},
          {"state", hfl::to_json(f.state)},
          {"total_utility", hfl::total_utility(inst, p)},
          {"coalitions", std::move(coalitions)},
          {"converged", f.converged},
          {"attempts", f.attempts},
          {"stability_checks", f.stability_checks},
          {"psi_per_accept", std::move(traj)},
          {"diagnostic", f.diagnostic}};
}

int cmd_gen(const Common& c, int trial, double axis_value, const std::string& out) {
  const auto spec = load_spec(c);
  const auto axis = hfl::axis_values(spec);
  const double v = std::isnan(axis_value) ? axis.front() : axis_value;
  std::vector<std::size_t> assignment;
  const auto inst = hfl::trial_instance(spec, v, trial, &assignment);
  json j = hfl::to_json(inst);
  j["initial_assignment"] = assignment;
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_text(out, text);
  std::cerr << "instance sha256 " << hfl::sha256_hex(hfl::to_json(inst).dump()) << "\n";
  return kExitOk;
}

int cmd_run(const Common& c, const std::string& out) {
  const auto spec = load_spec(c);
  const auto result = hfl::run_experiment(spec);
  hfl::emit(result, out);
  std::cerr << "runs " << result.runs << ", non-converged " << result.nonconverged << " -> "
            << out << "\n";
  if (result.nonconvergence_fraction() > spec.max_nonconvergence) {
    std::cerr << "non-convergence fraction " << result.nonconvergence_fraction()
              << " exceeds " << spec.max_nonconvergence << "\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_replay(const Common& c, const std::string& instance_file, const std::string& out) {
  const json ij = read_json(instance_file);
  const auto inst = hfl::instance_from_json(ij);
  const std::uint64_t seed = c.seed.value_or(1);
  const auto rules = c.rules.empty() ? hfl::ExperimentSpec{}.rules : parse_rules(c.rules);
  hfl::FormationConfig config;
  if (!c.spec_file.empty()) config = hfl::spec_from_json(read_json(c.spec_file)).formation;

  std::vector<std::size_t> assignment;
  if (ij.contains("initial_assignment")) {
    assignment = ij.at("initial_assignment").get<std::vector<std::size_t>>();
  } else {
    hfl::Rng rng(hfl::derive_seed(seed, 0, 2));
    assignment = hfl::random_assignment(inst, rng);
  }
  bool all_converged = true;
  json summary = {{"instance_sha256", hfl::sha256_hex(hfl::to_json(inst).dump())},
                  {"seed", seed},
                  {"runs", json::array()}};
  for (auto rule : rules) {
    hfl::Rng rng(hfl::derive_seed(seed, 0, 1));
    const auto f = hfl::run_formation(inst, rule, assignment, rng, config);
    all_converged = all_converged && f.converged;
    const std::string name(hfl::to_string(rule));
    const json report = state_report(inst, f, rule);
    std::ostringstream log;
    hfl::write_switch_log_csv(log, f.log);
    if (!out.empty()) {
      write_text(fs::path(out) / ("trial_" + name + ".json"), report.dump(2) + "\n");
      write_text(fs::path(out) / ("switch_log_" + name + ".csv"), log.str());
    }
    summary["runs"].push_back({{"rule", name},
                               {"total_utility", report.at("total_utility")},
                               {"converged", f.converged},
                               {"attempts", f.attempts}});
  }
  if (!out.empty()) write_text(fs::path(out) / "instance.json", ij.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return all_converged ? kExitOk : kExitNonConvergence;
}

bool close_rel(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max(1.0, std::fabs(b));
}

int cmd_verify(const std::string& instance_file, const std::string& trial_file) {
  const auto inst = hfl::instance_from_json(read_json(instance_file));
  const json report = read_json(trial_file);
  const auto rule = hfl::parse_rule(report.at("rule").get<std::string>());
  const auto state = hfl::state_from_json(report.at("state"));
  const auto& p = state.partition;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  bool structure = true;
  std::string why;
  try {
    p.check_invariants(inst.config().total_bandwidth);
  } catch (const std::exception& e) {
    structure = false;
    why = e.what();
  }
  check("partition, bandwidth simplex and counts consistent", structure, why);
  check("one entry per device", p.num_devices() == inst.num_devices());

  bool counts_ok = true;
  for (std::size_t l = 0; l < p.num_edges(); ++l) {
    if (p.members(l).empty()) continue;
    const auto aux = hfl::stackelberg::make_auxiliary(inst, p.view(l));
    const int k = p.agg_count(l);
    if (aux.participating()) counts_ok = counts_ok && k >= 1 && k <= aux.max_feasible_k;
    else counts_ok = counts_ok && k == 1;
  }
  check("aggregation counts within [1, K_feas]", counts_ok);

  const double total = hfl::total_utility(inst, p);
  check("total utility recomputes to 1e-9 relative",
        close_rel(total, report.at("total_utility").get<double>(), 1e-9));
  bool coalitions_ok = true;
  for (const auto& c : report.at("coalitions")) {
    const auto l = c.at("edge").get<std::size_t>();
    coalitions_ok = coalitions_ok && close_rel(hfl::coalition_utility(inst, p.view(l)),
                                               c.at("coalition_utility").get<double>(), 1e-9);
    if (c.contains("edge_utility")) {
      const auto aux = hfl::stackelberg::make_auxiliary(inst, p.view(l));
      coalitions_ok = coalitions_ok &&
                      close_rel(hfl::stackelberg::edge_utility(inst, aux, p.agg_count(l), state.chi[l]),
                                c.at("edge_utility").get<double>(), 1e-9);
    }
  }
  check("per-server utilities recompute to 1e-9 relative", coalitions_ok);

  if (report.value("converged", false)) {
    const auto st = hfl::is_stable(inst, state, rule, hfl::FormationConfig{});
    check("no accepted unilateral switch", st.stable,
          st.deviation ? "device " + std::to_string(st.deviation->device) + " -> edge " +
                             std::to_string(st.deviation->target)
                       : "");
  }
  if (rule == hfl::PreferenceRule::Altruistic && report.contains("psi_per_accept")) {
    const auto psi = report.at("psi_per_accept").get<std::vector<double>>();
    bool increasing = true;
    for (std::size_t i = 1; i < psi.size(); ++i) increasing = increasing && psi[i] > psi[i - 1];
    check("potential strictly increasing across accepted switches", increasing);
  }
  return failures == 0 ? kExitOk : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level incentive simulator for hierarchical federated learning"};
  app.set_version_flag("--version", std::string(hfl::version()));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--spec", common.spec_file, "Experiment spec JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Base seed (u64)");
    sub->add_option("--trials", common.trials, "Trials per axis value");
    sub->add_option("--rules", common.rules,
                    "Comma-separated rules: altruistic,selfish,pareto,bandwidth-only");
    sub->add_option("--scenario", common.scenario,
                    "convergence | interval-sweep | device-sweep-low-cost | "
                    "device-sweep-high-cost | server-utilities | single-partition-demo");
    sub->add_option("--workers", common.workers, "Concurrent trials");
    sub->add_flag("--trace-gp", common.trace_gp, "Record GP iterations (gp_trace.csv)");
  };

  std::string out;
  int trial = 0;
  double axis_value = std::nan("");
  auto* gen = app.add_subcommand("gen", "Generate one trial's instance as JSON");
  add_common(gen);
  gen->add_option("--trial", trial, "Trial index");
  gen->add_option("--axis-value", axis_value, "Scenario axis value (default: first)");
  gen->add_option("--out", out, "Output file (default: stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment and write CSVs plus manifest");
  add_common(run);
  run->add_option("--out", out, "Output directory")->required();

  std::string instance_file;
  auto* replay = app.add_subcommand("replay", "Run every rule on a saved instance");
  add_common(replay);
  replay->add_option("--instance", instance_file, "Instance JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out, "Directory for trial reports and switch logs");

  std::string trial_file;
  auto* verify = app.add_subcommand("verify", "Check invariants of a saved trial report");
  verify->add_option("--instance", instance_file, "Instance JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--trial", trial_file, "Trial report JSON from replay")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) return cmd_gen(common, trial, axis_value, out);
    if (*run) return cmd_run(common, out);
    if (*replay) return cmd_replay(common, instance_file, out);
    if (*verify) return cmd_verify(instance_file, trial_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitOk;
}
