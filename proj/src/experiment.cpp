#include "hfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <utility>

#include "hfl/digest.hpp"
#include "hfl/serialization.hpp"
#include "hfl/stackelberg.hpp"
#include "hfl/utility.hpp"

#ifndef HFL_VERSION
#define HFL_VERSION "unknown"
#endif

namespace hfl {

using nlohmann::json;

namespace {

struct ScenarioName {
  Scenario scenario;
  const char* name;
};

constexpr ScenarioName kScenarioNames[] = {
    {Scenario::Convergence, "convergence"},
    {Scenario::IntervalSweep, "interval-sweep"},
    {Scenario::DeviceSweepLowCost, "device-sweep-low-cost"},
    {Scenario::DeviceSweepHighCost, "device-sweep-high-cost"},
    {Scenario::ServerUtilities, "server-utilities"},
    {Scenario::SinglePartitionDemo, "single-partition-demo"},
};

constexpr double kLowCongestion = 0.05;
constexpr double kHighCongestion = 0.15;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  return out;
}

bool per_edge_metrics(Scenario s) {
  return s == Scenario::Convergence || s == Scenario::ServerUtilities ||
         s == Scenario::SinglePartitionDemo;
}

Range range_from_json(const json& j, const char* key) {
  if (j.is_number()) {
    const double v = j.get<double>();
    return {v, v};
  }
  if (!j.is_array() || j.size() != 2)
    throw SpecError(std::string("parameter_ranges.") + key + " must be a number or [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json range_to_json(Range r) { return json::array({r.lo, r.hi}); }

void apply_ranges(ParameterRanges& r, const json& j) {
  if (!j.is_object()) throw SpecError("parameter_ranges must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "devices") r.devices = v.get<std::size_t>();
    else if (key == "edges") r.edges = v.get<std::size_t>();
    else if (key == "region_side") r.region_side = v.get<double>();
    else if (key == "cpu_freq") r.cpu_freq = range_from_json(v, "cpu_freq");
    else if (key == "cycles_per_unit") r.cycles_per_unit = v.get<double>();
    else if (key == "tx_power") r.tx_power = range_from_json(v, "tx_power");
    else if (key == "congestion") r.congestion = range_from_json(v, "congestion");
    else if (key == "cloud_interval") r.cloud_interval = range_from_json(v, "cloud_interval");
    else if (key == "unit_price") r.unit_price = range_from_json(v, "unit_price");
    else if (key == "fixed_reward") r.fixed_reward = v.get<double>();
    else if (key == "improvement_coef") r.improvement_coef = v.get<double>();
    else if (key == "model_size") r.model_size = v.get<double>();
    else if (key == "total_bandwidth") r.total_bandwidth = v.get<double>();
    else if (key == "noise_power") r.noise_power = v.get<double>();
    else if (key == "path_loss_exponent") r.path_loss_exponent = v.get<double>();
    else if (key == "reference_distance") r.reference_distance = v.get<double>();
    else if (key == "reference_snr_db") r.reference_snr_db = v.get<double>();
    else if (key == "snr_min_db") r.snr_min_db = v.get<double>();
    else if (key == "snr_max_db") r.snr_max_db = v.get<double>();
    else if (key == "min_distance") r.min_distance = v.get<double>();
    else if (key == "max_resamples") r.max_resamples = v.get<int>();
    else if (key == "loss_valuation") r.market.loss_valuation = v.get<double>();
    else if (key == "max_loss") r.market.max_loss = v.get<double>();
    else if (key == "h_beta") r.market.h_beta = v.get<double>();
    else if (key == "h_a") r.market.h_a = v.get<double>();
    else if (key == "h_b") r.market.h_b = v.get<double>();
    else if (key == "price_step_fraction") r.market.price_step_fraction = v.get<double>();
    else throw SpecError("unknown parameter_ranges key: " + key);
  }
}

json ranges_to_json(const ParameterRanges& r) {
  return {{"devices", r.devices},
          {"edges", r.edges},
          {"region_side", r.region_side},
          {"cpu_freq", range_to_json(r.cpu_freq)},
          {"cycles_per_unit", r.cycles_per_unit},
          {"tx_power", range_to_json(r.tx_power)},
          {"congestion", range_to_json(r.congestion)},
          {"cloud_interval", range_to_json(r.cloud_interval)},
          {"unit_price", range_to_json(r.unit_price)},
          {"fixed_reward", r.fixed_reward},
          {"improvement_coef", r.improvement_coef},
          {"model_size", r.model_size},
          {"total_bandwidth", r.total_bandwidth},
          {"noise_power", r.noise_power},
          {"path_loss_exponent", r.path_loss_exponent},
          {"reference_distance", r.reference_distance},
          {"reference_snr_db", r.reference_snr_db},
          {"snr_min_db", r.snr_min_db},
          {"snr_max_db", r.snr_max_db},
          {"min_distance", r.min_distance},
          {"max_resamples", r.max_resamples},
          {"loss_valuation", r.market.loss_valuation},
          {"max_loss", r.market.max_loss},
          {"h_beta", r.market.h_beta},
          {"h_a", r.market.h_a},
          {"h_b", r.market.h_b},
          {"price_step_fraction", r.market.price_step_fraction}};
}

Repricing parse_repricing(std::string_view s) {
  const auto l = lower(s);
  if (l == "anticipated") return Repricing::Anticipated;
  if (l == "frozen") return Repricing::Frozen;
  throw SpecError("unknown repricing mode: " + std::string(s));
}

void apply_formation(FormationConfig& f, const json& j) {
  if (!j.is_object()) throw SpecError("formation must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "max_attempts") f.max_attempts = v.get<int>();
    else if (key == "stall_factor") f.stall_factor = v.get<int>();
    else if (key == "coverage_radius") f.coverage_radius = v.get<double>();
    else if (key == "pricing_cycles") f.pricing_cycles = v.get<int>();
    else if (key == "repricing") f.repricing = parse_repricing(v.get<std::string>());
    else if (key == "gp") {
      for (const auto& [gk, gv] : v.items()) {
        if (gk == "initial_step") f.gp.initial_step = gv.get<double>();
        else if (gk == "min_step") f.gp.min_step = gv.get<double>();
        else if (gk == "max_iters") f.gp.max_iters = gv.get<int>();
        else if (gk == "tolerance") f.gp.tolerance = gv.get<double>();
        else throw SpecError("unknown formation.gp key: " + gk);
      }
    } else {
      throw SpecError("unknown formation key: " + key);
    }
  }
}

json formation_to_json(const FormationConfig& f) {
  return {{"max_attempts", f.max_attempts},
          {"stall_factor", f.stall_factor},
          {"coverage_radius", f.coverage_radius},
          {"pricing_cycles", f.pricing_cycles},
          {"repricing", f.repricing == Repricing::Anticipated ? "anticipated" : "frozen"},
          {"gp",
           {{"initial_step", f.gp.initial_step},
            {"min_step", f.gp.min_step},
            {"max_iters", f.gp.max_iters},
            {"tolerance", f.gp.tolerance}}}};
}

double edge_utility_or_nan(const NetworkInstance& inst, const CoalitionPartition& p,
                           std::span<const double> chi, std::size_t l) {
  if (p.members(l).empty()) return std::nan("");
  const auto aux = stackelberg::make_auxiliary(inst, p.view(l));
  const int k = p.agg_count(l);
  if (!aux.participating() || k < 1 || k > aux.max_feasible_k) return std::nan("");
  return stackelberg::edge_utility(inst, aux, k, chi[l]);
}

double final_cloud_utility(const NetworkInstance& inst, const GameState& s) {
  const auto& p = s.partition;
  std::vector<stackelberg::Auxiliary> aux;
  aux.reserve(p.num_edges());
  for (std::size_t l = 0; l < p.num_edges(); ++l)
    aux.push_back(stackelberg::make_auxiliary(inst, p.view(l)));
  try {
    return stackelberg::cloud_utility(inst, aux, s.chi, p.agg_counts());
  } catch (const std::domain_error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view to_string(Scenario s) {
  for (const auto& e : kScenarioNames)
    if (e.scenario == s) return e.name;
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  const auto l = lower(name);
  for (const auto& e : kScenarioNames)
    if (l == e.name) return e.scenario;
  throw SpecError("unknown scenario: " + std::string(name));
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw SpecError("trials must be at least 1");
  if (rules.empty()) throw SpecError("rule list must not be empty");
  if (workers < 1) throw SpecError("workers must be at least 1");
  if (!(max_nonconvergence >= 0.0 && max_nonconvergence <= 1.0))
    throw SpecError("max_nonconvergence must lie in [0, 1]");
  if (formation.max_attempts < 0 || formation.stall_factor < 1 || formation.pricing_cycles < 1)
    throw SpecError("formation limits must be positive");
  if (!(formation.coverage_radius > 0.0)) throw SpecError("coverage_radius must be positive");
  for (std::size_t i = 0; i < rules.size(); ++i)
    for (std::size_t j = i + 1; j < rules.size(); ++j)
      if (rules[i] == rules[j]) throw SpecError("duplicate rule in rule list");
  try {
    formation.gp.validate();
    for (double v : hfl::axis_values(*this)) ranges_for(*this, v).validate();
  } catch (const SpecError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SpecError(e.what());
  }
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("experiment spec must be a JSON object");
  ExperimentSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scenario") s.scenario = parse_scenario(v.get<std::string>());
      else if (key == "trials") s.trials = v.get<int>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "rules") {
        s.rules.clear();
        for (const auto& r : v) {
          try {
            s.rules.push_back(parse_rule(r.get<std::string>()));
          } catch (const std::invalid_argument& e) {
            throw SpecError(e.what());
          }
        }
      } else if (key == "parameter_ranges") apply_ranges(s.ranges, v);
      else if (key == "formation") apply_formation(s.formation, v);
      else if (key == "axis_values") s.axis_values = v.get<std::vector<double>>();
      else if (key == "workers") s.workers = v.get<int>();
      else if (key == "max_nonconvergence") s.max_nonconvergence = v.get<double>();
      else if (key == "trace_gp") s.trace_gp = v.get<bool>();
      else throw SpecError("unknown spec key: " + key);
    }
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed spec: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const ExperimentSpec& s) {
  json rules = json::array();
  for (auto r : s.rules) rules.push_back(std::string(to_string(r)));
  json j = {{"scenario", std::string(to_string(s.scenario))},
            {"trials", s.trials},
            {"seed", s.seed},
            {"rules", std::move(rules)},
            {"parameter_ranges", ranges_to_json(s.ranges)},
            {"formation", formation_to_json(s.formation)},
            {"workers", s.workers},
            {"max_nonconvergence", s.max_nonconvergence},
            {"trace_gp", s.trace_gp}};
  if (!s.axis_values.empty()) j["axis_values"] = s.axis_values;
  return j;
}

std::string_view axis_name(Scenario s) {
  switch (s) {
    case Scenario::IntervalSweep: return "cloud_interval";
    case Scenario::DeviceSweepLowCost:
    case Scenario::DeviceSweepHighCost: return "devices";
    default: return "none";
  }
}

std::vector<double> default_axis(Scenario s) {
  switch (s) {
    case Scenario::IntervalSweep: return {15.0, 20.0, 25.0};
    case Scenario::DeviceSweepLowCost:
    case Scenario::DeviceSweepHighCost: {
      std::vector<double> v;
      for (int n = 6; n <= 18; ++n) v.push_back(n);
      return v;
    }
    default: return {0.0};
  }
}

std::vector<double> axis_values(const ExperimentSpec& spec) {
  if (spec.axis_values.empty() || axis_name(spec.scenario) == "none")
    return default_axis(spec.scenario);
  return spec.axis_values;
}

ParameterRanges ranges_for(const ExperimentSpec& spec, double axis_value) {
  ParameterRanges r = spec.ranges;
  switch (spec.scenario) {
    case Scenario::IntervalSweep:
      r.cloud_interval = {axis_value, axis_value};
      break;
    case Scenario::DeviceSweepLowCost:
    case Scenario::DeviceSweepHighCost: {
      if (!(axis_value >= 1.0) || axis_value != std::floor(axis_value))
        throw SpecError("device axis values must be positive integers");
      r.devices = static_cast<std::size_t>(axis_value);
      const double a = spec.scenario == Scenario::DeviceSweepLowCost ? kLowCongestion
                                                                      : kHighCongestion;
      r.congestion = {a, a};
      break;
    }
    default:
      break;
  }
  return r;
}

NetworkInstance trial_instance(const ExperimentSpec& spec, double axis_value, int trial,
                               std::vector<std::size_t>* assignment) {
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(trial), 0));
  auto inst = generate_instance(ranges_for(spec, axis_value), rng);
  if (assignment) *assignment = random_assignment(inst, rng);
  return inst;
}

TrialResult run_trial(const ExperimentSpec& spec, std::size_t axis_index, int trial) {
  const auto axis = axis_values(spec);
  TrialResult out;
  out.axis_index = axis_index;
  out.axis_value = axis.at(axis_index);
  out.trial = trial;

  std::vector<std::size_t> assignment;
  const auto inst = trial_instance(spec, out.axis_value, trial, &assignment);
  out.instance_digest = sha256_hex(to_json(inst).dump());
  const std::uint64_t switch_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(trial), 1);

  for (std::size_t ri = 0; ri < spec.rules.size(); ++ri) {
    const PreferenceRule rule = spec.rules[ri];
    Rng rng(switch_seed);
    const auto t0 = std::chrono::steady_clock::now();
    RuleOutcome o;
    o.rule = rule;
    o.formation = run_formation(inst, rule, assignment, rng, spec.formation);
    o.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& st = o.formation.state;
    o.total_utility = total_utility(inst, st.partition);
    o.cloud_utility = final_cloud_utility(inst, st);

    auto add = [&](std::string metric, double value) {
      out.metrics.push_back({axis_index, out.axis_value, ri, rule, trial, std::move(metric), value});
    };
    const auto accepted = static_cast<double>(o.formation.potential_per_accept.size() - 1);
    add("converged", o.formation.converged ? 1.0 : 0.0);
    add("total_utility", o.total_utility);
    add("cloud_utility", o.cloud_utility);
    add("attempts", static_cast<double>(o.formation.attempts));
    add("accepted_switches", accepted);
    add("stability_checks", static_cast<double>(o.formation.stability_checks));
    if (per_edge_metrics(spec.scenario)) {
      const auto& p = st.partition;
      for (std::size_t l = 0; l < p.num_edges(); ++l) {
        const std::string sfx = "_e" + std::to_string(l);
        add("coalition_utility" + sfx, coalition_utility(inst, p.view(l)));
        const double eu = edge_utility_or_nan(inst, p, st.chi, l);
        if (!std::isnan(eu)) add("edge_utility" + sfx, eu);
        add("size" + sfx, static_cast<double>(p.size(l)));
        add("bandwidth_hz" + sfx, p.bandwidth(l));
        add("agg_count" + sfx, static_cast<double>(p.agg_count(l)));
        add("chi" + sfx, st.chi[l]);
        add("unit_price" + sfx, inst.econ().unit_price[l]);
      }
    }

    std::size_t k = 0;
    out.trajectory.push_back({out.axis_value, rule, trial, k, 0, o.formation.potential_per_accept[0]});
    for (const auto& rec : o.formation.log) {
      if (!rec.accepted) continue;
      ++k;
      out.trajectory.push_back({out.axis_value, rule, trial, k, rec.iteration, rec.potential_after});
    }

    if (spec.trace_gp) {
      const auto start = rule == PreferenceRule::BandwidthOnly
                             ? bandwidth_only_assignment(inst, spec.formation.coverage_radius)
                             : assignment;
      CoalitionPartition p(inst.num_edges(), start);
      std::vector<CoalitionView> views;
      for (std::size_t l = 0; l < p.num_edges(); ++l) views.push_back(p.view(l));
      const auto rep =
          gp::solve(inst, views, inst.config().total_bandwidth, spec.formation.gp, true);
      for (const auto& pt : rep.trace) out.gp_trace.push_back({out.axis_value, rule, trial, pt});
    }
    out.outcomes.push_back(std::move(o));
  }
  return out;
}

std::vector<SummaryRow> aggregate(const std::vector<MetricRow>& rows) {
  using Run = std::tuple<double, PreferenceRule, int>;
  std::set<Run> failed;
  for (const auto& r : rows)
    if (r.metric == "converged" && r.value == 0.0) failed.insert({r.axis_value, r.rule, r.trial});

  // Groups keep first-appearance order of axis value, rule and metric.
  std::vector<double> axes;
  std::vector<PreferenceRule> rules;
  std::vector<std::string> metrics;
  auto index_of = [](auto& v, const auto& x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it == v.end()) {
      v.push_back(x);
      return v.size() - 1;
    }
    return static_cast<std::size_t>(it - v.begin());
  };
  struct Acc {
    std::vector<double> values;
    std::size_t excluded = 0;
  };
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Acc> groups;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(index_of(axes, r.axis_value), index_of(rules, r.rule),
                                     index_of(metrics, r.metric));
    auto& acc = groups[key];
    const bool excluded = r.metric != "converged" && failed.count({r.axis_value, r.rule, r.trial});
    if (excluded) ++acc.excluded;
    else acc.values.push_back(r.value);
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, acc] : groups) {
    SummaryRow s;
    s.axis_value = axes[std::get<0>(key)];
    s.rule = rules[std::get<1>(key)];
    s.metric = metrics[std::get<2>(key)];
    s.n = acc.values.size();
    s.excluded = acc.excluded;
    if (s.n == 0) {
      s.mean = s.ci_low = s.ci_high = std::nan("");
    } else {
      double sum = 0.0;
      for (double v : acc.values) sum += v;
      s.mean = sum / static_cast<double>(s.n);
      double half = 0.0;
      if (s.n > 1) {
        double ss = 0.0;
        for (double v : acc.values) ss += (v - s.mean) * (v - s.mean);
        const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        half = 1.959963984540054 * sd / std::sqrt(static_cast<double>(s.n));
      }
      s.ci_low = s.mean - half;
      s.ci_high = s.mean + half;
    }
    out.push_back(std::move(s));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto axis = axis_values(spec);
  const std::size_t jobs = axis.size() * static_cast<std::size_t>(spec.trials);
  std::vector<TrialResult> results(jobs);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs) return;
      try {
        results[j] = run_trial(spec, j / static_cast<std::size_t>(spec.trials),
                               static_cast<int>(j % static_cast<std::size_t>(spec.trials)));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(jobs);
        return;
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(spec.workers), std::max<std::size_t>(jobs, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  ExperimentResult out;
  out.spec = spec;
  for (auto& r : results) {
    for (const auto& o : r.outcomes) {
      ++out.runs;
      if (!o.formation.converged) ++out.nonconverged;
      out.wall_seconds.push_back(o.wall_seconds);
    }
    std::move(r.metrics.begin(), r.metrics.end(), std::back_inserter(out.rows));
    std::move(r.trajectory.begin(), r.trajectory.end(), std::back_inserter(out.trajectory));
    std::move(r.gp_trace.begin(), r.gp_trace.end(), std::back_inserter(out.gp_trace));
  }
  out.summary = aggregate(out.rows);
  return out;
}

std::string results_csv(const ExperimentResult& result) {
  const std::string scenario(to_string(result.spec.scenario));
  const std::string axis(axis_name(result.spec.scenario));
  std::ostringstream o;
  o << "scenario,axis,axis_value,rule,trial,metric,value\n";
  for (const auto& r : result.rows)
    o << scenario << ',' << axis << ',' << format_double(r.axis_value) << ',' << to_string(r.rule)
      << ',' << r.trial << ',' << csv_field(r.metric) << ',' << format_double(r.value) << '\n';
  return o.str();
}

std::string summary_csv(const ExperimentResult& result) {
  const std::string scenario(to_string(result.spec.scenario));
  const std::string axis(axis_name(result.spec.scenario));
  std::ostringstream o;
  o << "scenario,axis,axis_value,rule,metric,n,mean,ci_low,ci_high,excluded\n";
  for (const auto& s : result.summary)
    o << scenario << ',' << axis << ',' << format_double(s.axis_value) << ',' << to_string(s.rule)
      << ',' << csv_field(s.metric) << ',' << s.n << ',' << format_double(s.mean) << ','
      << format_double(s.ci_low) << ',' << format_double(s.ci_high) << ',' << s.excluded << '\n';
  return o.str();
}

namespace {

std::string trajectory_csv(const ExperimentResult& result) {
  const std::string scenario(to_string(result.spec.scenario));
  const std::string axis(axis_name(result.spec.scenario));
  std::ostringstream o;
  o << "scenario,axis,axis_value,rule,trial,accepted_index,attempt,psi\n";
  for (const auto& t : result.trajectory)
    o << scenario << ',' << axis << ',' << format_double(t.axis_value) << ',' << to_string(t.rule)
      << ',' << t.trial << ',' << t.accepted_index << ',' << t.attempt << ','
      << format_double(t.potential) << '\n';
  return o.str();
}

std::string gp_trace_csv(const ExperimentResult& result) {
  std::ostringstream o;
  o << "axis_value,rule,trial,iteration,objective,step,feasibility_residual\n";
  for (const auto& t : result.gp_trace)
    o << format_double(t.axis_value) << ',' << to_string(t.rule) << ',' << t.trial << ','
      << t.point.iteration << ',' << format_double(t.point.objective) << ','
      << format_double(t.point.step) << ',' << format_double(t.point.feasibility_residual) << '\n';
  return o.str();
}

std::string diagnostics_json(const ExperimentResult& result) {
  double total = 0.0;
  double worst = 0.0;
  for (double w : result.wall_seconds) {
    total += w;
    worst = std::max(worst, w);
  }
  json j = {{"workers", result.spec.workers},
            {"runs", result.runs},
            {"nonconverged", result.nonconverged},
            {"nonconvergence_fraction", result.nonconvergence_fraction()},
            {"wall_seconds_total", total},
            {"wall_seconds_max_run", worst}};
  return j.dump(2) + "\n";
}

class StagedWriter {
 public:
  explicit StagedWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  StagedWriter(const StagedWriter&) = delete;
  StagedWriter& operator=(const StagedWriter&) = delete;
  ~StagedWriter() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [tmp, _] : staged_) std::filesystem::remove(tmp, ec);
  }

  void stage(const std::string& name, const std::string& content) {
    const auto tmp = dir_ / ("." + name + ".tmp");
    const auto dst = dir_ / name;
    staged_.emplace_back(tmp, dst);
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.close();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }

  /// Renames every staged file into place. If one rename fails, the files
  /// already moved are removed again so no partial output set remains.
  void commit() {
    std::size_t done = 0;
    try {
      for (; done < staged_.size(); ++done)
        std::filesystem::rename(staged_[done].first, staged_[done].second);
    } catch (...) {
      std::error_code ec;
      for (std::size_t i = 0; i < done; ++i) std::filesystem::remove(staged_[i].second, ec);
      throw;
    }
    committed_ = true;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
  bool committed_ = false;
};

}  // namespace

void emit(const ExperimentResult& result, const std::filesystem::path& dir) {
  if (result.rows.empty()) throw std::invalid_argument("nothing to emit");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("results.csv", results_csv(result));
  files.emplace_back("summary.csv", summary_csv(result));
  if (!result.trajectory.empty()) files.emplace_back("trajectory.csv", trajectory_csv(result));
  if (!result.gp_trace.empty()) files.emplace_back("gp_trace.csv", gp_trace_csv(result));
  // The worker count changes scheduling only, so the recorded spec omits it
  // and outputs stay byte-identical across thread counts.
  json recorded = to_json(result.spec);
  recorded.erase("workers");
  files.emplace_back("spec.json", recorded.dump(2) + "\n");

  json digests = json::object();
  for (const auto& [name, content] : files) digests[name] = sha256_hex(content);
  const json manifest = {{"spec", recorded},
                         {"seed", result.spec.seed},
                         {"version", std::string(version())},
                         {"files", std::move(digests)}};
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");
  // Timing is not reproducible, so it stays out of the manifest.
  files.emplace_back("diagnostics.json", diagnostics_json(result));

  try {
    StagedWriter w(dir);
    for (const auto& [name, content] : files) w.stage(name, content);
    w.commit();
  } catch (const std::filesystem::filesystem_error& e) {
    throw std::runtime_error(e.what());
  }
}

std::string_view version() { return HFL_VERSION; }

}  // namespace hfl
