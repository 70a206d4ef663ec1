#include "hfl/coalition_game.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hfl/stackelberg.hpp"
#include "hfl/utility.hpp"

namespace hfl {

std::string_view to_string(PreferenceRule rule) {
  switch (rule) {
    case PreferenceRule::Selfish: return "selfish";
    case PreferenceRule::Pareto: return "pareto";
    case PreferenceRule::Altruistic: return "altruistic";
    case PreferenceRule::BandwidthOnly: return "bandwidth-only";
  }
  return "unknown";
}

PreferenceRule parse_rule(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "selfish") return PreferenceRule::Selfish;
  if (lower == "pareto") return PreferenceRule::Pareto;
  if (lower == "altruistic") return PreferenceRule::Altruistic;
  if (lower == "bandwidth-only" || lower == "bandwidth_only" || lower == "bandwidthonly")
    return PreferenceRule::BandwidthOnly;
  throw std::invalid_argument("unknown preference rule: " + std::string(name));
}

std::vector<double> device_utility_vector(const NetworkInstance& inst,
                                          const CoalitionPartition& partition) {
  std::vector<double> out(partition.num_devices(), 0.0);
  for (std::size_t l = 0; l < partition.num_edges(); ++l) {
    if (partition.members(l).empty()) continue;
    const auto view = partition.view(l);
    const auto u = device_utilities(inst, view);
    for (std::size_t i = 0; i < u.size(); ++i) out[view.members[i]] = u[i];
  }
  return out;
}

namespace {

double coalition_sum(const NetworkInstance& inst, const CoalitionPartition& partition,
                     std::size_t l) {
  if (partition.members(l).empty()) return 0.0;
  double s = 0.0;
  for (double u : device_utilities(inst, partition.view(l))) s += u;
  return s;
}

}  // namespace

double potential_value(const NetworkInstance& inst, const CoalitionPartition& partition) {
  double psi = 0.0;
  for (std::size_t l = 0; l < partition.num_edges(); ++l) psi += coalition_sum(inst, partition, l);
  return psi;
}

double pair_utility(const NetworkInstance& inst, const CoalitionPartition& partition,
                    std::size_t a, std::size_t b) {
  double u = coalition_sum(inst, partition, a);
  if (b != a) u += coalition_sum(inst, partition, b);
  return u;
}

gp::GPReport reallocate_on_switch(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::size_t l, std::size_t j, const gp::GPConfig& config) {
  return reallocate_on_switch(inst, partition, l, j,
                              partition.bandwidth(l) + partition.bandwidth(j), config);
}

gp::GPReport reallocate_on_switch(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::size_t l, std::size_t j, double pair_sum,
                                  const gp::GPConfig& config) {
  if (l == j) throw std::invalid_argument("reallocation needs two distinct coalitions");
  auto report = gp::solve_pair(inst, partition.view(l), partition.view(j), pair_sum, config);
  partition.set_bandwidth(l, report.bandwidth[0]);
  partition.set_bandwidth(j, report.bandwidth[1]);
  return report;
}

SwitchEvaluation evaluate_switch(const NetworkInstance& inst, const GameState& state,
                                 std::size_t device, std::size_t target, PreferenceRule rule,
                                 const FormationConfig& config) {
  const auto& before = state.partition;
  if (device >= before.num_devices()) throw std::invalid_argument("device out of range");
  if (target >= before.num_edges()) throw std::invalid_argument("target edge out of range");
  const std::size_t from = before.edge_of(device);
  if (target == from) throw std::invalid_argument("switch target equals current coalition");

  SwitchEvaluation ev;
  const auto u_before = device_utility_vector(inst, before);
  ev.mover_before = u_before[device];
  ev.pair_before = pair_utility(inst, before, from, target);
  ev.potential_before = potential_value(inst, before);
  ev.potential_after = ev.potential_before;
  ev.mover_after = ev.mover_before;
  ev.pair_after = ev.pair_before;

  if (rule == PreferenceRule::BandwidthOnly) {
    ev.reason = "bandwidth-only baseline never switches";
    return ev;
  }

  const bool target_was_empty = before.members(target).empty();
  ev.candidate = state;
  auto& cand = ev.candidate.partition;
  const double pair_sum = before.bandwidth(from) + before.bandwidth(target);
  cand.move(device, target);
  reallocate_on_switch(inst, cand, from, target, pair_sum, config.gp);

  const auto& cfg = inst.config();
  const double mover_rate = cand.bandwidth(target) / static_cast<double>(cand.size(target)) *
                            inst.spectral_efficiency(device, target);
  if (!(cfg.cloud_interval * mover_rate > cfg.model_size)) {
    ev.feasible = false;
    ev.reason = "target coalition infeasible for the device";
    return ev;
  }

  auto& chi = ev.candidate.chi;
  if (config.repricing == Repricing::Anticipated) {
    stackelberg::PricingOptions opts;
    opts.max_cycles = config.pricing_cycles;
    opts.restrict_to = std::vector<std::size_t>{from, target};
    opts.initial_chi = state.chi;
    if (target_was_empty) (*opts.initial_chi)[target] = std::numeric_limits<double>::quiet_NaN();
    const auto priced = stackelberg::solve_pricing(inst, cand, opts);
    if (!priced.defined) {
      ev.feasible = false;
      ev.reason = "cloud utility undefined after the switch";
      return ev;
    }
    chi = priced.chi;
  } else {
    if (cand.members(from).empty()) chi[from] = 0.0;
    if (target_was_empty)
      chi[target] = stackelberg::initial_price(stackelberg::tabulate_prices(
          inst, stackelberg::make_auxiliary(inst, cand.view(target))));
  }
  stackelberg::apply_edge_aggregations_rule(inst, cand, chi, from, target);

  const auto u_after = device_utility_vector(inst, cand);
  ev.mover_after = u_after[device];
  ev.pair_after = pair_utility(inst, cand, from, target);
  ev.potential_after = potential_value(inst, cand);

  const bool mover_gains = ev.mover_after > ev.mover_before + kStrictTolerance;
  switch (rule) {
    case PreferenceRule::Selfish:
      ev.accepted = mover_gains;
      if (!ev.accepted) ev.reason = "mover does not strictly gain";
      break;
    case PreferenceRule::Pareto: {
      bool nobody_loses = true;
      for (std::size_t e : {from, target})
        for (std::size_t i : before.members(e))
          if (i != device && u_after[i] < u_before[i] - kStrictTolerance) nobody_loses = false;
      ev.accepted = mover_gains && nobody_loses;
      if (!mover_gains)
        ev.reason = "mover does not strictly gain";
      else if (!nobody_loses)
        ev.reason = "a member of an affected coalition loses";
      break;
    }
    case PreferenceRule::Altruistic:
      ev.accepted = ev.pair_after > ev.pair_before + kStrictTolerance;
      if (!ev.accepted) ev.reason = "affected coalitions do not strictly gain";
      break;
    case PreferenceRule::BandwidthOnly:
      break;
  }
  return ev;
}

double verify_potential_identity(const NetworkInstance& inst, const CoalitionPartition& before,
                                 const CoalitionPartition& after, std::size_t from,
                                 std::size_t to) {
  const double du = pair_utility(inst, after, from, to) - pair_utility(inst, before, from, to);
  const double dpsi = potential_value(inst, after) - potential_value(inst, before);
  return std::abs(du - dpsi);
}

StabilityReport is_stable(const NetworkInstance& inst, const GameState& state,
                          PreferenceRule rule, const FormationConfig& config) {
  StabilityReport report;
  if (rule == PreferenceRule::BandwidthOnly) return report;
  const auto& p = state.partition;
  for (std::size_t n = 0; n < p.num_devices(); ++n) {
    for (std::size_t j = 0; j < p.num_edges(); ++j) {
      if (j == p.edge_of(n)) continue;
      ++report.checked;
      if (evaluate_switch(inst, state, n, j, rule, config).accepted) {
        report.stable = false;
        report.deviation = Deviation{n, j};
        return report;
      }
    }
  }
  return report;
}

std::vector<std::size_t> random_assignment(const NetworkInstance& inst, Rng& rng) {
  std::vector<std::size_t> a(inst.num_devices());
  for (auto& e : a) e = static_cast<std::size_t>(rng.below(inst.num_edges()));
  return a;
}

std::vector<std::size_t> bandwidth_only_assignment(const NetworkInstance& inst, double radius) {
  std::vector<std::size_t> a(inst.num_devices());
  const auto& rho = inst.econ().unit_price;
  for (std::size_t n = 0; n < inst.num_devices(); ++n) {
    const Position pos = inst.device(n).position;
    std::size_t nearest = 0;
    std::optional<std::size_t> best;
    for (std::size_t l = 0; l < inst.num_edges(); ++l) {
      const double d = distance(pos, inst.edges()[l].position);
      if (d < distance(pos, inst.edges()[nearest].position)) nearest = l;
      if (d > radius) continue;
      if (!best || rho[l] > rho[*best] ||
          (rho[l] == rho[*best] && d < distance(pos, inst.edges()[*best].position)))
        best = l;
    }
    a[n] = best.value_or(nearest);
  }
  return a;
}

GameState initial_state(const NetworkInstance& inst, const std::vector<std::size_t>& assignment,
                        const FormationConfig& config) {
  GameState s{CoalitionPartition(inst.num_edges(), assignment), {}};
  if (s.partition.num_devices() != inst.num_devices())
    throw std::invalid_argument("assignment must cover every device");
  std::vector<CoalitionView> views;
  for (std::size_t l = 0; l < inst.num_edges(); ++l) views.push_back(s.partition.view(l));
  const auto bw = gp::solve(inst, views, inst.config().total_bandwidth, config.gp);
  s.partition.set_bandwidth(bw.bandwidth);

  stackelberg::PricingOptions opts;
  opts.max_cycles = config.pricing_cycles;
  const auto priced = stackelberg::solve_pricing(inst, s.partition, opts);
  s.chi = priced.chi;
  for (std::size_t l = 0; l < inst.num_edges(); ++l)
    if (!s.partition.members(l).empty()) s.partition.set_agg_count(l, priced.schedule[l]);
  return s;
}

FormationResult run_formation(const NetworkInstance& inst, PreferenceRule rule,
                              const std::vector<std::size_t>& assignment, Rng& rng,
                              const FormationConfig& config) {
  FormationResult r;
  if (rule == PreferenceRule::BandwidthOnly) {
    r.state = initial_state(inst, bandwidth_only_assignment(inst, config.coverage_radius), config);
    r.potential_per_accept.push_back(potential_value(inst, r.state.partition));
    r.converged = true;
    return r;
  }
  r.state = initial_state(inst, assignment, config);
  double psi = potential_value(inst, r.state.partition);
  r.potential_per_accept.push_back(psi);
  const std::size_t N = inst.num_devices();
  const std::size_t L = inst.num_edges();
  if (L == 1) {
    r.converged = true;
    return r;
  }

  auto commit = [&](SwitchEvaluation&& ev, std::size_t n, std::size_t from, std::size_t to) {
    r.log.push_back({r.attempts, n, from, to, rule, true, ev.potential_before, ev.potential_after});
    r.state = std::move(ev.candidate);
    psi = ev.potential_after;
    r.potential_per_accept.push_back(psi);
  };

  const std::int64_t stall_limit = static_cast<std::int64_t>(config.stall_factor) *
                                   static_cast<std::int64_t>(N);
  std::int64_t stall = 0;
  while (r.attempts < config.max_attempts) {
    const std::size_t n = static_cast<std::size_t>(rng.below(N));
    const std::size_t from = r.state.partition.edge_of(n);
    std::size_t to = static_cast<std::size_t>(rng.below(L - 1));
    if (to >= from) ++to;
    ++r.attempts;
    auto ev = evaluate_switch(inst, r.state, n, to, rule, config);
    if (ev.accepted) {
      commit(std::move(ev), n, from, to);
      stall = 0;
    } else {
      r.log.push_back({r.attempts, n, from, to, rule, false, psi, psi});
      ++stall;
    }
    r.potential_per_attempt.push_back(psi);

    if (stall >= stall_limit) {
      ++r.stability_checks;
      const auto check = is_stable(inst, r.state, rule, config);
      if (check.stable) {
        r.converged = true;
        break;
      }
      const auto d = *check.deviation;
      const std::size_t d_from = r.state.partition.edge_of(d.device);
      auto dev = evaluate_switch(inst, r.state, d.device, d.target, rule, config);
      commit(std::move(dev), d.device, d_from, d.target);
      stall = 0;
    }
  }
  if (!r.converged) {
    ++r.stability_checks;
    if (is_stable(inst, r.state, rule, config).stable)
      r.converged = true;
    else
      r.diagnostic = "switch attempt cap reached without a stable partition";
  }
  return r;
}

}  // namespace hfl
