#pragma once

// Shared fixtures and independent reference implementations for tests.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "hfl/coalition_game.hpp"
#include "hfl/instance_generator.hpp"
#include "hfl/model.hpp"
#include "hfl/partition.hpp"
#include "hfl/rng.hpp"
#include "hfl/stackelberg.hpp"
#include "hfl/utility.hpp"

namespace hfl::test {

struct Fixture {
  std::vector<std::vector<double>> snr;  ///< [device][edge], linear
  std::vector<double> rho;
  std::vector<double> alpha;
  std::vector<double> cpu_freq;          ///< per device; empty: 2e9
  double cloud_interval = 20.0;
  double total_bandwidth = 5e6;
  double fixed_reward = 1.0;
  double tx_power = 0.3;
};

inline NetworkInstance make_instance(const Fixture& f) {
  SystemConfig cfg;
  cfg.cloud_interval = f.cloud_interval;
  cfg.total_bandwidth = f.total_bandwidth;
  const std::size_t n = f.snr.size();
  const std::size_t l = f.rho.size();
  std::vector<Device> devices(n);
  std::vector<double> gains;
  for (std::size_t i = 0; i < n; ++i) {
    devices[i].id = i;
    devices[i].cpu_freq = f.cpu_freq.empty() ? 2e9 : f.cpu_freq[i];
    devices[i].cycles_per_unit = 3e9;
    devices[i].tx_power = f.tx_power;
    devices[i].position = {static_cast<double>(i), 0.0};
    for (std::size_t j = 0; j < l; ++j) gains.push_back(f.snr[i][j] * cfg.noise_power / f.tx_power);
  }
  std::vector<EdgeServer> edges(l);
  for (std::size_t j = 0; j < l; ++j) edges[j] = {j, {0.0, static_cast<double>(j)}};
  EconomicParams econ;
  econ.unit_price = f.rho;
  econ.congestion_coef = f.alpha;
  econ.fixed_reward.assign(l, f.fixed_reward);
  return NetworkInstance(cfg, std::move(devices), std::move(edges), ChannelMatrix(n, l, gains),
                         std::move(econ), StackelbergParams{});
}

inline NetworkInstance make_instance(std::vector<std::vector<double>> snr, std::vector<double> rho,
                                     std::vector<double> alpha) {
  Fixture f;
  f.snr = std::move(snr);
  f.rho = std::move(rho);
  f.alpha = std::move(alpha);
  return make_instance(f);
}

inline NetworkInstance random_instance(std::uint64_t seed, std::size_t devices = 12,
                                       std::size_t edges = 4) {
  ParameterRanges r;
  r.devices = devices;
  r.edges = edges;
  Rng rng(seed);
  return generate_instance(r, rng);
}

/// Partition with the given assignment, GP bandwidth and full pricing.
inline GameState priced_state(const NetworkInstance& inst, const std::vector<std::size_t>& a) {
  return initial_state(inst, a, FormationConfig{});
}

inline std::vector<std::size_t> random_assign(const NetworkInstance& inst, std::uint64_t seed) {
  Rng rng(seed);
  return random_assignment(inst, rng);
}

/// Sum of u_n straight from the coalition utility definition, bypassing
/// the device-level split.
inline double psi_by_coalitions(const NetworkInstance& inst, const CoalitionPartition& p) {
  double s = 0.0;
  for (std::size_t l = 0; l < p.num_edges(); ++l)
    if (!p.members(l).empty()) s += coalition_utility(inst, p.view(l));
  return s;
}

/// Projection onto {x >= 0, sum x <= total} by bisection on the threshold,
/// independent of the sort-based solver.
inline std::vector<double> reference_projection(const std::vector<double>& v, double total) {
  auto clipped_sum = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += std::max(0.0, x - tau);
    return s;
  };
  std::vector<double> out(v.size());
  if (clipped_sum(0.0) <= total) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i]);
    return out;
  }
  double lo = 0.0;
  double hi = 0.0;
  for (double x : v) hi = std::max(hi, x);
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (clipped_sum(mid) > total ? lo : hi) = mid;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - 0.5 * (lo + hi));
  return out;
}

/// Exhaustive integer argmax of the edge utility over [1, K_feas]; ties go
/// to the smaller K.
inline int brute_force_k(const NetworkInstance& inst, const stackelberg::Auxiliary& aux,
                         double chi) {
  int best = 1;
  double best_u = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= aux.max_feasible_k; ++k) {
    const double u = stackelberg::edge_utility(inst, aux, k, chi);
    if (u > best_u) {
      best_u = u;
      best = k;
    }
  }
  return best;
}

/// Hypothetical switch rebuilt from primitives: move, pair GP split of the
/// pre-move pair sum, restricted warm-started pricing of the two edges (a
/// new coalition from its table midpoint), then the aggregation rule.
/// Returns false when the post-switch state is not admissible.
inline bool oracle_candidate(const NetworkInstance& inst, const GameState& s, std::size_t device,
                             std::size_t target, GameState& out) {
  const std::size_t from = s.partition.edge_of(device);
  out = s;
  auto& p = out.partition;
  const double pair_sum = p.bandwidth(from) + p.bandwidth(target);
  const bool target_was_empty = p.members(target).empty();
  p.move(device, target);
  const auto split = gp::solve_pair(inst, p.view(from), p.view(target), pair_sum, gp::GPConfig{});
  p.set_bandwidth(from, split.bandwidth[0]);
  p.set_bandwidth(target, split.bandwidth[1]);

  const double rate = p.bandwidth(target) / static_cast<double>(p.size(target)) *
                      inst.spectral_efficiency(device, target);
  if (!(inst.config().cloud_interval * rate > inst.config().model_size)) return false;

  stackelberg::PricingOptions opt;
  opt.restrict_to = std::vector<std::size_t>{from, target};
  auto warm = s.chi;
  if (target_was_empty) warm[target] = std::nan("");
  opt.initial_chi = warm;
  const auto priced = stackelberg::solve_pricing(inst, p, opt);
  if (!priced.defined) return false;
  out.chi = priced.chi;
  stackelberg::apply_edge_aggregations_rule(inst, p, out.chi, from, target);
  return true;
}

inline double member_utility(const NetworkInstance& inst, const CoalitionPartition& p,
                             std::size_t device) {
  const std::size_t l = p.edge_of(device);
  const auto& m = p.members(l);
  const auto us = device_utilities(inst, p.view(l));
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] == device) return us[i];
  return std::nan("");
}

/// Whether `rule` accepts device -> target, decided from the oracle
/// candidate and utilities recomputed member by member.
inline bool oracle_accepts(const NetworkInstance& inst, const GameState& s, std::size_t device,
                           std::size_t target, PreferenceRule rule) {
  if (rule == PreferenceRule::BandwidthOnly) return false;
  const std::size_t from = s.partition.edge_of(device);
  if (from == target) return false;
  GameState c;
  if (!oracle_candidate(inst, s, device, target, c)) return false;
  constexpr double tol = kStrictTolerance;
  const double mover_gain = member_utility(inst, c.partition, device) -
                            member_utility(inst, s.partition, device);
  switch (rule) {
    case PreferenceRule::Selfish:
      return mover_gain > tol;
    case PreferenceRule::Pareto: {
      if (!(mover_gain > tol)) return false;
      for (std::size_t l : {from, target})
        for (std::size_t m : s.partition.members(l)) {
          if (m == device) continue;
          if (member_utility(inst, c.partition, m) < member_utility(inst, s.partition, m) - tol)
            return false;
        }
      return true;
    }
    case PreferenceRule::Altruistic: {
      double before = 0.0;
      double after = 0.0;
      for (std::size_t n = 0; n < inst.num_devices(); ++n) {
        const std::size_t a = s.partition.edge_of(n);
        const std::size_t b = c.partition.edge_of(n);
        if (a == from || a == target) before += member_utility(inst, s.partition, n);
        if (b == from || b == target) after += member_utility(inst, c.partition, n);
      }
      return after > before + tol;
    }
    default:
      return false;
  }
}

/// Exhaustive stability from the oracle above.
inline bool oracle_stable(const NetworkInstance& inst, const GameState& s, PreferenceRule rule) {
  for (std::size_t n = 0; n < inst.num_devices(); ++n)
    for (std::size_t l = 0; l < inst.num_edges(); ++l)
      if (l != s.partition.edge_of(n) && oracle_accepts(inst, s, n, l, rule)) return false;
  return true;
}

}  // namespace hfl::test
