#pragma once

// Lower-level coalition formation game: preference rules, the switch and
// bandwidth-reallocation rules, the formation loop and stability check.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hfl/bandwidth_gp.hpp"
#include "hfl/model.hpp"
#include "hfl/partition.hpp"
#include "hfl/rng.hpp"

namespace hfl {

enum class PreferenceRule { Selfish, Pareto, Altruistic, BandwidthOnly };

std::string_view to_string(PreferenceRule rule);
/// Accepts "selfish", "pareto", "altruistic", "bandwidth-only" (case-insensitive).
PreferenceRule parse_rule(std::string_view name);

/// Absolute margin a utility must clear to count as a strict improvement.
inline constexpr double kStrictTolerance = 1e-9;

/// Partition (with B and K) plus the cloud's posted unit rewards.
struct GameState {
  CoalitionPartition partition;
  std::vector<double> chi;
};

struct SwitchRecord {
  std::int64_t iteration = 0;
  std::size_t device = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  PreferenceRule rule = PreferenceRule::Altruistic;
  bool accepted = false;
  double potential_before = 0.0;
  double potential_after = 0.0;
};

/// How a switch reaches the upper game.
enum class Repricing {
  /// The cloud re-prices the two affected edges (warm-started, a new
  /// coalition from its table midpoint) as part of the switch, so the mover
  /// evaluates the post-pricing state.
  Anticipated,
  /// Prices stay fixed; only the two affected edges re-derive K.
  Frozen,
};

struct FormationConfig {
  gp::GPConfig gp;
  int max_attempts = 10000;
  int stall_factor = 50;          ///< exhaustive check after stall_factor * N rejects
  double coverage_radius = 500.0; ///< metres, bandwidth-only association
  int pricing_cycles = 1000;
  Repricing repricing = Repricing::Anticipated;
};

/// Per-device utilities indexed by device id; members of empty coalitions
/// do not exist, so every device gets exactly one entry.
std::vector<double> device_utility_vector(const NetworkInstance& inst,
                                          const CoalitionPartition& partition);

/// Sum of all device utilities.
double potential_value(const NetworkInstance& inst, const CoalitionPartition& partition);

/// Sum of device utilities over coalitions `a` and `b` (a == b counts once).
double pair_utility(const NetworkInstance& inst, const CoalitionPartition& partition,
                    std::size_t a, std::size_t b);

/// Splits B_l + B_j between coalitions l and j with the pair GP solver,
/// writing the result into `partition`. Other coalitions are untouched.
gp::GPReport reallocate_on_switch(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::size_t l, std::size_t j, const gp::GPConfig& config);
/// Same, with the pair sum given explicitly (a move that empties a
/// coalition zeroes its bandwidth before the split is computed).
gp::GPReport reallocate_on_switch(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::size_t l, std::size_t j, double pair_sum,
                                  const gp::GPConfig& config);

struct SwitchEvaluation {
  bool accepted = false;
  std::string reason;          ///< why a switch was rejected
  bool feasible = true;        ///< false when the hypothetical state could not be built
  GameState candidate;         ///< hypothetical post-switch state (valid when feasible)
  double mover_before = 0.0;
  double mover_after = 0.0;
  double pair_before = 0.0;    ///< summed utility of both affected coalitions
  double pair_after = 0.0;
  double potential_before = 0.0;
  double potential_after = 0.0;
};

/// Builds the post-switch state for device -> target: move, pair
/// reallocation, re-pricing per `config.repricing`, then the
/// edge-aggregations rule for the two affected edges. Every other edge keeps
/// its bandwidth, price and count. The rule then accepts or rejects. The
/// input state is never modified.
SwitchEvaluation evaluate_switch(const NetworkInstance& inst, const GameState& state,
                                 std::size_t device, std::size_t target, PreferenceRule rule,
                                 const FormationConfig& config);

/// |(U_n(after) - U_n(before)) - (psi(after) - psi(before))| where U_n sums
/// the utilities of coalitions `from` and `to`.
double verify_potential_identity(const NetworkInstance& inst, const CoalitionPartition& before,
                                 const CoalitionPartition& after, std::size_t from,
                                 std::size_t to);

struct Deviation {
  std::size_t device = 0;
  std::size_t target = 0;
};

struct StabilityReport {
  bool stable = true;
  std::optional<Deviation> deviation;  ///< first accepted switch found
  std::size_t checked = 0;
};

/// Exhaustive check of every device x alternative-edge switch.
StabilityReport is_stable(const NetworkInstance& inst, const GameState& state,
                          PreferenceRule rule, const FormationConfig& config);

/// Uniformly random edge per device.
std::vector<std::size_t> random_assignment(const NetworkInstance& inst, Rng& rng);

/// Highest-rho edge within the coverage radius (ties: nearest); the nearest
/// edge when none covers the device.
std::vector<std::size_t> bandwidth_only_assignment(const NetworkInstance& inst, double radius);

/// K = 1, one global GP pass, one full pricing pass.
GameState initial_state(const NetworkInstance& inst, const std::vector<std::size_t>& assignment,
                        const FormationConfig& config);

struct FormationResult {
  GameState state;
  std::vector<SwitchRecord> log;
  std::vector<double> potential_per_attempt;   ///< psi after each attempt
  std::vector<double> potential_per_accept;    ///< psi_0 then psi after each accepted switch
  std::int64_t attempts = 0;
  int stability_checks = 0;
  bool converged = false;
  std::string diagnostic;
};

/// Random-switch formation loop. `assignment` is the shared initial
/// partition (ignored by BandwidthOnly, which never switches).
FormationResult run_formation(const NetworkInstance& inst, PreferenceRule rule,
                              const std::vector<std::size_t>& assignment, Rng& rng,
                              const FormationConfig& config);

}  // namespace hfl
