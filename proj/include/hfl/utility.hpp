#pragma once

// Lower-game economics: model improvement, coalition revenue, congestion,
// coalition and device utilities, and the deadline-saturating data strategy.

#include <cstddef>
#include <span>
#include <vector>

#include "hfl/model.hpp"

namespace hfl {

class CoalitionPartition;

/// Per-device training data amounts, aligned with a coalition's member list.
using DataProfile = std::vector<double>;

/// One coalition as seen by the utility formulas: its edge, members (device
/// ids), edge aggregation count and allocated bandwidth in Hz.
struct CoalitionView {
  std::size_t edge = 0;
  std::span<const std::size_t> members;
  int k = 1;
  double bandwidth = 0.0;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

double model_improvement(int k, double total_data, double xi);

/// rho xi sqrt(k * total_data) + |S| x.
double coalition_revenue(std::size_t members, int k, double total_data, double unit_price,
                         double xi, double fixed_reward);

/// alpha * (sum of rates in Mbit/s)^2; the cost each member pays.
double congestion_cost(std::span<const double> rates_bps, double alpha);

/// Uplink rates (bit/s) of every member under the equal split.
std::vector<double> member_rates(const NetworkInstance& inst, const CoalitionView& c);

/// Deadline-saturating data amount of one device, clamped at 0. A zero rate
/// yields 0.
double nash_data_strategy(const NetworkInstance& inst, std::size_t device, std::size_t edge,
                          std::size_t coalition_size, int k, double bandwidth);

DataProfile nash_data_profile(const NetworkInstance& inst, const CoalitionView& c);

/// Revenue minus |S| times the per-member congestion cost. Throws
/// std::domain_error if a member with positive data has a zero rate.
double coalition_utility(const NetworkInstance& inst, const CoalitionView& c,
                         std::span<const double> data);
double coalition_utility(const NetworkInstance& inst, const CoalitionView& c);

/// Data-proportional share of the improvement reward plus x_l minus the
/// congestion cost. With zero total data the share term is 0.
std::vector<double> device_utilities(const NetworkInstance& inst, const CoalitionView& c,
                                     std::span<const double> data);
std::vector<double> device_utilities(const NetworkInstance& inst, const CoalitionView& c);

/// Utility of the member at `position` in c.members.
double device_utility(const NetworkInstance& inst, const CoalitionView& c,
                      std::size_t position, std::span<const double> data);

/// Sum of coalition utilities over all nonempty coalitions, each member
/// playing its deadline-saturating data amount.
double total_utility(const NetworkInstance& inst, const CoalitionPartition& partition);

}  // namespace hfl
