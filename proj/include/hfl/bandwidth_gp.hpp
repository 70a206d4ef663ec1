#pragma once

// Gradient projection for bandwidth allocation under a fixed partition.
//
// The objective is the total coalition utility with every device playing its
// deadline-saturating data amount. Iterates follow
//   B <- B + gamma (P(B + d) - B),
// where d is the gradient rescaled to unit infinity norm times the budget and
// gamma is found by halving from 1 until the objective improves, then while it
// keeps improving.

#include <cstddef>
#include <span>
#include <vector>

#include "hfl/model.hpp"
#include "hfl/utility.hpp"

namespace hfl::gp {

struct GPConfig {
  double initial_step = 1.0;
  double min_step = 1e-8;
  int max_iters = 500;
  double tolerance = 1e-6;  ///< relative objective change that stops the loop

  void validate() const;
};

using BandwidthAllocation = std::vector<double>;

/// One coalition's contribution to the objective at bandwidth `hz`. The
/// view's own bandwidth field is ignored.
double coalition_term(const NetworkInstance& inst, const CoalitionView& c, double hz);

/// d(coalition_term)/d(hz). Clamped devices contribute nothing (one-sided
/// derivative from the clamped side).
double coalition_slope(const NetworkInstance& inst, const CoalitionView& c, double hz);

double objective(const NetworkInstance& inst, std::span<const CoalitionView> coalitions,
                 std::span<const double> bandwidth);

std::vector<double> gradient(const NetworkInstance& inst,
                             std::span<const CoalitionView> coalitions,
                             std::span<const double> bandwidth);

/// Euclidean projection onto {B >= 0, sum B <= total}.
BandwidthAllocation project(std::span<const double> raw, double total);

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;
  double feasibility_residual = 0.0;  ///< max(0, sum B - total, -min B)
};

struct GPReport {
  BandwidthAllocation bandwidth;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

/// Allocates `total` Hz across all coalitions. Empty coalitions receive 0;
/// nonempty ones start from an equal split.
GPReport solve(const NetworkInstance& inst, std::span<const CoalitionView> coalitions,
               double total, const GPConfig& config, bool record_trace = false);

/// Splits a fixed pair sum between two coalitions (bandwidth reallocation on
/// a switch). The result always sums to `pair_sum`; an empty coalition gets 0.
GPReport solve_pair(const NetworkInstance& inst, const CoalitionView& first,
                    const CoalitionView& second, double pair_sum, const GPConfig& config);

}  // namespace hfl::gp
