#pragma once

// Upper-level Stackelberg game. The cloud (leader) posts a unit reward chi_l
// per edge; each edge (follower) picks its aggregation count K_l.
//
// With Z = sqrt(A - K F / B) the edge utility is concave in Z:
//   u(Z) = chi (G - lambda/Z - F lambda / (B (A - Z^2))) - xi rho Z - |S| x,
// and the follower optimum solves chi * g(Z) = xi rho with
//   g(Z) = lambda/Z^2 - 2 F Z lambda / (B (A - Z^2)^2),
// a strictly decreasing function of Z.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hfl/model.hpp"
#include "hfl/utility.hpp"

namespace hfl {

class CoalitionPartition;

namespace stackelberg {

/// Per-coalition constants. Only devices that can upload within one cloud
/// interval ("active" devices) enter A and F; the others hold zero data at
/// every K.
struct Auxiliary {
  std::size_t edge = 0;
  std::size_t size = 0;       ///< |S_l| including inactive members
  double bandwidth = 0.0;     ///< B_l, Hz
  double A = 0.0;             ///< T^cloud * sum f/C
  double F = 0.0;             ///< s |S| sum f / (C log2(1+SNR)), per Hz
  int max_feasible_k = 0;     ///< min over active devices of floor(T R / s); 0 if none

  bool participating() const { return max_feasible_k >= 1; }
  /// sqrt(A - K F / B); equals sqrt(K * total data) for feasible K.
  double z_of_k(double k) const;
  double k_of_z(double z) const;
};

Auxiliary make_auxiliary(const NetworkInstance& inst, const CoalitionView& c);

/// G - lambda / sqrt(A - K F/B) - lambda / K. Throws std::domain_error for
/// K outside [1, max_feasible_k].
double accuracy_gain(int k, const Auxiliary& aux, const StackelbergParams& params);

/// chi * gain - |S| x - xi rho sqrt(A - K F/B).
double edge_utility(const NetworkInstance& inst, const Auxiliary& aux, int k, double chi);

/// g(Z) above.
double foc_lhs(double z, const Auxiliary& aux, const StackelbergParams& params);
/// d u / dZ.
double edge_utility_z_slope(const NetworkInstance& inst, const Auxiliary& aux, double z,
                            double chi);
/// d^2 u / dZ^2, nonpositive for chi >= 0.
double edge_utility_z_curvature(const Auxiliary& aux, double z, double chi,
                                const StackelbergParams& params);
/// u as a function of continuous Z.
double edge_utility_of_z(const NetworkInstance& inst, const Auxiliary& aux, double z, double chi);

struct BestResponse {
  int k = 1;
  std::optional<double> z_root;  ///< interior root of the first-order condition
  double foc_residual = 0.0;     ///< |chi g(Z*) - xi rho| / (xi rho)
};

/// Follower optimum over integer K in [1, max_feasible_k]: bisection on the
/// first-order condition in Z, then the better integer neighbour.
BestResponse best_response(const NetworkInstance& inst, const Auxiliary& aux, double chi);
int best_response_k(const NetworkInstance& inst, const Auxiliary& aux, double chi);

/// Candidate prices chi_l^K that make K the continuous follower optimum,
/// ascending by price. Only K with g(Z_K) > 0 can be induced.
struct PriceTable {
  std::vector<int> k;
  std::vector<double> chi;

  bool empty() const { return chi.empty(); }
  double min() const { return chi.front(); }
  double max() const { return chi.back(); }
};

PriceTable tabulate_prices(const NetworkInstance& inst, const Auxiliary& aux);

/// H(x) = beta (a x / L + b)^0.5. Throws std::domain_error when the radicand
/// is negative.
double h_function(double x, std::size_t edges, const StackelbergParams& params);

/// H(sum gain) - sum chi gain over participating edges. `chi` and
/// `schedule` are indexed by edge; non-participating edges are skipped.
double cloud_utility(const NetworkInstance& inst, std::span<const Auxiliary> aux,
                     std::span<const double> chi, std::span<const int> schedule);

struct PricingResult {
  std::vector<double> chi;           ///< per edge
  std::vector<int> schedule;         ///< per edge K; 0 for empty coalitions
  std::vector<Auxiliary> aux;
  std::vector<PriceTable> tables;
  double cloud_utility = 0.0;      ///< -inf when no visited price vector keeps H defined
  bool defined = true;
  std::vector<double> accepted_utilities;  ///< cloud utility after each accepted move
  int cycles = 0;
  bool converged = false;
};

struct PricingOptions {
  int max_cycles = 1000;
  /// Only these edges adjust prices; the others keep `initial_chi` and
  /// their current K.
  std::optional<std::vector<std::size_t>> restrict_to;
  /// Warm start (clamped into each table); NaN entries start at the table
  /// midpoint. Required when `restrict_to` is set.
  std::optional<std::vector<double>> initial_chi;
};

/// Cyclic price search: per edge, step chi by +/- zeta, snap to the
/// bracketing tabulated pair and keep the endpoint that raises cloud utility.
/// Configurations where H is undefined count as -inf; if the start is
/// undefined, each adjustable edge's full table is swept once first.
PricingResult solve_pricing(const NetworkInstance& inst, const CoalitionPartition& partition,
                            const PricingOptions& options = {});

/// Recomputes K for the two coalitions touched by a switch at current
/// prices; all other counts are untouched and an emptied coalition gets 0.
/// A coalition with no active device keeps K = 1.
void apply_edge_aggregations_rule(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::span<const double> chi, std::size_t from, std::size_t to);

/// Price a newly formed coalition starts from: the midpoint of its table.
double initial_price(const PriceTable& table);

}  // namespace stackelberg
}  // namespace hfl
