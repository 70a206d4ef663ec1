#include "hfl/stackelberg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hfl/partition.hpp"

namespace hfl::stackelberg {

double Auxiliary::z_of_k(double k) const {
  return std::sqrt(std::max(0.0, A - k * F / bandwidth));
}

double Auxiliary::k_of_z(double z) const { return bandwidth * (A - z * z) / F; }

Auxiliary make_auxiliary(const NetworkInstance& inst, const CoalitionView& c) {
  Auxiliary aux;
  aux.edge = c.edge;
  aux.size = c.size();
  aux.bandwidth = c.bandwidth;
  if (c.empty() || !(c.bandwidth > 0.0)) return aux;
  const auto& cfg = inst.config();
  const double m = static_cast<double>(c.size());
  int kmax = std::numeric_limits<int>::max();
  bool any = false;
  for (std::size_t n : c.members) {
    const double se = inst.spectral_efficiency(n, c.edge);
    const double rate = c.bandwidth / m * se;
    const double rounds = cfg.cloud_interval * rate / cfg.model_size;
    if (rounds < 1.0) continue;
    const double theta = inst.device(n).throughput();
    aux.A += cfg.cloud_interval * theta;
    aux.F += cfg.model_size * m * theta / se;
    kmax = std::min(kmax, static_cast<int>(std::min(std::floor(rounds), 1e9)));
    any = true;
  }
  if (!any) return aux;
  // Keep Z strictly positive at the top of the range.
  while (kmax >= 1 && aux.A - kmax * aux.F / aux.bandwidth <= 0.0) --kmax;
  aux.max_feasible_k = kmax;
  return aux;
}

namespace {

void require_feasible(int k, const Auxiliary& aux) {
  if (!aux.participating()) throw std::domain_error("coalition has no active device");
  if (k < 1 || k > aux.max_feasible_k)
    throw std::domain_error("aggregation count outside the feasible range");
}

double price_term(const NetworkInstance& inst, const Auxiliary& aux) {
  return inst.econ().improvement_coef * inst.econ().unit_price[aux.edge];
}

}  // namespace

double accuracy_gain(int k, const Auxiliary& aux, const StackelbergParams& params) {
  require_feasible(k, aux);
  const double z = aux.z_of_k(k);
  return params.max_loss - params.loss_valuation / z -
         params.loss_valuation / static_cast<double>(k);
}

double edge_utility(const NetworkInstance& inst, const Auxiliary& aux, int k, double chi) {
  const double gain = accuracy_gain(k, aux, inst.market());
  return chi * gain - static_cast<double>(aux.size) * inst.econ().fixed_reward[aux.edge] -
         price_term(inst, aux) * aux.z_of_k(k);
}

double foc_lhs(double z, const Auxiliary& aux, const StackelbergParams& params) {
  const double lambda = params.loss_valuation;
  const double gap = aux.A - z * z;
  return lambda / (z * z) - 2.0 * aux.F * z * lambda / (aux.bandwidth * gap * gap);
}

double edge_utility_z_slope(const NetworkInstance& inst, const Auxiliary& aux, double z,
                            double chi) {
  return chi * foc_lhs(z, aux, inst.market()) - price_term(inst, aux);
}

double edge_utility_z_curvature(const Auxiliary& aux, double z, double chi,
                                const StackelbergParams& params) {
  const double lambda = params.loss_valuation;
  const double gap = aux.A - z * z;
  const double fb = aux.F / aux.bandwidth;
  return -2.0 * chi * lambda / (z * z * z) - 2.0 * fb * chi * lambda / (gap * gap) -
         8.0 * fb * chi * z * z * lambda / (gap * gap * gap);
}

double edge_utility_of_z(const NetworkInstance& inst, const Auxiliary& aux, double z,
                         double chi) {
  const auto& p = inst.market();
  const double gap = aux.A - z * z;
  return chi * (p.max_loss - p.loss_valuation / z -
                aux.F * p.loss_valuation / (aux.bandwidth * gap)) -
         price_term(inst, aux) * z -
         static_cast<double>(aux.size) * inst.econ().fixed_reward[aux.edge];
}

BestResponse best_response(const NetworkInstance& inst, const Auxiliary& aux, double chi) {
  if (!aux.participating()) throw std::domain_error("coalition has no active device");
  if (chi < 0.0) throw std::invalid_argument("unit reward must be >= 0");
  const int kf = aux.max_feasible_k;
  BestResponse br;
  if (kf == 1) return br;
  if (chi == 0.0) {
    br.k = kf;
    return br;
  }
  const auto& params = inst.market();
  const double target = price_term(inst, aux) / chi;
  double lo = aux.z_of_k(kf);  // smallest Z, largest g
  double hi = aux.z_of_k(1);
  if (foc_lhs(hi, aux, params) >= target) {
    br.k = 1;
    return br;
  }
  if (foc_lhs(lo, aux, params) <= target) {
    br.k = kf;
    return br;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (foc_lhs(mid, aux, params) > target)
      lo = mid;
    else
      hi = mid;
  }
  const double z = 0.5 * (lo + hi);
  br.z_root = z;
  br.foc_residual = std::abs(chi * foc_lhs(z, aux, params) - price_term(inst, aux)) /
                    price_term(inst, aux);
  const double k_cont = aux.k_of_z(z);
  const int below = std::clamp(static_cast<int>(std::floor(k_cont)), 1, kf);
  const int above = std::clamp(below + 1, 1, kf);
  br.k = below;
  if (above != below &&
      edge_utility(inst, aux, above, chi) > edge_utility(inst, aux, below, chi))
    br.k = above;
  return br;
}

int best_response_k(const NetworkInstance& inst, const Auxiliary& aux, double chi) {
  return best_response(inst, aux, chi).k;
}

PriceTable tabulate_prices(const NetworkInstance& inst, const Auxiliary& aux) {
  PriceTable table;
  if (!aux.participating()) return table;
  for (int k = aux.max_feasible_k; k >= 1; --k) {
    const double z = aux.z_of_k(k);
    const double g = foc_lhs(z, aux, inst.market());
    if (!(g > 0.0) || !std::isfinite(g)) continue;
    table.k.push_back(k);
    table.chi.push_back(price_term(inst, aux) / g);
  }
  // g increases with K, so walking K downwards already yields ascending prices.
  return table;
}

double h_function(double x, std::size_t edges, const StackelbergParams& params) {
  const double radicand = params.h_a * x / static_cast<double>(edges) + params.h_b;
  if (!(radicand >= 0.0)) throw std::domain_error("H argument outside its domain");
  return params.h_beta * std::sqrt(radicand);
}

double cloud_utility(const NetworkInstance& inst, std::span<const Auxiliary> aux,
                     std::span<const double> chi, std::span<const int> schedule) {
  double gains = 0.0;
  double payments = 0.0;
  for (std::size_t l = 0; l < aux.size(); ++l) {
    if (!aux[l].participating()) continue;
    const double gain = accuracy_gain(schedule[l], aux[l], inst.market());
    gains += gain;
    payments += chi[l] * gain;
  }
  return h_function(gains, inst.num_edges(), inst.market()) - payments;
}

double initial_price(const PriceTable& table) {
  if (table.empty()) return 0.0;
  return 0.5 * (table.min() + table.max());
}

namespace {

double guarded_cloud_utility(const NetworkInstance& inst, std::span<const Auxiliary> aux,
                             std::span<const double> chi, std::span<const int> schedule) {
  try {
    const double u = cloud_utility(inst, aux, chi, schedule);
    return std::isfinite(u) ? u : -std::numeric_limits<double>::infinity();
  } catch (const std::domain_error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

/// Adjacent table indices (a, b) with chi[a] <= price <= chi[b].
std::pair<std::size_t, std::size_t> bracket(const PriceTable& table, double price) {
  const auto& c = table.chi;
  auto it = std::upper_bound(c.begin(), c.end(), price);
  std::size_t b = static_cast<std::size_t>(it - c.begin());
  if (b >= c.size()) b = c.size() - 1;
  if (b == 0) b = 1;
  return {b - 1, b};
}

}  // namespace

PricingResult solve_pricing(const NetworkInstance& inst, const CoalitionPartition& partition,
                            const PricingOptions& options) {
  const std::size_t L = partition.num_edges();
  PricingResult r;
  r.aux.resize(L);
  r.tables.resize(L);
  r.chi.assign(L, 0.0);
  r.schedule.assign(L, 0);
  if (options.initial_chi && options.initial_chi->size() != L)
    throw std::invalid_argument("initial price vector must have one entry per edge");

  std::vector<bool> adjustable(L, false);
  for (std::size_t l = 0; l < L; ++l) {
    if (partition.members(l).empty()) continue;
    const bool in_scope =
        !options.restrict_to ||
        std::find(options.restrict_to->begin(), options.restrict_to->end(), l) !=
            options.restrict_to->end();
    r.aux[l] = make_auxiliary(inst, partition.view(l));
    r.tables[l] = tabulate_prices(inst, r.aux[l]);
    const auto& t = r.tables[l];
    if (!in_scope) {
      // Definition of the follower side: untouched edges keep price and K.
      if (!options.initial_chi)
        throw std::invalid_argument("restricted pricing needs prices for the other edges");
      r.chi[l] = (*options.initial_chi)[l];
      r.schedule[l] = partition.agg_count(l);
      continue;
    }
    if (!r.aux[l].participating()) {
      r.schedule[l] = 1;
      continue;
    }
    const double warm = options.initial_chi ? (*options.initial_chi)[l]
                                            : std::numeric_limits<double>::quiet_NaN();
    if (t.empty())
      r.chi[l] = 0.0;
    else if (std::isfinite(warm))
      r.chi[l] = std::clamp(warm, t.min(), t.max());
    else
      r.chi[l] = initial_price(t);
    adjustable[l] = t.chi.size() >= 2 && t.max() > t.min();
    r.schedule[l] = best_response_k(inst, r.aux[l], r.chi[l]);
  }

  double current = guarded_cloud_utility(inst, r.aux, r.chi, r.schedule);
  // Undefined start: sweep each adjustable edge's whole table once so the
  // local search begins from a configuration where H is defined.
  if (std::isinf(current)) {
    for (std::size_t l = 0; l < L && std::isinf(current); ++l) {
      if (!adjustable[l]) continue;
      const double held_chi = r.chi[l];
      const int held_k = r.schedule[l];
      double best = current;
      double best_chi = held_chi;
      int best_k = held_k;
      for (double c : r.tables[l].chi) {
        r.chi[l] = c;
        r.schedule[l] = best_response_k(inst, r.aux[l], c);
        const double u = guarded_cloud_utility(inst, r.aux, r.chi, r.schedule);
        if (u > best) {
          best = u;
          best_chi = c;
          best_k = r.schedule[l];
        }
      }
      r.chi[l] = best_chi;
      r.schedule[l] = best_k;
      current = best;
    }
  }
  for (r.cycles = 0; r.cycles < options.max_cycles;) {
    bool changed = false;
    for (std::size_t l = 0; l < L; ++l) {
      if (!adjustable[l]) continue;
      const auto& t = r.tables[l];
      const double step = inst.market().price_step_fraction * (t.max() - t.min());
      const double held_chi = r.chi[l];
      const int held_k = r.schedule[l];
      for (double dir : {1.0, -1.0}) {
        const double probe = std::clamp(held_chi + dir * step, t.min(), t.max());
        const auto [a, b] = bracket(t, probe);
        double best = -std::numeric_limits<double>::infinity();
        double best_chi = held_chi;
        int best_k = held_k;
        for (std::size_t idx : {a, b}) {
          r.chi[l] = t.chi[idx];
          r.schedule[l] = best_response_k(inst, r.aux[l], r.chi[l]);
          const double u = guarded_cloud_utility(inst, r.aux, r.chi, r.schedule);
          if (u > best) {
            best = u;
            best_chi = r.chi[l];
            best_k = r.schedule[l];
          }
        }
        const bool improves = std::isinf(current)
                                  ? std::isfinite(best)
                                  : best > current + 1e-12 * std::max(1.0, std::abs(current));
        if (improves) {
          r.chi[l] = best_chi;
          r.schedule[l] = best_k;
          current = best;
          r.accepted_utilities.push_back(current);
          changed = true;
          break;
        }
        r.chi[l] = held_chi;
        r.schedule[l] = held_k;
      }
    }
    ++r.cycles;
    if (!changed) {
      r.converged = true;
      break;
    }
  }
  r.defined = !std::isinf(current);
  r.cloud_utility = current;
  return r;
}

void apply_edge_aggregations_rule(const NetworkInstance& inst, CoalitionPartition& partition,
                                  std::span<const double> chi, std::size_t from,
                                  std::size_t to) {
  for (std::size_t e : {from, to}) {
    if (partition.members(e).empty()) {
      partition.set_agg_count(e, 0);
      continue;
    }
    const auto aux = make_auxiliary(inst, partition.view(e));
    partition.set_agg_count(e, aux.participating() ? best_response_k(inst, aux, chi[e]) : 1);
  }
}

}  // namespace hfl::stackelberg
