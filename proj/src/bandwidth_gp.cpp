#include "hfl/bandwidth_gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace hfl::gp {

void GPConfig::validate() const {
  if (!(initial_step > 0.0) || !(min_step > 0.0) || min_step > initial_step)
    throw std::invalid_argument("GP step sizes must satisfy 0 < min_step <= initial_step");
  if (max_iters < 1) throw std::invalid_argument("GP max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("GP tolerance must be > 0");
}

namespace {

struct TermParts {
  double value = 0.0;
  double slope = 0.0;
};

TermParts term_parts(const NetworkInstance& inst, const CoalitionView& c, double hz,
                     bool with_slope) {
  TermParts out;
  if (c.empty()) return out;
  const auto& cfg = inst.config();
  const auto& econ = inst.econ();
  const double m = static_cast<double>(c.size());
  const double k = static_cast<double>(c.k);
  const double period = cfg.cloud_interval / k;

  double weighted = 0.0;        // k * sum of clamped data
  double weighted_slope = 0.0;  // d(weighted)/d(hz)
  double efficiency_sum = 0.0;
  for (std::size_t n : c.members) {
    const double se = inst.spectral_efficiency(n, c.edge);
    efficiency_sum += se;
    if (hz <= 0.0) continue;
    const double theta = inst.device(n).throughput();
    const double budget = period - cfg.model_size * m / (hz * se);
    if (budget > 0.0) {
      weighted += k * budget * theta;
      weighted_slope += k * cfg.model_size * m * theta / (hz * hz * se);
    }
  }
  const double reward = econ.unit_price[c.edge] * econ.improvement_coef;
  const double load = efficiency_sum / (m * kBitsPerMbit);  // Mbit/s per Hz
  const double alpha = econ.congestion_coef[c.edge];
  const double hz_pos = std::max(hz, 0.0);

  out.value = reward * std::sqrt(weighted) + m * econ.fixed_reward[c.edge] -
              m * alpha * (hz_pos * load) * (hz_pos * load);
  if (with_slope) {
    const double revenue_slope =
        weighted > 0.0 ? reward * weighted_slope / (2.0 * std::sqrt(weighted)) : 0.0;
    out.slope = revenue_slope - 2.0 * m * alpha * load * load * hz_pos;
  }
  return out;
}

double residual(std::span<const double> b, double total) {
  double sum = 0.0;
  double worst = 0.0;
  for (double v : b) {
    sum += v;
    worst = std::max(worst, -v);
  }
  return std::max(worst, std::max(0.0, sum - total));
}

/// Backtracking projected ascent shared by the full and pair solvers.
/// `scale` converts the unit-infinity-norm direction into variable units.
struct Problem {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> grad;
  std::function<std::vector<double>(std::span<const double>)> proj;
  std::function<double(std::span<const double>)> feasibility;
  double scale = 1.0;
};

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

AscentResult ascend(const Problem& p, std::vector<double> x, const GPConfig& cfg,
                    bool record_trace) {
  cfg.validate();
  AscentResult r;
  double value = p.value(x);
  if (record_trace) r.trace.push_back({0, value, 0.0, p.feasibility(x)});
  std::vector<double> candidate(x.size());
  std::vector<double> raw(x.size());
  for (int it = 1; it <= cfg.max_iters; ++it) {
    r.iterations = it;
    const auto g = p.grad(x);
    double norm = 0.0;
    for (double v : g) norm = std::max(norm, std::abs(v));
    if (!(norm > 0.0)) {
      r.converged = true;
      break;
    }
    for (std::size_t i = 0; i < x.size(); ++i) raw[i] = x[i] + g[i] / norm * p.scale;
    const auto target = p.proj(raw);

    // Halve from the initial step; once a step improves on the current
    // value, keep halving while that improves further. A full step can land
    // in the flat zero-data region, which beats a congested start but is a
    // spurious stationary point.
    std::vector<double> best_x;
    double best_value = value;
    double best_step = 0.0;
    for (double step = cfg.initial_step; step >= cfg.min_step; step *= 0.5) {
      for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = x[i] + step * (target[i] - x[i]);
      candidate = p.proj(candidate);
      const double cand_value = p.value(candidate);
      if (cand_value > best_value) {
        best_value = cand_value;
        best_x = candidate;
        best_step = step;
      } else if (!best_x.empty()) {
        break;
      }
    }
    if (best_x.empty()) {
      r.converged = true;
      break;
    }
    const double change = best_value - value;
    const double step = best_step;
    x = std::move(best_x);
    value = best_value;
    if (record_trace) r.trace.push_back({it, value, step, p.feasibility(x)});
    if (std::abs(change) <= cfg.tolerance * std::max(1.0, std::abs(value))) {
      r.converged = true;
      break;
    }
  }
  r.x = std::move(x);
  r.value = value;
  return r;
}

/// Global maximizer of one coalition's term over [0, cap]. Each device's
/// clamped data is concave above its activation bandwidth, so the term is
/// concave between consecutive activation points; golden-section search on
/// every such piece and keep the best.
double term_argmax(const NetworkInstance& inst, const CoalitionView& c, double cap) {
  if (c.empty() || cap <= 0.0) return 0.0;
  const auto& cfg = inst.config();
  const double period = cfg.cloud_interval / static_cast<double>(c.k);
  const double m = static_cast<double>(c.size());
  std::vector<double> cuts{0.0, cap};
  for (std::size_t n : c.members) {
    const double t = cfg.model_size * m / (period * inst.spectral_efficiency(n, c.edge));
    if (t > 0.0 && t < cap) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double best_x = 0.0;
  double best_v = coalition_term(inst, c, 0.0);
  auto consider = [&](double x) {
    const double v = coalition_term(inst, c, x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i];
    double hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = coalition_term(inst, c, a);
    double fb = coalition_term(inst, c, b);
    for (int it = 0; it < 60; ++it) {
      if (fa < fb) {
        lo = a;
        a = b;
        fa = fb;
        b = lo + inv_phi * (hi - lo);
        fb = coalition_term(inst, c, b);
      } else {
        hi = b;
        b = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = coalition_term(inst, c, a);
      }
    }
    consider(0.5 * (lo + hi));
    consider(cuts[i + 1]);
  }
  return best_x;
}

}  // namespace

double coalition_term(const NetworkInstance& inst, const CoalitionView& c, double hz) {
  return term_parts(inst, c, hz, false).value;
}

double coalition_slope(const NetworkInstance& inst, const CoalitionView& c, double hz) {
  return term_parts(inst, c, hz, true).slope;
}

double objective(const NetworkInstance& inst, std::span<const CoalitionView> coalitions,
                 std::span<const double> bandwidth) {
  if (coalitions.size() != bandwidth.size())
    throw std::invalid_argument("bandwidth vector must match coalition count");
  double total = 0.0;
  for (std::size_t l = 0; l < coalitions.size(); ++l)
    total += coalition_term(inst, coalitions[l], bandwidth[l]);
  return total;
}

std::vector<double> gradient(const NetworkInstance& inst,
                             std::span<const CoalitionView> coalitions,
                             std::span<const double> bandwidth) {
  if (coalitions.size() != bandwidth.size())
    throw std::invalid_argument("bandwidth vector must match coalition count");
  std::vector<double> g(coalitions.size());
  for (std::size_t l = 0; l < coalitions.size(); ++l)
    g[l] = coalition_slope(inst, coalitions[l], bandwidth[l]);
  return g;
}

BandwidthAllocation project(std::span<const double> raw, double total) {
  if (!(total >= 0.0)) throw std::invalid_argument("projection budget must be >= 0");
  BandwidthAllocation out(raw.size());
  double clipped_sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::max(raw[i], 0.0);
    clipped_sum += out[i];
  }
  if (clipped_sum <= total) return out;

  // Simplex projection: sort descending, find the largest prefix whose
  // shifted values stay positive.
  std::vector<double> sorted(raw.begin(), raw.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    prefix += sorted[j];
    const double t = (prefix - total) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) threshold = t;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::max(raw[i] - threshold, 0.0);
    sum += out[i];
  }
  // Rounding can leave the sum an ulp above the budget.
  if (sum > total && sum > 0.0) {
    const double shrink = total / sum;
    for (double& v : out) v *= shrink;
  }
  return out;
}

GPReport solve(const NetworkInstance& inst, std::span<const CoalitionView> coalitions,
               double total, const GPConfig& config, bool record_trace) {
  std::vector<std::size_t> active;
  for (std::size_t l = 0; l < coalitions.size(); ++l)
    if (!coalitions[l].empty()) active.push_back(l);

  GPReport report;
  report.bandwidth.assign(coalitions.size(), 0.0);
  if (active.empty() || total <= 0.0) {
    report.objective = objective(inst, coalitions, report.bandwidth);
    report.converged = true;
    return report;
  }

  auto expand = [&](std::span<const double> x) {
    std::vector<double> full(coalitions.size(), 0.0);
    for (std::size_t i = 0; i < active.size(); ++i) full[active[i]] = x[i];
    return full;
  };
  Problem p;
  p.value = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i)
      v += coalition_term(inst, coalitions[active[i]], x[i]);
    return v;
  };
  p.grad = [&](std::span<const double> x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < active.size(); ++i)
      g[i] = coalition_slope(inst, coalitions[active[i]], x[i]);
    return g;
  };
  p.proj = [total](std::span<const double> x) { return project(x, total); };
  p.feasibility = [total](std::span<const double> x) { return residual(x, total); };
  p.scale = total;

  // The equal split is the primary start. The clamp makes the objective
  // nonconcave, so a second ascent starts from the projected per-coalition
  // maximizers (the exact optimum whenever the budget is slack) and the
  // better end point wins.
  std::vector<double> start(active.size(), total / static_cast<double>(active.size()));
  auto r = ascend(p, std::move(start), config, record_trace);
  std::vector<double> separate(active.size());
  for (std::size_t i = 0; i < active.size(); ++i)
    separate[i] = term_argmax(inst, coalitions[active[i]], total);
  auto alt = ascend(p, project(separate, total), config, false);
  if (alt.value > r.value) {
    alt.trace = std::move(r.trace);
    r = std::move(alt);
  }
  report.bandwidth = expand(r.x);
  report.objective = objective(inst, coalitions, report.bandwidth);
  report.iterations = r.iterations;
  report.converged = r.converged;
  report.trace = std::move(r.trace);
  return report;
}

GPReport solve_pair(const NetworkInstance& inst, const CoalitionView& first,
                    const CoalitionView& second, double pair_sum, const GPConfig& config) {
  if (!(pair_sum >= 0.0)) throw std::invalid_argument("pair sum must be >= 0");
  if (first.edge == second.edge) throw std::invalid_argument("pair must name two coalitions");
  GPReport report;
  auto finish = [&](double t) {
    report.bandwidth = {t, pair_sum - t};
    report.objective = coalition_term(inst, first, t) + coalition_term(inst, second, pair_sum - t);
  };
  if (first.empty() || second.empty() || pair_sum == 0.0) {
    finish(first.empty() ? 0.0 : pair_sum);
    report.converged = true;
    return report;
  }

  Problem p;
  p.value = [&](std::span<const double> x) {
    return coalition_term(inst, first, x[0]) + coalition_term(inst, second, pair_sum - x[0]);
  };
  p.grad = [&](std::span<const double> x) {
    return std::vector<double>{coalition_slope(inst, first, x[0]) -
                               coalition_slope(inst, second, pair_sum - x[0])};
  };
  p.proj = [pair_sum](std::span<const double> x) {
    return std::vector<double>{std::clamp(x[0], 0.0, pair_sum)};
  };
  p.feasibility = [pair_sum](std::span<const double> x) {
    return std::max({0.0, -x[0], x[0] - pair_sum});
  };
  p.scale = pair_sum;

  auto r = ascend(p, {0.5 * pair_sum}, config, false);
  const auto separate =
      project(std::vector<double>{term_argmax(inst, first, pair_sum),
                                  term_argmax(inst, second, pair_sum)},
              pair_sum);
  const double share = separate[0] + separate[1];
  const double t0 =
      share > 0.0 ? std::min(pair_sum, pair_sum * separate[0] / share) : 0.5 * pair_sum;
  auto alt = ascend(p, {t0}, config, false);
  if (alt.value > r.value) r = std::move(alt);
  finish(r.x[0]);
  report.iterations = r.iterations;
  report.converged = r.converged;
  return report;
}

}  // namespace hfl::gp
