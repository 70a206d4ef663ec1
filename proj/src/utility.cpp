#include "hfl/utility.hpp"

#include "hfl/partition.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hfl {

double model_improvement(int k, double total_data, double xi) {
  if (k < 1) throw std::invalid_argument("edge aggregation count must be >= 1");
  if (total_data < 0.0) throw std::invalid_argument("total data must be >= 0");
  return xi * std::sqrt(static_cast<double>(k) * total_data);
}

double coalition_revenue(std::size_t members, int k, double total_data, double unit_price,
                         double xi, double fixed_reward) {
  if (members == 0) throw std::invalid_argument("coalition must be nonempty");
  return unit_price * model_improvement(k, total_data, xi) +
         static_cast<double>(members) * fixed_reward;
}

double congestion_cost(std::span<const double> rates_bps, double alpha) {
  double total = 0.0;
  for (double r : rates_bps) {
    if (r < 0.0) throw std::invalid_argument("rates must be >= 0");
    total += r;
  }
  const double mbps = total / kBitsPerMbit;
  return alpha * mbps * mbps;
}

std::vector<double> member_rates(const NetworkInstance& inst, const CoalitionView& c) {
  std::vector<double> rates;
  rates.reserve(c.size());
  if (c.empty()) return rates;
  const double share = c.bandwidth / static_cast<double>(c.size());
  for (std::size_t n : c.members) rates.push_back(share * inst.spectral_efficiency(n, c.edge));
  return rates;
}

double nash_data_strategy(const NetworkInstance& inst, std::size_t device, std::size_t edge,
                          std::size_t coalition_size, int k, double bandwidth) {
  const auto& cfg = inst.config();
  const double period = edge_aggregation_period(cfg.cloud_interval, k);
  if (coalition_size == 0) throw std::invalid_argument("coalition size must be >= 1");
  const double rate = bandwidth / static_cast<double>(coalition_size) *
                      inst.spectral_efficiency(device, edge);
  const auto upload = upload_time(cfg.model_size, rate);
  if (!upload) return 0.0;
  const double budget = period - *upload;
  if (budget <= 0.0) return 0.0;
  return budget * inst.device(device).throughput();
}

DataProfile nash_data_profile(const NetworkInstance& inst, const CoalitionView& c) {
  DataProfile data;
  data.reserve(c.size());
  for (std::size_t n : c.members)
    data.push_back(nash_data_strategy(inst, n, c.edge, c.size(), c.k, c.bandwidth));
  return data;
}

namespace {

struct CoalitionTerms {
  double improvement_reward = 0.0;  // rho xi sqrt(k sum D)
  double total_data = 0.0;
  double congestion = 0.0;          // per member
};

CoalitionTerms terms(const NetworkInstance& inst, const CoalitionView& c,
                     std::span<const double> data) {
  if (data.size() != c.size()) throw std::invalid_argument("data profile size mismatch");
  const auto rates = member_rates(inst, c);
  CoalitionTerms t;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] < 0.0) throw std::invalid_argument("data amounts must be >= 0");
    if (data[i] > 0.0 && !(rates[i] > 0.0))
      throw std::domain_error("member with positive data has zero uplink rate");
    t.total_data += data[i];
  }
  const auto& econ = inst.econ();
  t.improvement_reward =
      econ.unit_price[c.edge] * model_improvement(c.k, t.total_data, econ.improvement_coef);
  t.congestion = congestion_cost(rates, econ.congestion_coef[c.edge]);
  return t;
}

}  // namespace

double coalition_utility(const NetworkInstance& inst, const CoalitionView& c,
                         std::span<const double> data) {
  if (c.empty()) return 0.0;
  const auto t = terms(inst, c, data);
  const auto& econ = inst.econ();
  const double m = static_cast<double>(c.size());
  const double revenue = coalition_revenue(c.size(), c.k, t.total_data, econ.unit_price[c.edge],
                                           econ.improvement_coef, econ.fixed_reward[c.edge]);
  return revenue - m * t.congestion;
}

double coalition_utility(const NetworkInstance& inst, const CoalitionView& c) {
  const auto data = nash_data_profile(inst, c);
  return coalition_utility(inst, c, data);
}

std::vector<double> device_utilities(const NetworkInstance& inst, const CoalitionView& c,
                                     std::span<const double> data) {
  std::vector<double> out;
  out.reserve(c.size());
  if (c.empty()) return out;
  const auto t = terms(inst, c, data);
  const double fixed = inst.econ().fixed_reward[c.edge];
  for (double d : data) {
    const double share = t.total_data > 0.0 ? d / t.total_data : 0.0;
    out.push_back(t.improvement_reward * share + fixed - t.congestion);
  }
  return out;
}

std::vector<double> device_utilities(const NetworkInstance& inst, const CoalitionView& c) {
  const auto data = nash_data_profile(inst, c);
  return device_utilities(inst, c, data);
}

double device_utility(const NetworkInstance& inst, const CoalitionView& c, std::size_t position,
                      std::span<const double> data) {
  if (position >= c.size()) throw std::out_of_range("device is not a member of the coalition");
  return device_utilities(inst, c, data)[position];
}

double total_utility(const NetworkInstance& inst, const CoalitionPartition& partition) {
  double total = 0.0;
  for (std::size_t l = 0; l < partition.num_edges(); ++l) {
    if (partition.members(l).empty()) continue;
    total += coalition_utility(inst, partition.view(l));
  }
  return total;
}

}  // namespace hfl
