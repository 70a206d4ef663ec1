#include "hfl/serialization.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace hfl {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const NetworkInstance& inst) {
  const auto& c = inst.config();
  json j;
  j["config"] = {{"total_bandwidth", c.total_bandwidth},
                 {"cloud_interval", c.cloud_interval},
                 {"model_size", c.model_size},
                 {"noise_power", c.noise_power},
                 {"rng_seed", c.rng_seed}};
  json devices = json::array();
  for (const auto& d : inst.devices())
    devices.push_back({{"id", d.id},
                       {"cpu_freq", d.cpu_freq},
                       {"cycles_per_unit", d.cycles_per_unit},
                       {"tx_power", d.tx_power},
                       {"x", d.position.x},
                       {"y", d.position.y}});
  j["devices"] = std::move(devices);
  json edges = json::array();
  const auto& e = inst.econ();
  for (const auto& s : inst.edges())
    edges.push_back({{"id", s.id},
                     {"x", s.position.x},
                     {"y", s.position.y},
                     {"unit_price", e.unit_price[s.id]},
                     {"fixed_reward", e.fixed_reward[s.id]},
                     {"congestion_coef", e.congestion_coef[s.id]}});
  j["edges"] = std::move(edges);
  j["improvement_coef"] = e.improvement_coef;
  const auto& m = inst.market();
  j["market"] = {{"loss_valuation", m.loss_valuation}, {"max_loss", m.max_loss},
                 {"h_beta", m.h_beta},                 {"h_a", m.h_a},
                 {"h_b", m.h_b},                       {"price_step_fraction", m.price_step_fraction}};
  j["gains"] = inst.channel().row_major();
  return j;
}

NetworkInstance instance_from_json(const json& j) {
  SystemConfig cfg;
  const auto& c = j.at("config");
  cfg.total_bandwidth = c.at("total_bandwidth").get<double>();
  cfg.cloud_interval = c.at("cloud_interval").get<double>();
  cfg.model_size = c.at("model_size").get<double>();
  cfg.noise_power = c.at("noise_power").get<double>();
  cfg.rng_seed = c.value("rng_seed", std::uint64_t{0});

  std::vector<Device> devices;
  for (const auto& d : j.at("devices")) {
    Device dev;
    dev.id = d.at("id").get<std::size_t>();
    dev.cpu_freq = d.at("cpu_freq").get<double>();
    dev.cycles_per_unit = d.at("cycles_per_unit").get<double>();
    dev.tx_power = d.at("tx_power").get<double>();
    dev.position = {d.at("x").get<double>(), d.at("y").get<double>()};
    devices.push_back(dev);
  }
  std::vector<EdgeServer> edges;
  EconomicParams econ;
  econ.improvement_coef = j.value("improvement_coef", 1.0);
  for (const auto& e : j.at("edges")) {
    edges.push_back({e.at("id").get<std::size_t>(), {e.at("x").get<double>(), e.at("y").get<double>()}});
    econ.unit_price.push_back(e.at("unit_price").get<double>());
    econ.fixed_reward.push_back(e.at("fixed_reward").get<double>());
    econ.congestion_coef.push_back(e.at("congestion_coef").get<double>());
  }
  StackelbergParams market;
  if (j.contains("market")) {
    const auto& m = j.at("market");
    market.loss_valuation = m.value("loss_valuation", market.loss_valuation);
    market.max_loss = m.value("max_loss", market.max_loss);
    market.h_beta = m.value("h_beta", market.h_beta);
    market.h_a = m.value("h_a", market.h_a);
    market.h_b = m.value("h_b", market.h_b);
    market.price_step_fraction = m.value("price_step_fraction", market.price_step_fraction);
  }
  const std::size_t n = devices.size();
  const std::size_t l = edges.size();
  return NetworkInstance(cfg, std::move(devices), std::move(edges),
                         ChannelMatrix(n, l, j.at("gains").get<std::vector<double>>()),
                         std::move(econ), market);
}

json to_json(const GameState& state) {
  const auto& p = state.partition;
  return {{"assignment", p.assignment()},
          {"bandwidth", p.bandwidth()},
          {"agg_counts", p.agg_counts()},
          {"chi", state.chi}};
}

GameState state_from_json(const json& j) {
  const auto bandwidth = j.at("bandwidth").get<std::vector<double>>();
  const auto counts = j.at("agg_counts").get<std::vector<int>>();
  GameState s{CoalitionPartition(bandwidth.size(), j.at("assignment").get<std::vector<std::size_t>>()),
              j.at("chi").get<std::vector<double>>()};
  if (counts.size() != bandwidth.size() || s.chi.size() != bandwidth.size())
    throw std::invalid_argument("state vectors must have one entry per edge");
  s.partition.set_bandwidth(bandwidth);
  for (std::size_t l = 0; l < counts.size(); ++l) s.partition.set_agg_count(l, counts[l]);
  return s;
}

void write_switch_log_csv(std::ostream& out, std::span<const SwitchRecord> log) {
  out << "iteration,device,from,to,rule,accepted,psi_before,psi_after\n";
  for (const auto& r : log)
    out << r.iteration << ',' << r.device << ',' << r.from << ',' << r.to << ',' << to_string(r.rule)
        << ',' << (r.accepted ? 1 : 0) << ',' << format_double(r.potential_before) << ','
        << format_double(r.potential_after) << '\n';
}

}  // namespace hfl
