#include "hfl/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace hfl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SystemConfig::validate() const {
  require(positive(total_bandwidth), "total_bandwidth must be > 0");
  require(positive(cloud_interval), "cloud_interval must be > 0");
  require(positive(model_size), "model_size must be > 0");
  require(positive(noise_power), "noise_power must be > 0");
}

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

ChannelMatrix::ChannelMatrix(std::size_t devices, std::size_t edges, std::vector<double> gains)
    : devices_(devices), edges_(edges), gains_(std::move(gains)) {
  require(gains_.size() == devices_ * edges_, "channel matrix shape mismatch");
  for (double g : gains_) require(positive(g), "channel gains must be > 0");
}

void EconomicParams::validate(std::size_t edges) const {
  require(unit_price.size() == edges && fixed_reward.size() == edges &&
              congestion_coef.size() == edges,
          "economic parameter vectors must have one entry per edge");
  for (std::size_t l = 0; l < edges; ++l) {
    require(positive(unit_price[l]), "unit_price must be > 0");
    require(std::isfinite(fixed_reward[l]) && fixed_reward[l] >= 0.0,
            "fixed_reward must be >= 0");
    require(positive(congestion_coef[l]), "congestion_coef must be > 0");
  }
  require(positive(improvement_coef), "improvement_coef must be > 0");
}

void StackelbergParams::validate() const {
  require(positive(loss_valuation), "loss_valuation must be > 0");
  require(positive(max_loss), "max_loss must be > 0");
  require(positive(h_beta), "h_beta must be > 0");
  require(positive(h_a), "h_a must be > 0");
  require(std::isfinite(h_b) && h_b >= 0.0, "h_b must be >= 0");
  require(positive(price_step_fraction), "price_step_fraction must be > 0");
}

NetworkInstance::NetworkInstance(SystemConfig config, std::vector<Device> devices,
                                 std::vector<EdgeServer> edges, ChannelMatrix channel,
                                 EconomicParams econ, StackelbergParams market)
    : config_(config),
      devices_(std::move(devices)),
      edges_(std::move(edges)),
      channel_(std::move(channel)),
      econ_(std::move(econ)),
      market_(market) {
  config_.validate();
  const std::size_t n = devices_.size();
  const std::size_t l = edges_.size();
  require(l >= 1, "at least one edge server is required");
  require(n >= l, "instance needs N >= L");
  require(channel_.devices() == n && channel_.edges() == l,
          "channel matrix shape must be N x L");
  for (std::size_t i = 0; i < n; ++i) {
    const Device& d = devices_[i];
    require(d.id == i, "device ids must be 0..N-1 in order");
    require(positive(d.cpu_freq) && positive(d.cycles_per_unit) && positive(d.tx_power),
            "device parameters must be > 0");
  }
  for (std::size_t j = 0; j < l; ++j) require(edges_[j].id == j, "edge ids must be 0..L-1 in order");
  econ_.validate(l);
  market_.validate();

  efficiency_.resize(n * l);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < l; ++j) efficiency_[i * l + j] = std::log2(1.0 + snr(i, j));

  for (std::size_t i = 0; i < n; ++i)
    require(has_feasible_association(i),
            "device " + std::to_string(i) + " has no feasible edge association");
}

double NetworkInstance::snr(std::size_t device, std::size_t edge) const {
  return devices_[device].tx_power * channel_(device, edge) / config_.noise_power;
}

bool NetworkInstance::has_feasible_association(std::size_t device) const {
  const double share = config_.total_bandwidth / static_cast<double>(edges_.size());
  for (std::size_t l = 0; l < edges_.size(); ++l) {
    const double rate = share * spectral_efficiency(device, l);
    if (config_.cloud_interval - config_.model_size / rate > 0.0) return true;
  }
  return false;
}

double edge_aggregation_period(double cloud_interval, int k) {
  if (k < 1) throw std::invalid_argument("edge aggregation count must be >= 1");
  if (!(cloud_interval > 0.0)) throw std::invalid_argument("cloud_interval must be > 0");
  return cloud_interval / static_cast<double>(k);
}

double local_training_time(double data_units, const Device& device) {
  if (data_units < 0.0) throw std::invalid_argument("data amount must be >= 0");
  return data_units * device.cycles_per_unit / device.cpu_freq;
}

double uplink_rate(const Device& device, std::size_t edge, std::size_t coalition_size,
                   double coalition_bandwidth, const ChannelMatrix& channel,
                   double noise_power) {
  if (coalition_size == 0) throw std::invalid_argument("coalition size must be >= 1");
  if (coalition_bandwidth < 0.0) throw std::invalid_argument("bandwidth must be >= 0");
  const double snr = device.tx_power * channel(device.id, edge) / noise_power;
  return coalition_bandwidth / static_cast<double>(coalition_size) * std::log2(1.0 + snr);
}

std::optional<double> upload_time(double model_size, double rate) {
  if (!(rate > 0.0)) return std::nullopt;
  return model_size / rate;
}

}  // namespace hfl
