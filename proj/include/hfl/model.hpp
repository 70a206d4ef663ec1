#pragma once

// Problem instance and physical-layer timing/rate formulas.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace hfl {

inline constexpr double kBitsPerMbit = 1e6;

struct SystemConfig {
  double total_bandwidth = 5e6;  ///< Hz
  double cloud_interval = 20.0;  ///< seconds between cloud aggregations
  double model_size = 3e6;       ///< bits per uploaded local model
  double noise_power = 1e-7;     ///< W
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

double distance(Position a, Position b);

struct Device {
  std::size_t id = 0;
  double cpu_freq = 0.0;         ///< cycles / s
  double cycles_per_unit = 0.0;  ///< cycles per data unit
  double tx_power = 0.0;         ///< W
  Position position;

  /// Data units processed per second of local training.
  double throughput() const { return cpu_freq / cycles_per_unit; }
};

struct EdgeServer {
  std::size_t id = 0;
  Position position;
};

/// Dense N x L matrix of channel gains, row-major by device.
class ChannelMatrix {
 public:
  ChannelMatrix() = default;
  ChannelMatrix(std::size_t devices, std::size_t edges, std::vector<double> gains);

  double operator()(std::size_t device, std::size_t edge) const {
    return gains_[device * edges_ + edge];
  }
  std::size_t devices() const { return devices_; }
  std::size_t edges() const { return edges_; }
  const std::vector<double>& row_major() const { return gains_; }

 private:
  std::size_t devices_ = 0;
  std::size_t edges_ = 0;
  std::vector<double> gains_;
};

/// Per-edge prices and costs of the lower-level game.
struct EconomicParams {
  std::vector<double> unit_price;       ///< rho_l, reward per unit model improvement
  std::vector<double> fixed_reward;     ///< x_l, paid per member
  std::vector<double> congestion_coef;  ///< alpha_l, cost per (Mbit/s)^2
  double improvement_coef = 1.0;        ///< xi

  void validate(std::size_t edges) const;
};

/// Constants of the cloud/edge Stackelberg game.
struct StackelbergParams {
  double loss_valuation = 1.0;        ///< lambda
  double max_loss = 3.0;              ///< G
  double h_beta = 2.0;                ///< beta in H(x) = beta (a x / L + b)^0.5
  double h_a = 1.0;
  double h_b = 1.0;
  double price_step_fraction = 0.02;  ///< zeta as a fraction of the tabulated price range

  void validate() const;
};

/// Immutable problem instance. Construction validates every invariant and
/// caches the spectral efficiency log2(1 + P h / sigma^2) of each link.
class NetworkInstance {
 public:
  NetworkInstance(SystemConfig config, std::vector<Device> devices,
                  std::vector<EdgeServer> edges, ChannelMatrix channel,
                  EconomicParams econ, StackelbergParams market);

  const SystemConfig& config() const { return config_; }
  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<EdgeServer>& edges() const { return edges_; }
  const ChannelMatrix& channel() const { return channel_; }
  const EconomicParams& econ() const { return econ_; }
  const StackelbergParams& market() const { return market_; }

  std::size_t num_devices() const { return devices_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const Device& device(std::size_t n) const { return devices_[n]; }

  double snr(std::size_t device, std::size_t edge) const;
  double spectral_efficiency(std::size_t device, std::size_t edge) const {
    return efficiency_[device * edges_.size() + edge];
  }

  /// True if the device has a positive data budget at K = 1 when alone on
  /// an edge that holds an equal 1/L share of the bandwidth.
  bool has_feasible_association(std::size_t device) const;

 private:
  SystemConfig config_;
  std::vector<Device> devices_;
  std::vector<EdgeServer> edges_;
  ChannelMatrix channel_;
  EconomicParams econ_;
  StackelbergParams market_;
  std::vector<double> efficiency_;
};

/// Duration of one edge round, T^cloud / k.
double edge_aggregation_period(double cloud_interval, int k);

double local_training_time(double data_units, const Device& device);

/// Equal-split uplink rate in bit/s of a device inside a coalition.
double uplink_rate(const Device& device, std::size_t edge, std::size_t coalition_size,
                   double coalition_bandwidth, const ChannelMatrix& channel,
                   double noise_power);

/// Upload time in seconds, or nullopt when the rate is zero and no
/// deadline can be met.
std::optional<double> upload_time(double model_size, double rate);

}  // namespace hfl
