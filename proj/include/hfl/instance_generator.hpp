#pragma once

// Random instances in a square region with distance-based channel gains.

#include <cstddef>

#include "hfl/model.hpp"
#include "hfl/rng.hpp"

namespace hfl {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ParameterRanges {
  std::size_t devices = 12;
  std::size_t edges = 4;
  double region_side = 1000.0;            ///< metres
  Range cpu_freq{1e9, 4e9};               ///< cycles/s
  double cycles_per_unit = 3e9;
  Range tx_power{0.2, 0.5};               ///< W
  Range congestion{0.05, 0.15};           ///< alpha per (Mbit/s)^2
  Range cloud_interval{15.0, 25.0};       ///< s
  Range unit_price{5.0, 15.0};            ///< rho
  double fixed_reward = 1.0;              ///< x
  double improvement_coef = 1.0;          ///< xi
  double model_size = 3e6;                ///< bits
  double total_bandwidth = 5e6;           ///< Hz
  double noise_power = 1e-7;              ///< W

  // SNR = ref * (P / 1 W) * (d_ref / d)^exponent, clamped to [min, max].
  double path_loss_exponent = 3.5;
  double reference_distance = 500.0;      ///< metres
  double reference_snr_db = 20.0;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  double min_distance = 1.0;              ///< metres, guards d = 0

  StackelbergParams market;
  int max_resamples = 100;

  /// Throws std::invalid_argument on empty/negative ranges or N < L.
  void validate() const;
};

/// SNR (linear) of a link at distance d for transmit power p.
double link_snr(const ParameterRanges& ranges, double distance_m, double tx_power);

/// Samples an instance, redrawing infeasible ones up to `max_resamples`
/// times (std::runtime_error afterwards). The seed stored in the config is
/// the generator's first draw, so instances are reproducible from the rng.
NetworkInstance generate_instance(const ParameterRanges& ranges, Rng& rng);

}  // namespace hfl
