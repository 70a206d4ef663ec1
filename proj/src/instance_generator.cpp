#include "hfl/instance_generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfl {

namespace {

void require_range(const Range& r, const char* name, bool strictly_positive = true) {
  const bool ok = r.lo <= r.hi && (strictly_positive ? r.lo > 0.0 : r.lo >= 0.0) &&
                  std::isfinite(r.hi);
  if (!ok) throw std::invalid_argument(std::string("invalid range for ") + name);
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be > 0");
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

void ParameterRanges::validate() const {
  if (edges < 1) throw std::invalid_argument("need at least one edge server");
  if (devices < edges) throw std::invalid_argument("need at least as many devices as edges");
  require_positive(region_side, "region_side");
  require_range(cpu_freq, "cpu_freq");
  require_positive(cycles_per_unit, "cycles_per_unit");
  require_range(tx_power, "tx_power");
  require_range(congestion, "congestion", false);
  require_range(cloud_interval, "cloud_interval");
  require_range(unit_price, "unit_price", false);
  if (!(fixed_reward >= 0.0)) throw std::invalid_argument("fixed_reward must be >= 0");
  require_positive(improvement_coef, "improvement_coef");
  require_positive(model_size, "model_size");
  require_positive(total_bandwidth, "total_bandwidth");
  require_positive(noise_power, "noise_power");
  require_positive(path_loss_exponent, "path_loss_exponent");
  require_positive(reference_distance, "reference_distance");
  require_positive(min_distance, "min_distance");
  if (!(snr_min_db <= snr_max_db)) throw std::invalid_argument("snr_min_db must be <= snr_max_db");
  if (max_resamples < 1) throw std::invalid_argument("max_resamples must be >= 1");
  market.validate();
}

double link_snr(const ParameterRanges& r, double distance_m, double tx_power) {
  const double d = std::max(distance_m, r.min_distance);
  const double snr = from_db(r.reference_snr_db) * tx_power *
                     std::pow(r.reference_distance / d, r.path_loss_exponent);
  return std::clamp(snr, from_db(r.snr_min_db), from_db(r.snr_max_db));
}

NetworkInstance generate_instance(const ParameterRanges& ranges, Rng& rng) {
  ranges.validate();
  const std::size_t N = ranges.devices;
  const std::size_t L = ranges.edges;
  for (int attempt = 0; attempt < ranges.max_resamples; ++attempt) {
    SystemConfig cfg;
    cfg.total_bandwidth = ranges.total_bandwidth;
    cfg.model_size = ranges.model_size;
    cfg.noise_power = ranges.noise_power;
    cfg.rng_seed = rng.next_u64();
    cfg.cloud_interval = rng.uniform(ranges.cloud_interval.lo, ranges.cloud_interval.hi);

    std::vector<EdgeServer> edges(L);
    for (std::size_t l = 0; l < L; ++l) {
      edges[l].id = l;
      edges[l].position.x = rng.uniform(0.0, ranges.region_side);
      edges[l].position.y = rng.uniform(0.0, ranges.region_side);
    }
    EconomicParams econ;
    econ.improvement_coef = ranges.improvement_coef;
    for (std::size_t l = 0; l < L; ++l) {
      econ.unit_price.push_back(rng.uniform(ranges.unit_price.lo, ranges.unit_price.hi));
      econ.congestion_coef.push_back(rng.uniform(ranges.congestion.lo, ranges.congestion.hi));
      econ.fixed_reward.push_back(ranges.fixed_reward);
    }

    std::vector<Device> devices(N);
    for (std::size_t n = 0; n < N; ++n) {
      Device& d = devices[n];
      d.id = n;
      d.position.x = rng.uniform(0.0, ranges.region_side);
      d.position.y = rng.uniform(0.0, ranges.region_side);
      d.cpu_freq = rng.uniform(ranges.cpu_freq.lo, ranges.cpu_freq.hi);
      d.cycles_per_unit = ranges.cycles_per_unit;
      d.tx_power = rng.uniform(ranges.tx_power.lo, ranges.tx_power.hi);
    }

    std::vector<double> gains(N * L);
    bool feasible = true;
    for (std::size_t n = 0; n < N && feasible; ++n) {
      bool any = false;
      for (std::size_t l = 0; l < L; ++l) {
        const double snr =
            link_snr(ranges, distance(devices[n].position, edges[l].position), devices[n].tx_power);
        gains[n * L + l] = snr * cfg.noise_power / devices[n].tx_power;
        const double rate = cfg.total_bandwidth / static_cast<double>(L) * std::log2(1.0 + snr);
        if (cfg.cloud_interval - cfg.model_size / rate > 0.0) any = true;
      }
      feasible = any;
    }
    if (!feasible) continue;
    return NetworkInstance(cfg, std::move(devices), std::move(edges),
                           ChannelMatrix(N, L, std::move(gains)), std::move(econ), ranges.market);
  }
  throw std::runtime_error("no feasible instance after " + std::to_string(ranges.max_resamples) +
                           " draws");
}

}  // namespace hfl
