#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hfl/digest.hpp"
#include "hfl/instance_generator.hpp"
#include "hfl/serialization.hpp"
#include "support.hpp"

using namespace hfl;

TEST_CASE("default shape: 12 devices, 4 edges") {
  const auto inst = test::random_instance(1);
  CHECK(inst.num_devices() == 12);
  CHECK(inst.num_edges() == 4);
}

TEST_CASE("identical seeds give identical instances") {
  ParameterRanges r;
  Rng a(77);
  Rng b(77);
  Rng c(78);
  const auto x = sha256_hex(to_json(generate_instance(r, a)).dump());
  CHECK(x == sha256_hex(to_json(generate_instance(r, b)).dump()));
  CHECK(x != sha256_hex(to_json(generate_instance(r, c)).dump()));
}

TEST_CASE("sampled values stay within the declared ranges") {
  ParameterRanges r;
  Rng rng(2024);
  const double snr_lo = std::pow(10.0, r.snr_min_db / 10.0);
  const double snr_hi = std::pow(10.0, r.snr_max_db / 10.0);
  for (int i = 0; i < 10000; ++i) {
    const auto inst = generate_instance(r, rng);
    const auto& c = inst.config();
    REQUIRE(c.cloud_interval >= 15.0);
    REQUIRE(c.cloud_interval <= 25.0);
    REQUIRE(c.total_bandwidth == 5e6);
    REQUIRE(c.model_size == 3e6);
    REQUIRE(c.noise_power == 1e-7);
    for (const auto& d : inst.devices()) {
      REQUIRE(d.cpu_freq >= 1e9);
      REQUIRE(d.cpu_freq <= 4e9);
      REQUIRE(d.tx_power >= 0.2);
      REQUIRE(d.tx_power <= 0.5);
      REQUIRE(d.cycles_per_unit == 3e9);
      REQUIRE(d.position.x >= 0.0);
      REQUIRE(d.position.x <= 1000.0);
      REQUIRE(d.position.y >= 0.0);
      REQUIRE(d.position.y <= 1000.0);
    }
    for (std::size_t l = 0; l < inst.num_edges(); ++l) {
      REQUIRE(inst.econ().congestion_coef[l] >= 0.05);
      REQUIRE(inst.econ().congestion_coef[l] <= 0.15);
      REQUIRE(inst.econ().unit_price[l] >= 5.0);
      REQUIRE(inst.econ().unit_price[l] <= 15.0);
      for (std::size_t n = 0; n < inst.num_devices(); ++n) {
        REQUIRE(inst.snr(n, l) >= snr_lo * (1 - 1e-12));
        REQUIRE(inst.snr(n, l) <= snr_hi * (1 + 1e-12));
      }
    }
    for (std::size_t n = 0; n < inst.num_devices(); ++n)
      REQUIRE(inst.has_feasible_association(n));
  }
}

TEST_CASE("link SNR: reference point, path loss and clamping") {
  ParameterRanges r;
  CHECK(link_snr(r, 500.0, 1.0) == doctest::Approx(100.0));
  CHECK(link_snr(r, 1000.0, 1.0) == doctest::Approx(100.0 * std::pow(0.5, 3.5)));
  CHECK(link_snr(r, 0.0, 1.0) == doctest::Approx(1000.0));
  CHECK(link_snr(r, 1e6, 0.2) == doctest::Approx(1.0));
}

TEST_CASE("range validation") {
  ParameterRanges r;
  r.devices = 3;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.cpu_freq = {4e9, 1e9};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.tx_power = {-0.1, 0.5};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.total_bandwidth = 0.0;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("infeasible ranges exhaust the resample cap") {
  ParameterRanges r;
  r.model_size = 1e12;  // nobody can upload within a cloud interval
  r.max_resamples = 5;
  Rng rng(1);
  CHECK_THROWS_AS(generate_instance(r, rng), std::runtime_error);
}
