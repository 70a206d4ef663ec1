#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "hfl/partition.hpp"

using namespace hfl;

TEST_CASE("partition keeps assignment and member lists consistent") {
  CoalitionPartition p(3, {2, 0, 2, 1});
  CHECK(p.num_devices() == 4);
  CHECK(p.members(2) == std::vector<std::size_t>{0, 2});
  CHECK(p.agg_count(0) == 1);
  p.set_bandwidth(std::vector<double>{1.0, 1.0, 1.0});
  CHECK_NOTHROW(p.check_invariants(3.0));

  p.move(1, 2);
  CHECK(p.members(2) == std::vector<std::size_t>{0, 1, 2});
  CHECK(p.members(0).empty());
  CHECK(p.bandwidth(0) == 0.0);
  CHECK(p.agg_count(0) == 0);
  CHECK(p.edge_of(1) == 2);
  CHECK_NOTHROW(p.check_invariants(3.0));

  p.move(3, 0);
  CHECK(p.agg_count(0) == 1);
  CHECK(p.members(1).empty());
}

TEST_CASE("partition rejects invalid state") {
  CHECK_THROWS_AS(CoalitionPartition(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(CoalitionPartition(2, {0, 2}), std::invalid_argument);
  CoalitionPartition p(2, {0, 0});
  CHECK_THROWS_AS(p.set_agg_count(1, 1), std::invalid_argument);
  CHECK_THROWS_AS(p.set_agg_count(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(p.set_bandwidth(0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(p.move(0, 5), std::invalid_argument);
  p.set_bandwidth(0, 2.0);
  CHECK_THROWS_AS(p.check_invariants(1.0), std::logic_error);
}

TEST_CASE("empty coalitions may not hold bandwidth") {
  CoalitionPartition p(2, {0, 0});
  p.set_bandwidth(1, 1.0);
  CHECK_THROWS_AS(p.check_invariants(5.0), std::logic_error);
}

TEST_CASE("views carry edge, members, count and bandwidth") {
  CoalitionPartition p(2, {1, 1, 0});
  p.set_bandwidth(1, 2e6);
  p.set_agg_count(1, 3);
  const auto v = p.view(1);
  CHECK(v.edge == 1);
  CHECK(v.size() == 2);
  CHECK(v.k == 3);
  CHECK(v.bandwidth == 2e6);
}
