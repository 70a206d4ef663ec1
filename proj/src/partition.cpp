#include "hfl/partition.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hfl {

CoalitionPartition::CoalitionPartition(std::size_t edges, std::vector<std::size_t> assignment)
    : assignment_(std::move(assignment)),
      coalitions_(edges),
      bandwidth_(edges, 0.0),
      agg_counts_(edges, 0) {
  if (edges == 0) throw std::invalid_argument("partition needs at least one edge");
  for (std::size_t n = 0; n < assignment_.size(); ++n) {
    if (assignment_[n] >= edges) throw std::invalid_argument("assignment edge out of range");
    coalitions_[assignment_[n]].push_back(n);
  }
  for (std::size_t l = 0; l < edges; ++l)
    if (!coalitions_[l].empty()) agg_counts_[l] = 1;
}

void CoalitionPartition::set_bandwidth(std::size_t edge, double hz) {
  if (!(hz >= 0.0)) throw std::invalid_argument("bandwidth must be >= 0");
  bandwidth_.at(edge) = hz;
}

void CoalitionPartition::set_bandwidth(std::span<const double> hz) {
  if (hz.size() != bandwidth_.size()) throw std::invalid_argument("bandwidth size mismatch");
  for (std::size_t l = 0; l < hz.size(); ++l) set_bandwidth(l, hz[l]);
}

void CoalitionPartition::set_agg_count(std::size_t edge, int k) {
  if (coalitions_.at(edge).empty() ? k != 0 : k < 1)
    throw std::invalid_argument("aggregation count must be >= 1 (0 for empty coalitions)");
  agg_counts_[edge] = k;
}

void CoalitionPartition::move(std::size_t device, std::size_t to) {
  const std::size_t from = assignment_.at(device);
  if (to >= coalitions_.size()) throw std::invalid_argument("target edge out of range");
  if (from == to) return;
  auto& src = coalitions_[from];
  src.erase(std::find(src.begin(), src.end(), device));
  auto& dst = coalitions_[to];
  dst.insert(std::lower_bound(dst.begin(), dst.end(), device), device);
  assignment_[device] = to;
  if (src.empty()) {
    bandwidth_[from] = 0.0;
    agg_counts_[from] = 0;
  }
  if (agg_counts_[to] == 0) agg_counts_[to] = 1;
}

CoalitionView CoalitionPartition::view(std::size_t edge) const {
  return CoalitionView{edge, coalitions_.at(edge), agg_counts_[edge], bandwidth_[edge]};
}

void CoalitionPartition::check_invariants(double total_bandwidth) const {
  auto fail = [](const std::string& what) { throw std::logic_error("partition: " + what); };
  std::vector<int> seen(assignment_.size(), 0);
  for (std::size_t l = 0; l < coalitions_.size(); ++l) {
    const auto& c = coalitions_[l];
    if (!std::is_sorted(c.begin(), c.end())) fail("member list not sorted");
    for (std::size_t n : c) {
      if (n >= assignment_.size()) fail("member out of range");
      if (assignment_[n] != l) fail("assignment and coalition views disagree");
      ++seen[n];
    }
    if (c.empty() && (bandwidth_[l] != 0.0 || agg_counts_[l] != 0))
      fail("empty coalition holds resources");
    if (!c.empty() && agg_counts_[l] < 1) fail("nonempty coalition without aggregation count");
    if (!(bandwidth_[l] >= 0.0)) fail("negative bandwidth");
  }
  for (int s : seen)
    if (s != 1) fail("coalitions are not a partition of the device set");
  double sum = 0.0;
  for (double b : bandwidth_) sum += b;
  if (sum > total_bandwidth * (1.0 + 1e-12)) fail("bandwidth budget exceeded");
}

}  // namespace hfl
