#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hfl/utility.hpp"

namespace hfl {

/// Assignment of every device to exactly one edge coalition, with the
/// per-edge bandwidth (Hz) and edge aggregation count. The assignment vector
/// and the per-edge member lists are kept consistent; member lists are
/// sorted by device id. Empty coalitions carry bandwidth 0 and count 0.
class CoalitionPartition {
 public:
  CoalitionPartition() = default;
  CoalitionPartition(std::size_t edges, std::vector<std::size_t> assignment);

  std::size_t num_devices() const { return assignment_.size(); }
  std::size_t num_edges() const { return coalitions_.size(); }

  std::size_t edge_of(std::size_t device) const { return assignment_[device]; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }
  const std::vector<std::size_t>& members(std::size_t edge) const { return coalitions_[edge]; }
  std::size_t size(std::size_t edge) const { return coalitions_[edge].size(); }

  double bandwidth(std::size_t edge) const { return bandwidth_[edge]; }
  const std::vector<double>& bandwidth() const { return bandwidth_; }
  void set_bandwidth(std::size_t edge, double hz);
  void set_bandwidth(std::span<const double> hz);

  int agg_count(std::size_t edge) const { return agg_counts_[edge]; }
  const std::vector<int>& agg_counts() const { return agg_counts_; }
  void set_agg_count(std::size_t edge, int k);

  /// Moves a device between coalitions. Bandwidth and counts are left for
  /// the caller to reallocate; an emptied coalition gets bandwidth 0, count 0.
  void move(std::size_t device, std::size_t to);

  CoalitionView view(std::size_t edge) const;

  /// Throws std::logic_error if the partition, bandwidth simplex or counts
  /// are inconsistent.
  void check_invariants(double total_bandwidth) const;

  friend bool operator==(const CoalitionPartition&, const CoalitionPartition&) = default;

 private:
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> coalitions_;
  std::vector<double> bandwidth_;
  std::vector<int> agg_counts_;
};

}  // namespace hfl
