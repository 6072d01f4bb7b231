#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kvsim {

// Empirical distribution with nearest-rank percentiles.
struct DistributionTable {
  std::vector<double> values;  // sorted ascending
  size_t count = 0;
  double mean = 0, p50 = 0, p90 = 0, p99 = 0, min = 0, max = 0;

  static DistributionTable from_samples(std::vector<double> samples);
  double percentile(double q) const;  // q in (0, 1]

  // value,cdf rows. max_points > 0 thins evenly to bound file size.
  void write_csv(std::ostream& out, size_t max_points = 0) const;
};

struct HeatmapTable {
  std::string corner;  // header for the row-label column
  std::vector<std::string> row_labels, col_labels;
  std::vector<std::vector<double>> cells;  // [row][col]

  void write_csv(std::ostream& out) const;
};

}  // namespace kvsim
