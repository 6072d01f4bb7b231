#include "kvsim/tables.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "kvsim/trace_io.hpp"

namespace kvsim {

DistributionTable DistributionTable::from_samples(std::vector<double> samples) {
  DistributionTable t;
  t.count = samples.size();
  if (samples.empty()) return t;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (double v : samples) sum += v;
  t.values = std::move(samples);
  t.mean = sum / static_cast<double>(t.count);
  t.min = t.values.front();
  t.max = t.values.back();
  t.p50 = t.percentile(0.50);
  t.p90 = t.percentile(0.90);
  t.p99 = t.percentile(0.99);
  return t;
}

double DistributionTable::percentile(double q) const {
  if (values.empty()) throw std::logic_error("percentile of empty distribution");
  if (!(q > 0) || q > 1) throw std::invalid_argument("q must be in (0, 1]");
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::min(values.size(), std::max<size_t>(rank, 1)) - 1];
}

void DistributionTable::write_csv(std::ostream& out, size_t max_points) const {
  out << "value,cdf\n";
  if (values.empty()) return;
  size_t stride = 1;
  if (max_points > 0 && values.size() > max_points)
    stride = (values.size() + max_points - 1) / max_points;
  for (size_t i = 0; i < values.size(); i += stride) {
    double cdf = static_cast<double>(i + 1) / static_cast<double>(values.size());
    out << format_double(values[i]) << ',' << format_double(cdf) << '\n';
  }
  if ((values.size() - 1) % stride != 0)
    out << format_double(values.back()) << ",1\n";
}

void HeatmapTable::write_csv(std::ostream& out) const {
  out << corner;
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  for (size_t r = 0; r < row_labels.size(); ++r) {
    out << row_labels[r];
    for (size_t c = 0; c < col_labels.size(); ++c)
      out << ',' << format_double(cells[r][c]);
    out << '\n';
  }
}

}  // namespace kvsim
