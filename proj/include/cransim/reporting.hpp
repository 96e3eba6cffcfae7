#pragma once

#include <string>
#include <vector>

#include "cransim/simulator.hpp"

namespace cransim::report {

// Empirical percentile with linear interpolation, p in (0, 100).
double rate_percentile(std::vector<double> values, double p);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> density;  // normalized so the area integrates to 1
  std::vector<long> counts;
  long total = 0;

  double bin_width() const { return (hi - lo) / double(density.size()); }
  double bin_center(int i) const { return lo + (i + 0.5) * bin_width(); }
  int modal_bin() const;
  // fraction of samples with lo_v <= x <= hi_v
  double mass_in(double lo_v, double hi_v) const;
};

Histogram histogram(const std::vector<double>& samples, int bins, double lo, double hi);

// Per-slot per-BS consumption pooled by tier (0 macro, 1 pico), in Mbps.
std::vector<double> backhaul_samples_mbps(const sim::CampaignResult& r, int tier);
Histogram backhaul_histogram(const sim::CampaignResult& r, int tier, int bins);

// sum_k ln(avg rate) per slot, recomputed from the stored averages.
std::vector<double> log_utility(const sim::CampaignResult& r);

struct ComparisonReport {
  struct Entry {
    std::string name;
    double p10 = 0.0, p50 = 0.0, p90 = 0.0;       // Mbps
    double gain10 = 0.0, gain50 = 0.0, gain90 = 0.0;  // percent vs baseline
  };
  std::string baseline;
  std::vector<Entry> entries;
};

// rates[i] are per-user long-term Mbps; all schemes must cover the same users.
ComparisonReport make_report(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& rates,
                             int baseline_index);

// (rate_mbps, cumulative_fraction) pairs of the empirical CDF
std::vector<std::pair<double, double>> cdf_points(std::vector<double> rates);

}  // namespace cransim::report
