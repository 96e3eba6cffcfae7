#include "cransim/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cransim::report {

double rate_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("rate_percentile: empty sample");
  if (!(p > 0.0 && p < 100.0)) {
    throw std::invalid_argument("rate_percentile: p must be in (0, 100)");
  }
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * double(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - double(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

int Histogram::modal_bin() const {
  int best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = static_cast<int>(i);
  }
  return best;
}

double Histogram::mass_in(double lo_v, double hi_v) const {
  if (total == 0) return 0.0;
  // counted on bin centers to avoid double-counting edges
  const double eps = 1e-9 * (std::abs(hi_v - lo_v) + std::abs(hi_v) + 1.0);
  long n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double c = bin_center(static_cast<int>(i));
    if (c >= lo_v - eps && c <= hi_v + eps) n += counts[i];
  }
  return double(n) / double(total);
}

Histogram histogram(const std::vector<double>& samples, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("histogram: need hi > lo");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  h.density.assign(bins, 0.0);
  const double width = (hi - lo) / bins;
  for (double v : samples) {
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
    ++h.total;
  }
  if (h.total > 0) {
    for (int i = 0; i < bins; ++i) {
      h.density[i] = double(h.counts[i]) / (double(h.total) * width);
    }
  }
  return h;
}

std::vector<double> backhaul_samples_mbps(const sim::CampaignResult& r, int tier) {
  std::vector<double> out;
  const double to_mbps = r.bandwidth_hz / 1e6;
  for (int slot = 0; slot < r.num_slots; ++slot) {
    for (int l = 0; l < r.num_bs; ++l) {
      if (r.bs_tier[l] == tier) out.push_back(r.backhaul(slot, l) * to_mbps);
    }
  }
  return out;
}

Histogram backhaul_histogram(const sim::CampaignResult& r, int tier, int bins) {
  const std::vector<double> samples = backhaul_samples_mbps(r, tier);
  double hi = 0.0;
  for (double v : samples) hi = std::max(hi, v);
  hi = hi > 0.0 ? hi * 1.02 : 1.0;
  return histogram(samples, bins, 0.0, hi);
}

std::vector<double> log_utility(const sim::CampaignResult& r) {
  std::vector<double> u(r.num_slots, 0.0);
  for (int slot = 0; slot < r.num_slots; ++slot) {
    double s = 0.0;
    for (int k = 0; k < r.num_users; ++k) {
      s += std::log(std::max(r.avg_rate_trace[std::size_t(slot) * r.num_users + k],
                             1e-300));
    }
    u[slot] = s;
  }
  return u;
}

ComparisonReport make_report(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& rates,
                             int baseline_index) {
  if (names.size() != rates.size() || rates.empty()) {
    throw std::invalid_argument("make_report: names/rates mismatch");
  }
  if (baseline_index < 0 || baseline_index >= static_cast<int>(rates.size())) {
    throw std::invalid_argument("make_report: bad baseline index");
  }
  const std::size_t n = rates.front().size();
  for (const auto& v : rates) {
    if (v.size() != n) {
      throw std::invalid_argument("make_report: user counts differ between runs");
    }
  }

  ComparisonReport rep;
  rep.baseline = names[baseline_index];
  const double b10 = rate_percentile(rates[baseline_index], 10.0);
  const double b50 = rate_percentile(rates[baseline_index], 50.0);
  const double b90 = rate_percentile(rates[baseline_index], 90.0);
  auto gain = [](double v, double b) {
    return b > 0.0 ? (v - b) / b * 100.0 : 0.0;
  };
  for (std::size_t i = 0; i < rates.size(); ++i) {
    ComparisonReport::Entry e;
    e.name = names[i];
    e.p10 = rate_percentile(rates[i], 10.0);
    e.p50 = rate_percentile(rates[i], 50.0);
    e.p90 = rate_percentile(rates[i], 90.0);
    e.gain10 = gain(e.p10, b10);
    e.gain50 = gain(e.p50, b50);
    e.gain90 = gain(e.p90, b90);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

std::vector<std::pair<double, double>> cdf_points(std::vector<double> rates) {
  std::sort(rates.begin(), rates.end());
  std::vector<std::pair<double, double>> pts;
  pts.reserve(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    pts.emplace_back(rates[i], double(i + 1) / double(rates.size()));
  }
  return pts;
}

}  // namespace cransim::report
