#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cransim/reporting.hpp"
#include "cransim/simulator.hpp"

// Config-file parsing and the CSV/JSON result formats (see README for the
// schemas).

namespace cransim::io {

// key = value lines, '#' comments; unknown keys and malformed values are
// rejected with the offending field named.
NetworkConfig parse_network_config(std::istream& is);
NetworkConfig load_network_config(const std::string& path);

void write_layout_csv(const NetworkLayout& layout, const std::string& bs_path,
                      const std::string& user_path);

void write_rates_csv(const sim::CampaignResult& r, const std::string& path);
void write_backhaul_csv(const sim::CampaignResult& r, const std::string& path);
void write_utility_csv(const sim::CampaignResult& r, const std::string& path);
void write_clusters_csv(const wmmse::ClusterAssignment& ca, const std::string& path);

// rates.csv -> (user ids, long-term Mbps)
std::pair<std::vector<int>, std::vector<double>> read_rates_csv(const std::string& path);

void write_report_csv(const report::ComparisonReport& rep, const std::string& path);
void write_report_json(const report::ComparisonReport& rep, const std::string& path);
void write_cdf_csv(const std::vector<std::pair<double, double>>& pts,
                   const std::string& path);

// channel entries of one slot as CSV (user, rx, column, re, im)
void write_channel_csv(const ChannelRealization& ch, const std::string& path);

struct ManifestInfo {
  std::string command;
  std::string scheme;
  std::uint64_t seed = 0;
  int num_slots = 0;
  NetworkConfig net;
  double backhaul_macro_mbps = kInf;
  double backhaul_pico_mbps = kInf;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  std::string extra_json;  // optional scheme parameters, already-encoded object
};

void write_manifest(const ManifestInfo& info, const std::string& path);

}  // namespace cransim::io
