#include "cransim/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cransim::io {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "Inf" || v == "INF") return kInf;
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config field '" + key + "': not a number: " + v);
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config field '" + key + "': not an integer: " + v);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(12);
  return os;
}

}  // namespace

NetworkConfig parse_network_config(std::istream& is) {
  NetworkConfig cfg;
  std::map<std::string, std::function<void(const std::string&, const std::string&)>>
      setters = {
          {"num_cells", [&](const std::string& k, const std::string& v) { cfg.num_cells = int(parse_int(k, v)); }},
          {"inter_site_distance_km", [&](const std::string& k, const std::string& v) { cfg.inter_site_distance_km = parse_double(k, v); }},
          {"users_per_cell", [&](const std::string& k, const std::string& v) { cfg.users_per_cell = int(parse_int(k, v)); }},
          {"macro_antennas", [&](const std::string& k, const std::string& v) { cfg.macro_antennas = int(parse_int(k, v)); }},
          {"pico_antennas", [&](const std::string& k, const std::string& v) { cfg.pico_antennas = int(parse_int(k, v)); }},
          {"user_antennas", [&](const std::string& k, const std::string& v) { cfg.user_antennas = int(parse_int(k, v)); }},
          {"macro_power_dbm", [&](const std::string& k, const std::string& v) { cfg.macro_power_dbm = parse_double(k, v); }},
          {"pico_power_dbm", [&](const std::string& k, const std::string& v) { cfg.pico_power_dbm = parse_double(k, v); }},
          {"antenna_gain_dbi", [&](const std::string& k, const std::string& v) { cfg.antenna_gain_dbi = parse_double(k, v); }},
          {"noise_psd_dbm_hz", [&](const std::string& k, const std::string& v) { cfg.noise_psd_dbm_hz = parse_double(k, v); }},
          {"bandwidth_hz", [&](const std::string& k, const std::string& v) { cfg.bandwidth_hz = parse_double(k, v); }},
          {"macro_backhaul_mbps", [&](const std::string& k, const std::string& v) { cfg.macro_backhaul_mbps = parse_double(k, v); }},
          {"pico_backhaul_mbps", [&](const std::string& k, const std::string& v) { cfg.pico_backhaul_mbps = parse_double(k, v); }},
          {"shadowing_std_db", [&](const std::string& k, const std::string& v) { cfg.shadowing_std_db = parse_double(k, v); }},
          {"candidate_limit", [&](const std::string& k, const std::string& v) { cfg.candidate_limit = int(parse_int(k, v)); }},
          {"rng_seed", [&](const std::string& k, const std::string& v) { cfg.rng_seed = std::uint64_t(parse_int(k, v)); }},
      };

  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw std::invalid_argument("config field '" + key + "': unknown key");
    }
    it->second(key, val);
  }
  cfg.validate();
  return cfg;
}

NetworkConfig load_network_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config file " + path);
  return parse_network_config(is);
}

void write_layout_csv(const NetworkLayout& layout, const std::string& bs_path,
                      const std::string& user_path) {
  auto bs = open_out(bs_path);
  bs << "bs_id,tier,x_km,y_km\n";
  for (const auto& b : layout.base_stations) {
    bs << b.id << "," << tier_name(b.tier) << "," << b.pos_km.x << "," << b.pos_km.y
       << "\n";
  }
  auto us = open_out(user_path);
  us << "user_id,x_km,y_km\n";
  for (const auto& u : layout.users) {
    us << u.id << "," << u.pos_km.x << "," << u.pos_km.y << "\n";
  }
}

void write_rates_csv(const sim::CampaignResult& r, const std::string& path) {
  auto os = open_out(path);
  os << "user_id,long_term_mbps\n";
  for (int k = 0; k < r.num_users; ++k) {
    os << k << "," << r.long_term_rate_mbps[k] << "\n";
  }
}

void write_backhaul_csv(const sim::CampaignResult& r, const std::string& path) {
  auto os = open_out(path);
  os << "slot,bs_id,bps_hz\n";
  for (int slot = 0; slot < r.num_slots; ++slot) {
    for (int l = 0; l < r.num_bs; ++l) {
      os << slot << "," << l << "," << r.backhaul(slot, l) << "\n";
    }
  }
}

void write_utility_csv(const sim::CampaignResult& r, const std::string& path) {
  auto os = open_out(path);
  os << "slot,value\n";
  for (int slot = 0; slot < r.num_slots; ++slot) {
    os << slot << "," << r.utility_trace[slot] << "\n";
  }
}

void write_clusters_csv(const wmmse::ClusterAssignment& ca, const std::string& path) {
  auto os = open_out(path);
  os << "user_id,bs_id\n";
  for (std::size_t k = 0; k < ca.serving.size(); ++k) {
    for (int l : ca.serving[k]) os << k << "," << l << "\n";
  }
}

std::pair<std::vector<int>, std::vector<double>> read_rates_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  std::vector<int> ids;
  std::vector<double> rates;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ": bad row " + line);
    ids.push_back(std::stoi(line.substr(0, comma)));
    rates.push_back(std::stod(line.substr(comma + 1)));
  }
  return {std::move(ids), std::move(rates)};
}

void write_report_csv(const report::ComparisonReport& rep, const std::string& path) {
  auto os = open_out(path);
  os << "scheme,p10_mbps,p50_mbps,p90_mbps,gain10_pct,gain50_pct,gain90_pct\n";
  for (const auto& e : rep.entries) {
    os << e.name << "," << e.p10 << "," << e.p50 << "," << e.p90 << "," << e.gain10
       << "," << e.gain50 << "," << e.gain90 << "\n";
  }
}

void write_report_json(const report::ComparisonReport& rep, const std::string& path) {
  nlohmann::json j;
  j["baseline"] = rep.baseline;
  for (const auto& e : rep.entries) {
    j["schemes"].push_back({{"name", e.name},
                            {"p10_mbps", e.p10},
                            {"p50_mbps", e.p50},
                            {"p90_mbps", e.p90},
                            {"gain10_pct", e.gain10},
                            {"gain50_pct", e.gain50},
                            {"gain90_pct", e.gain90}});
  }
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

void write_cdf_csv(const std::vector<std::pair<double, double>>& pts,
                   const std::string& path) {
  auto os = open_out(path);
  os << "rate_mbps,cumulative_fraction\n";
  for (const auto& [r, f] : pts) os << r << "," << f << "\n";
}

void write_channel_csv(const ChannelRealization& ch, const std::string& path) {
  auto os = open_out(path);
  os.precision(17);
  os << "user,rx,col,re,im\n";
  for (int k = 0; k < ch.num_users; ++k) {
    for (int r = 0; r < ch.rx_antennas; ++r) {
      for (int c = 0; c < ch.total_antennas; ++c) {
        const auto v = ch.at(k, r, c);
        os << k << "," << r << "," << c << "," << v.real() << "," << v.imag() << "\n";
      }
    }
  }
}

void write_manifest(const ManifestInfo& info, const std::string& path) {
  nlohmann::json j;
  j["tool"] = "cransim";
  j["version"] = "0.1.0";
  j["command"] = info.command;
  j["scheme"] = info.scheme;
  j["seed"] = info.seed;
  j["num_slots"] = info.num_slots;
  j["wall_seconds"] = info.wall_seconds;
  j["outputs"] = info.outputs;
  auto enc = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
  };
  j["backhaul_macro_mbps"] = enc(info.backhaul_macro_mbps);
  j["backhaul_pico_mbps"] = enc(info.backhaul_pico_mbps);
  const NetworkConfig& n = info.net;
  j["network"] = {{"num_cells", n.num_cells},
                  {"inter_site_distance_km", n.inter_site_distance_km},
                  {"users_per_cell", n.users_per_cell},
                  {"macro_antennas", n.macro_antennas},
                  {"pico_antennas", n.pico_antennas},
                  {"user_antennas", n.user_antennas},
                  {"macro_power_dbm", n.macro_power_dbm},
                  {"pico_power_dbm", n.pico_power_dbm},
                  {"antenna_gain_dbi", n.antenna_gain_dbi},
                  {"noise_psd_dbm_hz", n.noise_psd_dbm_hz},
                  {"bandwidth_hz", n.bandwidth_hz},
                  {"macro_backhaul_mbps", enc(n.macro_backhaul_mbps)},
                  {"pico_backhaul_mbps", enc(n.pico_backhaul_mbps)},
                  {"shadowing_std_db", n.shadowing_std_db},
                  {"candidate_limit", n.candidate_limit},
                  {"rng_seed", n.rng_seed}};
  if (!info.extra_json.empty()) {
    j["scheme_params"] = nlohmann::json::parse(info.extra_json);
  }
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

}  // namespace cransim::io
