#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cransim/units.hpp"

namespace cransim {

enum class Tier { macro, pico };

inline const char* tier_name(Tier t) { return t == Tier::macro ? "macro" : "pico"; }

struct NetworkConfig {
  int num_cells = 7;
  double inter_site_distance_km = 0.8;
  int users_per_cell = 30;
  int macro_antennas = 4;
  int pico_antennas = 2;
  int user_antennas = 2;
  double macro_power_dbm = 43.0;
  double pico_power_dbm = 30.0;
  double antenna_gain_dbi = 15.0;
  double noise_psd_dbm_hz = -169.0;
  double bandwidth_hz = 1e7;
  double macro_backhaul_mbps = kInf;
  double pico_backhaul_mbps = kInf;
  double shadowing_std_db = 8.0;
  int candidate_limit = 8;
  std::uint64_t rng_seed = 0;

  // throws std::invalid_argument naming the offending field
  void validate() const;

  int picos_per_cell() const { return 3; }
  int bs_per_cell() const { return 1 + picos_per_cell(); }
  int total_bs() const { return num_cells * bs_per_cell(); }
  int total_users() const { return num_cells * users_per_cell; }
  double noise_mw_per_hz() const { return dbm_to_mw(noise_psd_dbm_hz); }
  // Mbps -> bps/Hz under the configured bandwidth
  double backhaul_bps_hz(Tier t) const;
  double tx_power_dbm(Tier t) const {
    return t == Tier::macro ? macro_power_dbm : pico_power_dbm;
  }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct BaseStation {
  int id = 0;
  int cell = 0;
  Tier tier = Tier::macro;
  Vec2 pos_km;
  int antennas = 0;
  double power_budget_mw_hz = 0.0;  // per-Hz share of the dBm budget
  double backhaul_bps_hz = kInf;
  int antenna_offset = 0;  // first column of this BS's block in H
};

struct UserTerminal {
  int id = 0;
  int cell = 0;
  Vec2 pos_km;
  int antennas = 0;
};

struct NetworkLayout {
  NetworkConfig config;
  std::vector<BaseStation> base_stations;
  std::vector<UserTerminal> users;
  std::vector<Vec2> cell_centers;
  std::array<Vec2, 7> wraparound_offsets{};  // identity + 6 mirror shifts
  double hex_circumradius_km = 0.0;
  int total_antennas = 0;

  int num_bs() const { return static_cast<int>(base_stations.size()); }
  int num_users() const { return static_cast<int>(users.size()); }
};

// Places 1 macro + 3 picos per cell and drops users uniformly per hexagon.
// Supports the 7-cell wrapped-around cluster and the single-cell degenerate
// layout (num_cells 1 or 7).
NetworkLayout build_layout(const NetworkConfig& config);

// Shortest displacement distance across the 7 wraparound images.
double wrap_distance(const Vec2& a, const Vec2& b, const NetworkLayout& layout);

// Long-term received strength: tx power + antenna gain - path loss - shadow.
double signal_strength_dbm(const BaseStation& bs, const UserTerminal& user,
                           double shadow_db, const NetworkLayout& layout);

bool point_in_hexagon(const Vec2& p, const Vec2& center, double circumradius);

}  // namespace cransim
