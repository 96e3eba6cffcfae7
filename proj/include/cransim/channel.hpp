#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "cransim/topology.hpp"

namespace cransim {

// 3GPP-style distance laws from the two-tier heterogeneous setup, d in km,
// clamped below at the 10 m floor.
double path_loss_db(Tier tier, double d_km);

constexpr double kMinDistanceKm = 0.01;

// Per (BS, user) large-scale budget: gain_db = antenna gain - path loss -
// shadow, so received_dbm = tx_dbm + gain_db.
struct LargeScaleGains {
  int num_bs = 0;
  int num_users = 0;
  std::vector<double> gain_db;    // [l * num_users + k]
  std::vector<double> shadow_db;  // [l * num_users + k]

  double gain(int l, int k) const { return gain_db[std::size_t(l) * num_users + k]; }
  double shadow(int l, int k) const { return shadow_db[std::size_t(l) * num_users + k]; }
  double& gain(int l, int k) { return gain_db[std::size_t(l) * num_users + k]; }
  double& shadow(int l, int k) { return shadow_db[std::size_t(l) * num_users + k]; }
};

LargeScaleGains sample_large_scale(const NetworkLayout& layout, std::uint64_t seed);

// Per-slot fading realization: H[k] is N x M_t, rows per receive antenna,
// columns blocked by BS in id order.
struct ChannelRealization {
  int slot_index = 0;
  int num_users = 0;
  int rx_antennas = 0;     // N
  int total_antennas = 0;  // M_t
  std::vector<std::complex<double>> h;  // [k][r][c] row-major per user

  const std::complex<double>* user_row(int k, int r) const {
    return h.data() + (std::size_t(k) * rx_antennas + r) * total_antennas;
  }
  std::complex<double>* user_row(int k, int r) {
    return h.data() + (std::size_t(k) * rx_antennas + r) * total_antennas;
  }
  std::complex<double> at(int k, int r, int c) const { return user_row(k, r)[c]; }
};

// i.i.d. CN(0, linear(gain_db)) entries per (k, l) block, streams keyed by
// (seed, slot, k*L + l) so slots regenerate independently.
ChannelRealization sample_channel(const NetworkLayout& layout,
                                  const LargeScaleGains& gains,
                                  std::uint64_t seed, int slot_index);

// Long-term strength table s[l][k] in dBm used by every clustering policy.
struct StrengthTable {
  int num_bs = 0;
  int num_users = 0;
  std::vector<double> s_dbm;  // [l * num_users + k]

  double at(int l, int k) const { return s_dbm[std::size_t(l) * num_users + k]; }
  double& at(int l, int k) { return s_dbm[std::size_t(l) * num_users + k]; }
};

StrengthTable strength_table(const NetworkLayout& layout, const LargeScaleGains& gains);

// BS ids sorted by decreasing strength for user k (ties by ascending id).
std::vector<int> bs_by_strength(const StrengthTable& s, int k);

}  // namespace cransim
