#include "cransim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cransim/rng.hpp"

namespace cransim {

double path_loss_db(Tier tier, double d_km) {
  const double d = std::max(d_km, kMinDistanceKm);
  if (tier == Tier::macro) return 128.1 + 37.6 * std::log10(d);
  return 140.7 + 36.7 * std::log10(d);
}

LargeScaleGains sample_large_scale(const NetworkLayout& layout, std::uint64_t seed) {
  LargeScaleGains g;
  g.num_bs = layout.num_bs();
  g.num_users = layout.num_users();
  g.gain_db.resize(std::size_t(g.num_bs) * g.num_users);
  g.shadow_db.resize(std::size_t(g.num_bs) * g.num_users);

  const double std_db = layout.config.shadowing_std_db;
  for (int l = 0; l < g.num_bs; ++l) {
    const BaseStation& bs = layout.base_stations[l];
    for (int k = 0; k < g.num_users; ++k) {
      Rng rng(seed, RngPurpose::shadowing, std::uint64_t(l), std::uint64_t(k));
      const double shadow = std_db > 0.0 ? std_db * rng.normal() : 0.0;
      const UserTerminal& user = layout.users[k];
      const double d = wrap_distance(bs.pos_km, user.pos_km, layout);
      g.shadow(l, k) = shadow;
      g.gain(l, k) = layout.config.antenna_gain_dbi -
                     path_loss_db(bs.tier, d) - shadow;
    }
  }
  return g;
}

ChannelRealization sample_channel(const NetworkLayout& layout,
                                  const LargeScaleGains& gains,
                                  std::uint64_t seed, int slot_index) {
  ChannelRealization ch;
  ch.slot_index = slot_index;
  ch.num_users = layout.num_users();
  ch.rx_antennas = layout.config.user_antennas;
  ch.total_antennas = layout.total_antennas;
  ch.h.assign(std::size_t(ch.num_users) * ch.rx_antennas * ch.total_antennas,
              std::complex<double>{});

  const int num_bs = layout.num_bs();
  for (int k = 0; k < ch.num_users; ++k) {
    for (int l = 0; l < num_bs; ++l) {
      const double gdb = gains.gain(l, k);
      if (is_neg_inf_db(gdb)) continue;  // excluded pair: zero block
      const double amp = std::sqrt(db_to_linear(gdb) / 2.0);
      const BaseStation& bs = layout.base_stations[l];
      Rng rng(seed, RngPurpose::fading,
              (std::uint64_t(std::uint32_t(slot_index)) << 32) |
                  std::uint64_t(std::uint32_t(k)),
              std::uint64_t(l));
      for (int r = 0; r < ch.rx_antennas; ++r) {
        std::complex<double>* row = ch.user_row(k, r);
        for (int c = 0; c < bs.antennas; ++c) {
          row[bs.antenna_offset + c] =
              std::complex<double>(amp * rng.normal(), amp * rng.normal());
        }
      }
    }
  }
  return ch;
}

StrengthTable strength_table(const NetworkLayout& layout, const LargeScaleGains& gains) {
  StrengthTable s;
  s.num_bs = layout.num_bs();
  s.num_users = layout.num_users();
  s.s_dbm.resize(std::size_t(s.num_bs) * s.num_users);
  for (int l = 0; l < s.num_bs; ++l) {
    const double tx = layout.config.tx_power_dbm(layout.base_stations[l].tier);
    for (int k = 0; k < s.num_users; ++k) {
      s.at(l, k) = tx + gains.gain(l, k);
    }
  }
  return s;
}

std::vector<int> bs_by_strength(const StrengthTable& s, int k) {
  std::vector<int> order(s.num_bs);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = s.at(a, k), sb = s.at(b, k);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

}  // namespace cransim
