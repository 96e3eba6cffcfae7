#include "cransim/topology.hpp"

#include <cmath>
#include <stdexcept>

#include "cransim/channel.hpp"
#include "cransim/rng.hpp"

namespace cransim {

namespace {

constexpr double kPi = 3.14159265358979323846;

void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

}  // namespace

void NetworkConfig::validate() const {
  if (num_cells != 1 && num_cells != 7)
    fail("num_cells", "must be 1 or 7 (wrapped-around hexagonal cluster)");
  if (inter_site_distance_km <= 0.0) fail("inter_site_distance_km", "must be > 0");
  if (users_per_cell < 0) fail("users_per_cell", "must be >= 0");
  if (macro_antennas < 1) fail("macro_antennas", "must be >= 1");
  if (pico_antennas < 1) fail("pico_antennas", "must be >= 1");
  if (user_antennas < 1) fail("user_antennas", "must be >= 1");
  if (bandwidth_hz <= 0.0) fail("bandwidth_hz", "must be > 0");
  if (shadowing_std_db < 0.0) fail("shadowing_std_db", "must be >= 0");
  if (candidate_limit < 1) fail("candidate_limit", "must be >= 1");
  if (candidate_limit > total_bs())
    fail("candidate_limit", "must not exceed the total number of BSs");
  if (macro_backhaul_mbps < 0.0) fail("macro_backhaul_mbps", "must be >= 0");
  if (pico_backhaul_mbps < 0.0) fail("pico_backhaul_mbps", "must be >= 0");
}

double NetworkConfig::backhaul_bps_hz(Tier t) const {
  const double mbps = t == Tier::macro ? macro_backhaul_mbps : pico_backhaul_mbps;
  return std::isinf(mbps) ? kInf : mbps * 1e6 / bandwidth_hz;
}

bool point_in_hexagon(const Vec2& p, const Vec2& center, double circumradius) {
  // vertices at 30 + 60k degrees: |x| <= sqrt(3)/2 R and |x|/sqrt(3) + |y| <= R
  const double x = std::abs(p.x - center.x);
  const double y = std::abs(p.y - center.y);
  const double r = circumradius;
  return x <= 0.8660254037844386 * r + 1e-12 &&
         x * 0.5773502691896258 + y <= r + 1e-12;
}

NetworkLayout build_layout(const NetworkConfig& config) {
  config.validate();

  NetworkLayout layout;
  layout.config = config;

  const double d = config.inter_site_distance_km;
  const double r_hex = d / std::sqrt(3.0);
  layout.hex_circumradius_km = r_hex;

  layout.cell_centers.push_back({0.0, 0.0});
  if (config.num_cells == 7) {
    for (int i = 0; i < 6; ++i) {
      const double ang = i * kPi / 3.0;
      layout.cell_centers.push_back({d * std::cos(ang), d * std::sin(ang)});
    }
  }

  // wraparound translations: the cluster tiles the plane with shifts of
  // length sqrt(7)*d (7 cells) or d (single cell), rotated in 60-degree steps
  layout.wraparound_offsets[0] = {0.0, 0.0};
  Vec2 shift;
  if (config.num_cells == 7) {
    // 2*a1 + a2 with a1 = d*(1,0), a2 = d*(1/2, sqrt(3)/2)
    shift = {2.5 * d, 0.8660254037844386 * d};
  } else {
    shift = {d, 0.0};
  }
  for (int i = 0; i < 6; ++i) {
    const double ang = i * kPi / 3.0;
    const double c = std::cos(ang), s = std::sin(ang);
    layout.wraparound_offsets[i + 1] = {shift.x * c - shift.y * s,
                                        shift.x * s + shift.y * c};
  }

  const double macro_budget = dbm_to_mw(config.macro_power_dbm) / config.bandwidth_hz;
  const double pico_budget = dbm_to_mw(config.pico_power_dbm) / config.bandwidth_hz;

  int antenna_offset = 0;
  for (int c = 0; c < config.num_cells; ++c) {
    const Vec2 center = layout.cell_centers[c];

    BaseStation macro;
    macro.id = static_cast<int>(layout.base_stations.size());
    macro.cell = c;
    macro.tier = Tier::macro;
    macro.pos_km = center;
    macro.antennas = config.macro_antennas;
    macro.power_budget_mw_hz = macro_budget;
    macro.backhaul_bps_hz = config.backhaul_bps_hz(Tier::macro);
    macro.antenna_offset = antenna_offset;
    antenna_offset += macro.antennas;
    layout.base_stations.push_back(macro);

    // picos at 2/3 circumradius, azimuths 30/150/270 degrees
    for (int p = 0; p < config.picos_per_cell(); ++p) {
      const double ang = (30.0 + 120.0 * p) * kPi / 180.0;
      BaseStation pico;
      pico.id = static_cast<int>(layout.base_stations.size());
      pico.cell = c;
      pico.tier = Tier::pico;
      pico.pos_km = {center.x + (2.0 / 3.0) * r_hex * std::cos(ang),
                     center.y + (2.0 / 3.0) * r_hex * std::sin(ang)};
      pico.antennas = config.pico_antennas;
      pico.power_budget_mw_hz = pico_budget;
      pico.backhaul_bps_hz = config.backhaul_bps_hz(Tier::pico);
      pico.antenna_offset = antenna_offset;
      antenna_offset += pico.antennas;
      layout.base_stations.push_back(pico);
    }
  }
  layout.total_antennas = antenna_offset;

  for (int c = 0; c < config.num_cells; ++c) {
    const Vec2 center = layout.cell_centers[c];
    for (int uc = 0; uc < config.users_per_cell; ++uc) {
      UserTerminal user;
      user.id = static_cast<int>(layout.users.size());
      user.cell = c;
      user.antennas = config.user_antennas;
      Rng rng(config.rng_seed, RngPurpose::layout, std::uint64_t(c), std::uint64_t(uc));
      for (;;) {  // rejection sample inside the hexagon
        Vec2 p{rng.uniform(center.x - r_hex, center.x + r_hex),
               rng.uniform(center.y - r_hex, center.y + r_hex)};
        if (point_in_hexagon(p, center, r_hex)) {
          user.pos_km = p;
          break;
        }
      }
      layout.users.push_back(user);
    }
  }

  return layout;
}

double wrap_distance(const Vec2& a, const Vec2& b, const NetworkLayout& layout) {
  double best = kInf;
  for (const Vec2& t : layout.wraparound_offsets) {
    const double dx = a.x - b.x - t.x;
    const double dy = a.y - b.y - t.y;
    best = std::min(best, dx * dx + dy * dy);
    const double ex = a.x - b.x + t.x;
    const double ey = a.y - b.y + t.y;
    best = std::min(best, ex * ex + ey * ey);
  }
  return std::sqrt(best);
}

double signal_strength_dbm(const BaseStation& bs, const UserTerminal& user,
                           double shadow_db, const NetworkLayout& layout) {
  const double d = wrap_distance(bs.pos_km, user.pos_km, layout);
  return layout.config.tx_power_dbm(bs.tier) + layout.config.antenna_gain_dbi -
         path_loss_db(bs.tier, d) - shadow_db;
}

}  // namespace cransim
