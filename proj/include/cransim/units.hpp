#pragma once

#include <cmath>
#include <limits>

// Unit conventions used throughout:
//   - transmit/noise powers are per-Hz PSD in mW/Hz (power budgets are the
//     Table-style totals divided by the channel bandwidth),
//   - rates are bps/Hz; Mbps = bps/Hz * bandwidth / 1e6,
//   - channel entries are dimensionless amplitude gains.

namespace cransim {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

constexpr double kInf = std::numeric_limits<double>::infinity();

// sentinel meaning "no coupling at all" for excluded (BS, user) pairs
constexpr double kNegInfDb = -1.0e9;
inline bool is_neg_inf_db(double db) { return db <= kNegInfDb * 0.5; }

}  // namespace cransim
