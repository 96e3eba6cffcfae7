#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cransim/clustering.hpp"
#include "cransim/wmmse.hpp"

// Multi-slot campaigns with proportional-fair priority updates, plus the
// calibration run that turns an unconstrained baseline's consumption into
// per-tier backhaul budgets.

namespace cransim::sim {

enum class SchemeKind {
  dynamic,
  static_max_loading,
  static_biased,
  baseline_strongest,
  baseline_disjoint,
};

const char* scheme_name(SchemeKind k);
bool scheme_is_baseline(SchemeKind k);

enum class PfMode { inverse_mean, uniform };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::dynamic;
  clustering::ClusterPolicy policy;  // parameters for static/baseline schemes
};

struct CampaignConfig {
  SchemeSpec scheme;
  int num_slots = 1;
  PfMode pf_mode = PfMode::inverse_mean;
  bool backhaul_override = false;
  double backhaul_macro_mbps = kInf;
  double backhaul_pico_mbps = kInf;
  double link_prune_dbm_hz = -100.0;
  double pool_shrink_bps_hz = 0.01;
  double sched_indicator_dbm_hz = -100.0;
  double pf_ema_slots = 20.0;        // T_c for the running average
  double rate_floor_bps_hz = 1e-3;   // epsilon floor for priorities
  wmmse::EngineOptions engine;
  bool keep_first_slot_trace = true;
};

struct CampaignResult {
  int num_users = 0;
  int num_bs = 0;
  int num_slots = 0;
  double bandwidth_hz = 0.0;
  std::vector<int> bs_tier;                 // 0 macro, 1 pico
  std::vector<double> long_term_rate_mbps;  // per user, final running average
  std::vector<double> per_slot_rates;       // [slot * K + k], bps/Hz
  std::vector<double> per_slot_backhaul;    // [slot * L + l], bps/Hz
  std::vector<double> avg_rate_trace;       // [slot * K + k], running avg Mbps
  std::vector<double> utility_trace;        // per slot, sum_k ln(avg Mbps)
  std::vector<double> mean_cluster_size;    // per slot, over scheduled users
  std::vector<int> repair_drops;            // per slot
  wmmse::DiagnosticsTrace first_slot_trace;
  double total_seconds = 0.0;

  double rate(int slot, int k) const { return per_slot_rates[std::size_t(slot) * num_users + k]; }
  double backhaul(int slot, int l) const { return per_slot_backhaul[std::size_t(slot) * num_bs + l]; }
};

CampaignResult run_campaign(const CampaignConfig& cc, const NetworkConfig& net);

// Exponential running average with window tc (slots).
double update_avg_rate(double avg, double slot_rate, double tc);

// Thresholded-indicator consumption of a converged slot, bps/Hz per BS.
std::vector<double> backhaul_consumption(const wmmse::BeamformingState& state,
                                         double indicator_threshold_dbm_hz);

struct Calibration {
  double macro_mbps = 0.0;
  double pico_mbps = 0.0;
};

// Runs the baseline scheme without backhaul constraints and returns its
// tier-averaged per-slot consumption.
Calibration calibrate_backhaul(const SchemeSpec& baseline, const NetworkConfig& net,
                               int num_slots);

}  // namespace cransim::sim
