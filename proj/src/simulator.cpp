#include "cransim/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cransim::sim {

const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::dynamic: return "dynamic";
    case SchemeKind::static_max_loading: return "static:max_loading";
    case SchemeKind::static_biased: return "static:biased";
    case SchemeKind::baseline_strongest: return "baseline:strongest_s";
    case SchemeKind::baseline_disjoint: return "baseline:disjoint";
  }
  return "?";
}

bool scheme_is_baseline(SchemeKind k) {
  return k == SchemeKind::baseline_strongest || k == SchemeKind::baseline_disjoint;
}

double update_avg_rate(double avg, double slot_rate, double tc) {
  return (1.0 - 1.0 / tc) * avg + slot_rate / tc;
}

std::vector<double> backhaul_consumption(const wmmse::BeamformingState& state,
                                         double indicator_threshold_dbm_hz) {
  return wmmse::actual_backhaul(state, indicator_threshold_dbm_hz);
}

namespace {

double mean_scheduled_cluster_size(const wmmse::BeamformingState& s,
                                   double indicator_threshold_dbm_hz) {
  const double thr = dbm_to_mw(indicator_threshold_dbm_hz);
  int scheduled = 0;
  double total = 0.0;
  for (int k = 0; k < s.num_users; ++k) {
    if (s.rate[k] <= 0.0) continue;
    int size = 0;
    if (s.mode == wmmse::ClusterMode::dynamic) {
      for (int l : s.links[k]) {
        if (s.block_power(k, l) >= thr) ++size;
      }
    } else {
      size = s.cluster_power(k) > thr ? static_cast<int>(s.links[k].size()) : 0;
    }
    if (size > 0) {
      ++scheduled;
      total += size;
    }
  }
  return scheduled > 0 ? total / scheduled : 0.0;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cc, const NetworkConfig& net) {
  if (cc.num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  net.validate();
  const auto t_start = std::chrono::steady_clock::now();

  NetworkLayout layout = build_layout(net);
  const LargeScaleGains gains = sample_large_scale(layout, net.rng_seed);
  const StrengthTable strengths = strength_table(layout, gains);

  const int K = layout.num_users();
  const int L = layout.num_bs();

  // per-BS backhaul budgets in bps/Hz
  std::vector<double> backhaul(L);
  for (int l = 0; l < L; ++l) {
    if (cc.backhaul_override) {
      const bool macro = layout.base_stations[l].tier == Tier::macro;
      const double mbps = macro ? cc.backhaul_macro_mbps : cc.backhaul_pico_mbps;
      backhaul[l] = std::isfinite(mbps) ? mbps * 1e6 / net.bandwidth_hz : kInf;
    } else {
      backhaul[l] = layout.base_stations[l].backhaul_bps_hz;
    }
  }

  wmmse::EngineOptions eng = cc.engine;
  eng.prune_threshold_dbm_hz = cc.link_prune_dbm_hz;
  eng.shrink_threshold_bps_hz = cc.pool_shrink_bps_hz;
  eng.sched_indicator_dbm_hz = cc.sched_indicator_dbm_hz;
  if (scheme_is_baseline(cc.scheme.kind)) {
    eng.enforce_backhaul = false;  // unconstrained reference scheme
  }

  std::vector<std::vector<int>> candidates;
  wmmse::ClusterAssignment clusters;
  switch (cc.scheme.kind) {
    case SchemeKind::dynamic:
      candidates = wmmse::strongest_candidates(strengths, net.candidate_limit);
      break;
    case SchemeKind::static_max_loading: {
      clustering::ClusterPolicy p = cc.scheme.policy;
      p.kind = clustering::PolicyKind::max_loading;
      clusters = clustering::build_clusters(strengths, layout, p);
      break;
    }
    case SchemeKind::static_biased: {
      clustering::ClusterPolicy p = cc.scheme.policy;
      p.kind = clustering::PolicyKind::biased;
      clusters = clustering::build_clusters(strengths, layout, p);
      break;
    }
    case SchemeKind::baseline_strongest: {
      clustering::ClusterPolicy p = cc.scheme.policy;
      p.kind = clustering::PolicyKind::strongest_s;
      clusters = clustering::build_clusters(strengths, layout, p);
      break;
    }
    case SchemeKind::baseline_disjoint: {
      clustering::ClusterPolicy p = cc.scheme.policy;
      p.kind = clustering::PolicyKind::disjoint_cell;
      clusters = clustering::build_clusters(strengths, layout, p);
      break;
    }
  }

  CampaignResult res;
  res.num_users = K;
  res.num_bs = L;
  res.num_slots = cc.num_slots;
  res.bandwidth_hz = net.bandwidth_hz;
  res.bs_tier.resize(L);
  for (int l = 0; l < L; ++l) {
    res.bs_tier[l] = layout.base_stations[l].tier == Tier::macro ? 0 : 1;
  }
  res.per_slot_rates.assign(std::size_t(cc.num_slots) * K, 0.0);
  res.per_slot_backhaul.assign(std::size_t(cc.num_slots) * L, 0.0);
  res.avg_rate_trace.assign(std::size_t(cc.num_slots) * K, 0.0);
  res.utility_trace.assign(cc.num_slots, 0.0);
  res.mean_cluster_size.assign(cc.num_slots, 0.0);
  res.repair_drops.assign(cc.num_slots, 0);

  const double mbps_per_bpshz = net.bandwidth_hz / 1e6;
  std::vector<double> rbar(K, cc.rate_floor_bps_hz);  // bps/Hz
  std::vector<double> alpha(K, 1.0);
  wmmse::BeamformingState prev_state;
  bool have_prev = false;

  for (int slot = 0; slot < cc.num_slots; ++slot) {
    const ChannelRealization ch = sample_channel(layout, gains, net.rng_seed, slot);

    if (cc.pf_mode == PfMode::inverse_mean) {
      for (int k = 0; k < K; ++k) {
        alpha[k] = 1.0 / std::max(rbar[k], cc.rate_floor_bps_hz);
      }
    } else {
      std::fill(alpha.begin(), alpha.end(), 1.0);
    }

    wmmse::EngineOptions slot_eng = eng;
    slot_eng.warm_start = have_prev ? &prev_state : nullptr;
    wmmse::EngineResult er =
        cc.scheme.kind == SchemeKind::dynamic
            ? wmmse::run_dynamic(layout, ch, alpha, candidates, backhaul, slot_eng)
            : wmmse::run_static(layout, ch, alpha, clusters, backhaul, slot_eng);

    const std::vector<double> b =
        backhaul_consumption(er.state, cc.sched_indicator_dbm_hz);
    for (int l = 0; l < L; ++l) res.per_slot_backhaul[std::size_t(slot) * L + l] = b[l];

    double utility = 0.0;
    for (int k = 0; k < K; ++k) {
      const double rk = er.state.rate[k];
      res.per_slot_rates[std::size_t(slot) * K + k] = rk;
      rbar[k] = update_avg_rate(rbar[k], rk, cc.pf_ema_slots);
      const double mbps = rbar[k] * mbps_per_bpshz;
      res.avg_rate_trace[std::size_t(slot) * K + k] = mbps;
      utility += std::log(std::max(mbps, 1e-300));
    }
    res.utility_trace[slot] = utility;
    res.mean_cluster_size[slot] =
        mean_scheduled_cluster_size(er.state, cc.sched_indicator_dbm_hz);
    res.repair_drops[slot] = er.trace.repair_drops;
    if (slot == 0 && cc.keep_first_slot_trace) {
      res.first_slot_trace = std::move(er.trace);
    }
    prev_state = std::move(er.state);
    have_prev = true;
  }

  res.long_term_rate_mbps.resize(K);
  for (int k = 0; k < K; ++k) res.long_term_rate_mbps[k] = rbar[k] * mbps_per_bpshz;
  res.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

Calibration calibrate_backhaul(const SchemeSpec& baseline, const NetworkConfig& net,
                               int num_slots) {
  if (!scheme_is_baseline(baseline.kind)) {
    throw std::invalid_argument("calibrate_backhaul needs a baseline scheme");
  }
  CampaignConfig cc;
  cc.scheme = baseline;
  cc.num_slots = num_slots;
  const CampaignResult res = run_campaign(cc, net);

  double macro_sum = 0.0, pico_sum = 0.0;
  long macro_n = 0, pico_n = 0;
  for (int slot = 0; slot < res.num_slots; ++slot) {
    for (int l = 0; l < res.num_bs; ++l) {
      const double v = res.backhaul(slot, l);
      if (res.bs_tier[l] == 0) {
        macro_sum += v;
        ++macro_n;
      } else {
        pico_sum += v;
        ++pico_n;
      }
    }
  }
  const double to_mbps = net.bandwidth_hz / 1e6;
  Calibration cal;
  cal.macro_mbps = macro_n > 0 ? macro_sum / macro_n * to_mbps : 0.0;
  cal.pico_mbps = pico_n > 0 ? pico_sum / pico_n * to_mbps : 0.0;
  return cal;
}

}  // namespace cransim::sim
