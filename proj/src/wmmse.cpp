#include "cransim/wmmse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cransim/units.hpp"

namespace cransim::wmmse {

namespace {

// out[r] = sum over the support blocks of H_k[r, :] w
void apply_channel(const ChannelRealization& ch, const qcqp::BlockMap& blocks,
                   int k, const cd* w, const std::vector<int>& support, cd* out) {
  const int n = ch.rx_antennas;
  for (int r = 0; r < n; ++r) {
    const cd* row = ch.user_row(k, r);
    cd acc{};
    for (int l : support) {
      const int off = blocks.offset[l];
      const int wd = blocks.width[l];
      for (int t = 0; t < wd; ++t) acc += row[off + t] * w[off + t];
    }
    out[r] = acc;
  }
}

// received covariance at user k: sigma^2 I + sum_j (H_k w_j)(H_k w_j)^H
CMatrix received_covariance(const BeamformingState& s, const EngineContext& ctx,
                            int k, int exclude_user) {
  const int n = s.rx_antennas;
  CMatrix c(n, n);
  for (int r = 0; r < n; ++r) c(r, r) = ctx.sigma2;
  CVector v(n);
  for (int j = 0; j < s.num_users; ++j) {
    if (!s.active[j] || j == exclude_user) continue;
    apply_channel(*ctx.channel, s.blocks, k, s.w_of(j), s.links[j], v.data());
    for (int r = 0; r < n; ++r) {
      for (int ccol = 0; ccol < n; ++ccol) {
        c(r, ccol) += v[r] * std::conj(v[ccol]);
      }
    }
  }
  return c;
}

}  // namespace

double BeamformingState::block_power(int k, int l) const {
  return kern::sqnorm(blocks.width[l], w_of(k) + blocks.offset[l]);
}

double BeamformingState::cluster_power(int k) const {
  double p = 0.0;
  for (int l : links[k]) p += block_power(k, l);
  return p;
}

ClusterAssignment ClusterAssignment::from_serving(
    std::vector<std::vector<int>> serving, int num_bs) {
  ClusterAssignment ca;
  ca.serving = std::move(serving);
  ca.served.assign(num_bs, {});
  for (std::size_t k = 0; k < ca.serving.size(); ++k) {
    auto& sv = ca.serving[k];
    std::sort(sv.begin(), sv.end());
    sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
    for (int l : sv) ca.served[l].push_back(static_cast<int>(k));
  }
  return ca;
}

bool ClusterAssignment::consistent() const {
  for (std::size_t k = 0; k < serving.size(); ++k) {
    for (int l : serving[k]) {
      if (l < 0 || l >= static_cast<int>(served.size())) return false;
      if (!std::binary_search(served[l].begin(), served[l].end(),
                              static_cast<int>(k)))
        return false;
    }
  }
  std::size_t pairs = 0;
  for (const auto& sv : serving) pairs += sv.size();
  std::size_t pairs2 = 0;
  for (const auto& sd : served) pairs2 += sd.size();
  return pairs == pairs2;
}

double user_rate(int k, const BeamformingState& s, const EngineContext& ctx) {
  if (!s.active[k] || s.links[k].empty()) return 0.0;
  const int n = s.rx_antennas;
  CVector v(n);
  apply_channel(*ctx.channel, s.blocks, k, s.w_of(k), s.links[k], v.data());
  if (kern::sqnorm(n, v.data()) == 0.0) return 0.0;
  CMatrix c = received_covariance(s, ctx, k, k);
  CVector x(n);
  hermitian_solve(c, v, x);
  const double sinr = std::max(0.0, kern::cdotc(n, v.data(), x.data()).real());
  return std::log2(1.0 + sinr);
}

void mmse_receiver(int k, const BeamformingState& s, const EngineContext& ctx,
                   std::span<cd> u_out) {
  const int n = s.rx_antennas;
  CVector v(n);
  apply_channel(*ctx.channel, s.blocks, k, s.w_of(k), s.links[k], v.data());
  if (kern::sqnorm(n, v.data()) == 0.0) {
    for (int r = 0; r < n; ++r) u_out[r] = cd{};
    return;
  }
  CMatrix c = received_covariance(s, ctx, k, -1);
  hermitian_solve(c, v, u_out);
}

double user_mse(int k, const BeamformingState& s, const EngineContext& ctx) {
  const int n = s.rx_antennas;
  CMatrix c = received_covariance(s, ctx, k, -1);
  CVector v(n);
  apply_channel(*ctx.channel, s.blocks, k, s.w_of(k), s.links[k], v.data());
  const cd* uk = s.u_of(k);
  double e = quad_form(c, std::span<const cd>(uk, n));
  e -= 2.0 * kern::cdotc(n, uk, v.data()).real();
  return e + 1.0;
}

double mse_weight(double mse) {
  if (!(mse > 0.0)) {
    throw std::domain_error("mse_weight: MSE must be positive, got " +
                            std::to_string(mse));
  }
  return 1.0 / mse;
}

void update_beta_dynamic(BeamformingState& s) {
  for (int l = 0; l < s.num_bs; ++l) {
    for (int k = 0; k < s.num_users; ++k) {
      s.beta_of(l, k) = 1.0 / (s.block_power(k, l) + s.tau);
    }
  }
}

void update_beta_static(BeamformingState& s) {
  for (int k = 0; k < s.num_users; ++k) {
    s.beta_stat[k] = 1.0 / (s.cluster_power(k) + s.tau);
  }
}

void prune_links(BeamformingState& s, double threshold_dbm_hz) {
  const double thr = dbm_to_mw(threshold_dbm_hz);
  for (int k = 0; k < s.num_users; ++k) {
    auto& lk = s.links[k];
    std::vector<int> kept;
    kept.reserve(lk.size());
    for (int l : lk) {
      if (s.block_power(k, l) >= thr) {
        kept.push_back(l);
      } else {
        cd* blk = s.w_of(k) + s.blocks.offset[l];
        std::fill(blk, blk + s.blocks.width[l], cd{});
      }
    }
    lk = std::move(kept);
    if (lk.empty() && s.active[k]) {
      s.active[k] = 0;
      s.rate[k] = 0.0;
    }
  }
}

// Companion removal rule for backhaul-constrained runs: a link carrying a
// negligible share of its user's power still bills that BS the user's whole
// rate, so it can never pay for itself. Removing it mid-run lets later
// subproblems respend the freed budget.
void prune_links_relative(BeamformingState& s, double rel) {
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    const double dust = rel * s.cluster_power(k);
    if (dust <= 0.0) continue;
    auto& lk = s.links[k];
    std::vector<int> kept;
    kept.reserve(lk.size());
    for (int l : lk) {
      if (s.block_power(k, l) >= dust) {
        kept.push_back(l);
      } else {
        cd* blk = s.w_of(k) + s.blocks.offset[l];
        std::fill(blk, blk + s.blocks.width[l], cd{});
      }
    }
    lk = std::move(kept);
  }
}

void shrink_user_pool(BeamformingState& s, double rate_threshold_bps_hz) {
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    if (s.rate[k] < rate_threshold_bps_hz) {
      s.active[k] = 0;
      s.rate[k] = 0.0;
      cd* wk = s.w_of(k);
      std::fill(wk, wk + s.blocks.total, cd{});
    }
  }
}

double wsr_objective(const BeamformingState& s) {
  double o = 0.0;
  for (int k = 0; k < s.num_users; ++k) o += s.alpha[k] * s.rate[k];
  return o;
}

double wmmse_objective(const BeamformingState& s, const EngineContext& ctx) {
  double o = 0.0;
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    const double e = user_mse(k, s, ctx);
    o += s.alpha[k] * (s.rho[k] * e - std::log(s.rho[k]));
  }
  return o;
}

double mean_candidate_size(const BeamformingState& s) {
  if (s.num_users == 0) return 0.0;
  double t = 0.0;
  for (const auto& lk : s.links) t += double(lk.size());
  return t / double(s.num_users);
}

std::vector<std::vector<int>> strongest_candidates(const StrengthTable& s, int lc) {
  std::vector<std::vector<int>> out(s.num_users);
  for (int k = 0; k < s.num_users; ++k) {
    auto order = bs_by_strength(s, k);
    order.resize(std::min<std::size_t>(order.size(), std::size_t(lc)));
    std::sort(order.begin(), order.end());
    out[k] = std::move(order);
  }
  return out;
}

BeamformingState make_state(ClusterMode mode, const NetworkLayout& layout,
                            const ChannelRealization& ch,
                            std::span<const double> alpha,
                            std::vector<std::vector<int>> links, double tau) {
  BeamformingState s;
  s.mode = mode;
  s.num_users = ch.num_users;
  s.num_bs = layout.num_bs();
  s.rx_antennas = ch.rx_antennas;
  s.blocks = qcqp::BlockMap::from_layout(layout);
  s.tau = tau;
  s.w.assign(std::size_t(s.num_users) * s.blocks.total, cd{});
  s.u.assign(std::size_t(s.num_users) * s.rx_antennas, cd{});
  s.rho.assign(s.num_users, 1.0);
  s.rate.assign(s.num_users, 0.0);
  s.rate_hat.assign(s.num_users, 0.0);
  s.alpha.assign(alpha.begin(), alpha.end());
  s.beta_dyn.assign(std::size_t(s.num_bs) * s.num_users, 1.0 / tau);
  s.beta_stat.assign(s.num_users, 1.0 / tau);
  s.links = std::move(links);
  s.active.assign(s.num_users, 1);
  for (int k = 0; k < s.num_users; ++k) {
    auto& lk = s.links[k];
    std::sort(lk.begin(), lk.end());
    lk.erase(std::unique(lk.begin(), lk.end()), lk.end());
    if (lk.empty() || s.alpha[k] <= 0.0) s.active[k] = 0;
  }
  return s;
}

void initialize_beamformers(BeamformingState& s, const EngineContext& ctx,
                            std::span<const double> power_budget,
                            const BeamformingState* warm) {
  const ChannelRealization& ch = *ctx.channel;
  const bool use_warm = warm != nullptr && warm->num_users == s.num_users &&
                        warm->num_bs == s.num_bs &&
                        warm->blocks.total == s.blocks.total;
  // per-BS power shares: equal, or proportional to the warm block powers
  std::vector<double> share(std::size_t(s.num_bs) * s.num_users, 0.0);
  for (int l = 0; l < s.num_bs; ++l) {
    double total = 0.0;
    int count = 0;
    for (int k = 0; k < s.num_users; ++k) {
      if (!s.active[k]) continue;
      if (std::find(s.links[k].begin(), s.links[k].end(), l) == s.links[k].end())
        continue;
      ++count;
      if (use_warm) total += warm->block_power(k, l);
    }
    if (count == 0) continue;
    for (int k = 0; k < s.num_users; ++k) {
      if (!s.active[k]) continue;
      if (std::find(s.links[k].begin(), s.links[k].end(), l) == s.links[k].end())
        continue;
      double f = 1.0 / count;
      if (use_warm && total > 0.0) {
        // mostly follow the previous slot's split, but keep every candidate
        // alive: a zero start is an absorbing point of the fixed-point loop
        constexpr double kMix = 0.1;
        f = (1.0 - kMix) * warm->block_power(k, l) / total + kMix / count;
      }
      share[std::size_t(l) * s.num_users + k] = f * power_budget[l];
    }
  }
  const int n = s.rx_antennas;
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    for (int l : s.links[k]) {
      const int off = s.blocks.offset[l];
      const int m = s.blocks.width[l];
      // principal right-singular direction of the (k, l) channel block
      CMatrix g(m, m);
      for (int c1 = 0; c1 < m; ++c1) {
        for (int c2 = 0; c2 < m; ++c2) {
          cd acc{};
          for (int r = 0; r < n; ++r) {
            acc += std::conj(ch.at(k, r, off + c1)) * ch.at(k, r, off + c2);
          }
          g(c1, c2) = acc;
        }
      }
      CVector v(m, cd(1.0 / std::sqrt(double(m)), 0.0));
      CVector gv(m);
      bool dead = false;
      for (int it = 0; it < 30; ++it) {
        matvec(g, v, gv);
        const double nv = std::sqrt(kern::sqnorm(m, gv.data()));
        if (nv < 1e-300) {
          dead = true;
          break;
        }
        for (int t = 0; t < m; ++t) v[t] = gv[t] / nv;
      }
      cd* blk = s.w_of(k) + off;
      const double p_share = share[std::size_t(l) * s.num_users + k];
      if (dead || p_share <= 0.0) {
        std::fill(blk, blk + m, cd{});
        continue;
      }
      const double scale = std::sqrt(p_share);
      for (int t = 0; t < m; ++t) blk[t] = scale * v[t];
    }
  }
}

void compute_rates(BeamformingState& s, const EngineContext& ctx) {
  for (int k = 0; k < s.num_users; ++k) {
    s.rate[k] = s.active[k] ? user_rate(k, s, ctx) : 0.0;
  }
}

std::vector<double> actual_backhaul(const BeamformingState& s,
                                    double indicator_threshold_dbm_hz) {
  const double thr = dbm_to_mw(indicator_threshold_dbm_hz);
  std::vector<double> b(s.num_bs, 0.0);
  for (int k = 0; k < s.num_users; ++k) {
    if (s.rate[k] <= 0.0) continue;
    if (s.mode == ClusterMode::dynamic) {
      for (int l : s.links[k]) {
        if (s.block_power(k, l) >= thr) b[l] += s.rate[k];
      }
    } else {
      if (s.cluster_power(k) > thr) {
        for (int l : s.links[k]) b[l] += s.rate[k];
      }
    }
  }
  return b;
}

PassStats wmmse_pass(BeamformingState& s, const EngineContext& ctx,
                     std::span<const double> power_budget,
                     std::span<const double> backhaul_budget,
                     const EngineOptions& opts,
                     qcqp::DualVariables* warm_duals) {
  PassStats stats;
  const auto t0 = std::chrono::steady_clock::now();

  // Step 1: MMSE receivers and MSEs; Step 2: MSE weights
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    mmse_receiver(k, s, ctx, std::span<cd>(s.u_of(k), s.rx_antennas));
    s.rho[k] = mse_weight(user_mse(k, s, ctx));
  }

  // Step 3: beamformers from the convex subproblem
  std::vector<std::vector<double>> link_coeff;
  std::vector<double> cluster_coeff;
  if (s.mode == ClusterMode::dynamic) {
    link_coeff.resize(s.num_users);
    for (int k = 0; k < s.num_users; ++k) {
      if (!s.active[k]) continue;
      link_coeff[k].reserve(s.links[k].size());
      for (int l : s.links[k]) {
        link_coeff[k].push_back(s.beta_of(l, k) * s.rate_hat[k]);
      }
    }
  } else {
    cluster_coeff.resize(s.num_users, 0.0);
    for (int k = 0; k < s.num_users; ++k) {
      cluster_coeff[k] = s.beta_stat[k] * s.rate_hat[k];
    }
  }

  qcqp::AssembleInput in;
  in.channel = ctx.channel;
  in.alpha = s.alpha;
  in.rho = s.rho;
  in.receivers = s.u;
  in.supports = s.links;
  in.active = &s.active;
  in.coupling = s.mode == ClusterMode::dynamic ? qcqp::Coupling::per_link
                                               : qcqp::Coupling::per_cluster;
  in.link_coeff = link_coeff;
  in.cluster_coeff = cluster_coeff;
  in.power_budget = power_budget;
  in.backhaul_budget = backhaul_budget;

  qcqp::QcqpSubproblem problem = qcqp::assemble(in, s.blocks);

  if (!opts.dump_qcqp_path.empty()) {
    std::ofstream os(opts.dump_qcqp_path);
    if (os) qcqp::dump(problem, os);
  }

  if (problem.users.empty()) {
    stats.surrogate_usage.assign(s.num_bs, 0.0);
    stats.solver_status = "empty";
    stats.solver_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  qcqp::Solution sol = qcqp::solve(problem, opts.qcqp, warm_duals);
  if (warm_duals) *warm_duals = sol.duals;

  std::vector<CVector> accepted = std::move(sol.w);
  bool kept = false;
  if (opts.monotone_guard) {
    // previous beamformers are feasible whenever the surrogate coefficients
    // did not change; keep them if the subproblem showed no progress
    std::vector<CVector> old_w(problem.users.size());
    for (std::size_t i = 0; i < problem.users.size(); ++i) {
      const auto& pu = problem.users[i];
      old_w[i].resize(problem.support_dim(pu));
      int off = 0;
      for (int l : pu.support) {
        const cd* blk = s.w_of(pu.user_id) + s.blocks.offset[l];
        std::copy(blk, blk + problem.blocks.width[l], old_w[i].begin() + off);
        off += problem.blocks.width[l];
      }
    }
    const double f_new = qcqp::objective_of(problem, accepted);
    const double f_old = qcqp::objective_of(problem, old_w);
    const double v_old = qcqp::max_violation_rel(problem, old_w);
    if (v_old <= 1e-9 && f_old < f_new) {
      accepted = std::move(old_w);
      kept = true;
    }
  }

  for (std::size_t i = 0; i < problem.users.size(); ++i) {
    const auto& pu = problem.users[i];
    cd* wk = s.w_of(pu.user_id);
    std::fill(wk, wk + s.blocks.total, cd{});
    int off = 0;
    for (int l : pu.support) {
      std::copy(accepted[i].begin() + off,
                accepted[i].begin() + off + problem.blocks.width[l],
                wk + problem.blocks.offset[l]);
      off += problem.blocks.width[l];
    }
  }

  const std::vector<double> usage = qcqp::usage_of(problem, accepted);
  stats.surrogate_usage.assign(usage.begin() + s.num_bs, usage.end());
  stats.kept_previous = kept;
  stats.solver_iterations = sol.iterations;
  stats.solver_status = kept ? sol.status + "+guard" : sol.status;
  stats.solver_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

namespace {

std::vector<double> per_bs_power(const BeamformingState& s) {
  std::vector<double> p(s.num_bs, 0.0);
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    for (int l : s.links[k]) p[l] += s.block_power(k, l);
  }
  return p;
}

// Zero any block (dynamic) or cluster (static) under the scheduling
// indicator so the sparsity-indicator semantics hold exactly at the output.
// Blocks carrying a negligible share of their user's power are cleared as
// well: the consumption audit bills a serving BS with the user's whole rate,
// so a block at -30 dB relative power buys well under 1% of the signal for a
// full slice of some BS's backhaul. The reweighting spiral prices these out
// asymptotically; the sweep finishes the job at the output.
void final_threshold_sweep(BeamformingState& s, double threshold_dbm_hz,
                           double dust_rel) {
  const double thr = dbm_to_mw(threshold_dbm_hz);
  for (int k = 0; k < s.num_users; ++k) {
    if (!s.active[k]) continue;
    if (s.mode == ClusterMode::dynamic) {
      const double dust = dust_rel * s.cluster_power(k);
      for (int l : s.links[k]) {
        const double bp = s.block_power(k, l);
        if (bp < thr || bp < dust) {
          cd* blk = s.w_of(k) + s.blocks.offset[l];
          std::fill(blk, blk + s.blocks.width[l], cd{});
        }
      }
      if (s.cluster_power(k) == 0.0) s.active[k] = 0;
    } else {
      if (s.cluster_power(k) <= thr) {
        cd* wk = s.w_of(k);
        std::fill(wk, wk + s.blocks.total, cd{});
        s.active[k] = 0;
      }
    }
  }
}

// Restore hard feasibility of the thresholded-indicator consumption. Users
// are visited in ascending alpha_k R_k order at the most-violated BS; a user
// whose rate exceeds the remaining excess is power-trimmed (bisection on its
// block scale) rather than dropped outright.
void repair_backhaul(BeamformingState& s, const EngineContext& ctx,
                     std::span<const double> backhaul_budget,
                     const EngineOptions& opts, DiagnosticsTrace& trace) {
  const double thr = dbm_to_mw(opts.sched_indicator_dbm_hz);
  const int max_ops = s.num_users * s.num_bs + 16;

  auto scale_user_at = [&](int k, int l, double amp) {
    if (s.mode == ClusterMode::dynamic) {
      cd* blk = s.w_of(k) + s.blocks.offset[l];
      for (int t = 0; t < s.blocks.width[l]; ++t) blk[t] *= amp;
    } else {
      cd* wk = s.w_of(k);
      for (int t = 0; t < s.blocks.total; ++t) wk[t] *= amp;
    }
  };

  // trigger only beyond a fifth of the audit slack and trim back to just
  // under the budget; the hysteresis keeps one user's trim from cascading
  // through the neighbours' rate rebound
  constexpr double kTrigger = 2e-3;
  constexpr double kTarget = -1e-4;
  for (int pass = 0; pass < max_ops; ++pass) {
    compute_rates(s, ctx);
    std::vector<double> b = actual_backhaul(s, opts.sched_indicator_dbm_hz);
    int worst = -1;
    double worst_excess = 0.0;
    for (int l = 0; l < s.num_bs; ++l) {
      if (!std::isfinite(backhaul_budget[l])) continue;
      const double excess = b[l] - backhaul_budget[l] * (1.0 + kTrigger);
      if (excess > 1e-15 && excess > worst_excess) {
        worst = l;
        worst_excess = excess;
      }
    }
    if (worst < 0) return;
    worst_excess = b[worst] - backhaul_budget[worst];

    int user = -1;
    double score = kInf;
    for (int k = 0; k < s.num_users; ++k) {
      if (!s.active[k] || s.rate[k] <= 0.0) continue;
      const bool listed = std::find(s.links[k].begin(), s.links[k].end(), worst) !=
                          s.links[k].end();
      const bool served = listed && (s.mode == ClusterMode::dynamic
                                         ? s.block_power(k, worst) >= thr
                                         : s.cluster_power(k) > thr);
      if (!served) continue;
      const double sc = s.alpha[k] * s.rate[k];
      if (sc < score) {
        score = sc;
        user = k;
      }
    }
    if (user < 0) return;  // nothing schedulable left at this BS

    ++trace.repair_drops;
    if (s.rate[user] <= worst_excess) {
      // removing the whole link is no more than the required reduction
      scale_user_at(user, worst, 0.0);
      if (s.cluster_power(user) == 0.0) s.active[user] = 0;
      continue;
    }

    // trim: find the largest block scale that restores this BS's budget,
    // bisecting on a saved copy of the touched coefficients
    const double target = backhaul_budget[worst] * (1.0 + kTarget);
    auto bs_usage = [&]() {
      compute_rates(s, ctx);
      return actual_backhaul(s, opts.sched_indicator_dbm_hz)[worst];
    };
    CVector saved;
    if (s.mode == ClusterMode::dynamic) {
      const cd* blk = s.w_of(user) + s.blocks.offset[worst];
      saved.assign(blk, blk + s.blocks.width[worst]);
    } else {
      const cd* wk = s.w_of(user);
      saved.assign(wk, wk + s.blocks.total);
    }
    auto apply_scale = [&](double amp) {
      if (s.mode == ClusterMode::dynamic) {
        cd* blk = s.w_of(user) + s.blocks.offset[worst];
        for (std::size_t t = 0; t < saved.size(); ++t) blk[t] = amp * saved[t];
      } else {
        cd* wk = s.w_of(user);
        for (std::size_t t = 0; t < saved.size(); ++t) wk[t] = amp * saved[t];
      }
    };
    apply_scale(0.0);
    if (bs_usage() > target) {
      // even the full drop is not enough here; keep it and continue
      if (s.cluster_power(user) == 0.0) s.active[user] = 0;
      continue;
    }
    double lo = 0.0;
    double hi = 1.0;
    for (int it2 = 0; it2 < 50; ++it2) {
      const double mid = 0.5 * (lo + hi);
      apply_scale(mid);
      if (bs_usage() > target) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    apply_scale(lo);
    compute_rates(s, ctx);
    if (s.cluster_power(user) == 0.0) s.active[user] = 0;
  }
}

EngineResult run_engine(ClusterMode mode, const NetworkLayout& layout,
                        const ChannelRealization& ch,
                        std::span<const double> alpha,
                        std::vector<std::vector<int>> links,
                        std::span<const double> backhaul_bps_hz,
                        EngineOptions opts) {
  const auto t_start = std::chrono::steady_clock::now();
  EngineContext ctx{&ch, layout.config.noise_mw_per_hz()};

  std::vector<double> power_budget(layout.num_bs());
  for (int l = 0; l < layout.num_bs(); ++l) {
    power_budget[l] = layout.base_stations[l].power_budget_mw_hz;
  }
  std::vector<double> backhaul(layout.num_bs(), kInf);
  if (opts.enforce_backhaul) {
    for (int l = 0; l < layout.num_bs(); ++l) backhaul[l] = backhaul_bps_hz[l];
  }

  EngineResult res;
  res.state = make_state(mode, layout, ch, alpha, std::move(links), opts.tau);
  BeamformingState& s = res.state;

  const bool use_warm = opts.warm_start != nullptr &&
                        opts.warm_start->num_users == s.num_users &&
                        opts.warm_start->num_bs == s.num_bs &&
                        opts.warm_start->blocks.total == s.blocks.total;
  initialize_beamformers(s, ctx, power_budget, opts.warm_start);
  compute_rates(s, ctx);
  s.rate_hat = use_warm ? opts.warm_start->rate : s.rate;
  if (mode == ClusterMode::dynamic) {
    update_beta_dynamic(s);
  } else {
    update_beta_static(s);
  }

  qcqp::DualVariables warm;
  double prev_obj = wsr_objective(s);
  std::string first_dump = opts.dump_qcqp_path;

  // best iterate whose thresholded-indicator consumption already fits the
  // budgets; the surrogate lags the achieved rates by one iteration, so the
  // last iterate is not always the one to keep
  BeamformingState best_feasible;
  double best_feasible_obj = -kInf;
  BeamformingState least_violated;
  double least_violation = kInf;
  const double audit_slack = 5e-3;

  auto audit_violation = [&](const BeamformingState& st) {
    const std::vector<double> b = actual_backhaul(st, opts.sched_indicator_dbm_hz);
    double worst = 0.0;
    for (int l = 0; l < st.num_bs; ++l) {
      if (std::isfinite(backhaul[l]) && backhaul[l] > 0.0) {
        worst = std::max(worst, (b[l] - backhaul[l]) / backhaul[l]);
      } else if (backhaul[l] == 0.0 && b[l] > 0.0) {
        worst = std::max(worst, 1.0);
      }
    }
    return worst;
  };

  const double dust_rel = opts.enforce_backhaul ? 1e-3 : 1e-6;

  auto consider_snapshot = [&]() {
    if (!opts.enforce_backhaul || !opts.final_repair) return;
    BeamformingState audit = s;
    final_threshold_sweep(audit, opts.sched_indicator_dbm_hz, dust_rel);
    compute_rates(audit, ctx);
    const double viol = audit_violation(audit);
    if (viol < least_violation) {
      least_violation = viol;
      least_violated = audit;
    }
    if (viol > audit_slack) return;
    const double obj = wsr_objective(audit);
    if (obj > best_feasible_obj) {
      best_feasible_obj = obj;
      best_feasible = std::move(audit);
    }
  };

  auto run_iteration = [&](int it) {
    EngineOptions pass_opts = opts;
    pass_opts.dump_qcqp_path = it == 1 ? first_dump : "";
    PassStats pass = wmmse_pass(s, ctx, power_budget, backhaul, pass_opts, &warm);
    for (int extra = 1; extra < opts.passes_per_iteration; ++extra) {
      pass_opts.dump_qcqp_path.clear();
      PassStats p2 = wmmse_pass(s, ctx, power_budget, backhaul, pass_opts, &warm);
      pass.solver_seconds += p2.solver_seconds;
      pass.solver_iterations += p2.solver_iterations;
      pass.surrogate_usage = p2.surrogate_usage;
    }

    // Step 4: achievable rates; Step 5: surrogate refresh
    compute_rates(s, ctx);
    s.rate_hat = s.rate;
    if (mode == ClusterMode::dynamic) {
      update_beta_dynamic(s);
    } else {
      update_beta_static(s);
    }

    if (mode == ClusterMode::dynamic && opts.enable_prune) {
      prune_links(s, opts.prune_threshold_dbm_hz);
      if (opts.enforce_backhaul && it >= 5 && opts.prune_rel > 0.0) {
        prune_links_relative(s, opts.prune_rel);
      }
    }
    if (opts.enable_shrink) {
      shrink_user_pool(s, opts.shrink_threshold_bps_hz);
    }

    const double obj = wsr_objective(s);
    if (opts.collect_trace) {
      IterationStats row;
      row.iteration = it;
      row.objective = obj;
      row.bs_power = per_bs_power(s);
      row.bs_backhaul_surrogate = pass.surrogate_usage;
      row.bs_backhaul_actual = actual_backhaul(s, opts.sched_indicator_dbm_hz);
      row.active_users =
          static_cast<int>(std::count(s.active.begin(), s.active.end(), char(1)));
      row.mean_candidate_size = mean_candidate_size(s);
      row.solver_seconds = pass.solver_seconds;
      row.solver_iterations = pass.solver_iterations;
      row.solver_status = pass.solver_status;
      res.trace.iterations.push_back(std::move(row));
    }
    return obj;
  };

  int it = 1;
  for (; it <= opts.max_iters; ++it) {
    const double obj = run_iteration(it);
    consider_snapshot();
    const double rel = std::abs(obj - prev_obj) / std::max(std::abs(prev_obj), 1e-12);
    prev_obj = obj;
    if (it >= 2 && rel < opts.rel_tol) {
      res.trace.converged = true;
      ++it;
      break;
    }
  }

  // Let the surrogate catch up with the achieved rates before any repair:
  // extra iterations while the thresholded-indicator consumption still
  // overshoots a budget (the reweighting spiral needs a few rounds to push
  // dying links below the removal threshold).
  if (opts.enforce_backhaul) {
    for (int extra = 0; extra < 8 && it <= opts.max_iters; ++extra, ++it) {
      BeamformingState audit = s;
      final_threshold_sweep(audit, opts.sched_indicator_dbm_hz, dust_rel);
      compute_rates(audit, ctx);
      if (audit_violation(audit) <= audit_slack) break;
      prev_obj = run_iteration(it);
      consider_snapshot();
    }
  }

  final_threshold_sweep(s, opts.sched_indicator_dbm_hz, dust_rel);
  compute_rates(s, ctx);
  if (opts.enforce_backhaul && opts.final_repair) {
    repair_backhaul(s, ctx, backhaul, opts, res.trace);
    compute_rates(s, ctx);
    auto try_candidate = [&](BeamformingState cand) {
      repair_backhaul(cand, ctx, backhaul, opts, res.trace);
      compute_rates(cand, ctx);
      if (wsr_objective(cand) > wsr_objective(s)) s = std::move(cand);
    };
    if (best_feasible_obj > -kInf) try_candidate(std::move(best_feasible));
    if (least_violation < kInf && least_violation > audit_slack) {
      try_candidate(std::move(least_violated));
    }
  }

  res.trace.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace

EngineResult run_dynamic(const NetworkLayout& layout, const ChannelRealization& ch,
                         std::span<const double> alpha,
                         const std::vector<std::vector<int>>& candidates,
                         std::span<const double> backhaul_bps_hz,
                         const EngineOptions& opts) {
  return run_engine(ClusterMode::dynamic, layout, ch, alpha, candidates,
                    backhaul_bps_hz, opts);
}

EngineResult run_static(const NetworkLayout& layout, const ChannelRealization& ch,
                        std::span<const double> alpha,
                        const ClusterAssignment& clusters,
                        std::span<const double> backhaul_bps_hz,
                        const EngineOptions& opts) {
  EngineOptions o = opts;
  o.enable_prune = false;  // clusters are fixed; only scheduling adapts
  return run_engine(ClusterMode::fixed, layout, ch, alpha, clusters.serving,
                    backhaul_bps_hz, o);
}

void DiagnosticsTrace::write_csv(std::ostream& os) const {
  if (iterations.empty()) return;
  const std::size_t nbs = iterations.front().bs_power.size();
  os << "iteration,objective,active_users,mean_candidate_size,solver_seconds,"
        "solver_iterations,solver_status";
  for (std::size_t l = 0; l < nbs; ++l) os << ",power_bs" << l;
  for (std::size_t l = 0; l < nbs; ++l) os << ",surrogate_bs" << l;
  for (std::size_t l = 0; l < nbs; ++l) os << ",actual_bs" << l;
  os << "\n";
  os.precision(12);
  for (const auto& r : iterations) {
    os << r.iteration << "," << r.objective << "," << r.active_users << ","
       << r.mean_candidate_size << "," << r.solver_seconds << ","
       << r.solver_iterations << "," << r.solver_status;
    for (double v : r.bs_power) os << "," << v;
    for (double v : r.bs_backhaul_surrogate) os << "," << v;
    for (double v : r.bs_backhaul_actual) os << "," << v;
    os << "\n";
  }
}

}  // namespace cransim::wmmse
