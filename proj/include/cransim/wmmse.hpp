#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cransim/qcqp.hpp"

// Block-coordinate weighted-MMSE loops with reweighted group-sparsity
// surrogates for the per-BS backhaul caps. run_dynamic() re-selects each
// user's serving set every slot; run_static() keeps a fixed cluster and only
// schedules within it.

namespace cransim::wmmse {

using cransim::cd;

enum class ClusterMode { dynamic, fixed };

struct ClusterAssignment {
  std::vector<std::vector<int>> serving;  // per user, sorted BS ids
  std::vector<std::vector<int>> served;   // per BS, sorted user ids

  static ClusterAssignment from_serving(std::vector<std::vector<int>> serving,
                                        int num_bs);
  bool consistent() const;
};

struct BeamformingState {
  ClusterMode mode = ClusterMode::dynamic;
  int num_users = 0;
  int num_bs = 0;
  int rx_antennas = 0;
  qcqp::BlockMap blocks;
  double tau = 1e-10;

  std::vector<cd> w;             // K x M_t, block-sparse in the BS blocks
  std::vector<cd> u;             // K x N receivers
  std::vector<double> rho;       // MSE weights
  std::vector<double> rate;      // bps/Hz, last computed
  std::vector<double> rate_hat;  // fixed-rate surrogate from the last pass
  std::vector<double> alpha;     // priority weights
  std::vector<double> beta_dyn;  // [l * K + k], dynamic reweighting
  std::vector<double> beta_stat; // per user, cluster reweighting
  std::vector<char> active;
  std::vector<std::vector<int>> links;  // candidate set / fixed cluster

  cd* w_of(int k) { return w.data() + std::size_t(k) * blocks.total; }
  const cd* w_of(int k) const { return w.data() + std::size_t(k) * blocks.total; }
  cd* u_of(int k) { return u.data() + std::size_t(k) * rx_antennas; }
  const cd* u_of(int k) const { return u.data() + std::size_t(k) * rx_antennas; }
  double& beta_of(int l, int k) { return beta_dyn[std::size_t(l) * num_users + k]; }
  double beta_of(int l, int k) const { return beta_dyn[std::size_t(l) * num_users + k]; }

  double block_power(int k, int l) const;
  double cluster_power(int k) const;  // over this user's links
};

struct EngineContext {
  const ChannelRealization* channel = nullptr;
  double sigma2 = 0.0;  // noise PSD, mW/Hz
};

// --- per-user quantities ---------------------------------------------------

double user_rate(int k, const BeamformingState& s, const EngineContext& ctx);
void mmse_receiver(int k, const BeamformingState& s, const EngineContext& ctx,
                   std::span<cd> u_out);
double user_mse(int k, const BeamformingState& s, const EngineContext& ctx);
double mse_weight(double mse);  // 1/e; throws std::domain_error if e <= 0

void update_beta_dynamic(BeamformingState& s);
void update_beta_static(BeamformingState& s);

// Candidate-set and scheduling-pool heuristics. Removed links never return.
void prune_links(BeamformingState& s, double threshold_dbm_hz);
void prune_links_relative(BeamformingState& s, double rel);
void shrink_user_pool(BeamformingState& s, double rate_threshold_bps_hz);

double wsr_objective(const BeamformingState& s);  // sum alpha_k R_k
// sum alpha_k (rho_k e_k - ln rho_k) at the current receivers/weights
double wmmse_objective(const BeamformingState& s, const EngineContext& ctx);

double mean_candidate_size(const BeamformingState& s);

// --- engine ------------------------------------------------------------------

struct EngineOptions {
  int max_iters = 100;
  double rel_tol = 1e-3;
  int passes_per_iteration = 1;  // inner Step 1-3 repeats per surrogate refresh
  double tau = 1e-10;
  bool enforce_backhaul = true;
  bool enable_prune = true;
  double prune_threshold_dbm_hz = -100.0;
  double prune_rel = 0.0;   // optional in-loop removal of sub-relative-power links
  bool enable_shrink = true;
  double shrink_threshold_bps_hz = 0.01;
  double sched_indicator_dbm_hz = -100.0;
  bool monotone_guard = true;
  bool final_repair = true;
  bool collect_trace = true;
  qcqp::SolveOptions qcqp;
  std::string dump_qcqp_path;  // when nonempty, first subproblem is dumped here
  // previous-slot state (same network shape) used to seed the power split and
  // the rate surrogate; serving patterns are geometry-driven and persist
  const BeamformingState* warm_start = nullptr;
};

struct IterationStats {
  int iteration = 0;
  double objective = 0.0;  // sum alpha_k R_k
  std::vector<double> bs_power;
  std::vector<double> bs_backhaul_surrogate;
  std::vector<double> bs_backhaul_actual;
  int active_users = 0;
  double mean_candidate_size = 0.0;
  double solver_seconds = 0.0;
  int solver_iterations = 0;
  std::string solver_status;
};

struct DiagnosticsTrace {
  std::vector<IterationStats> iterations;
  bool converged = false;
  int repair_drops = 0;
  double total_seconds = 0.0;

  void write_csv(std::ostream& os) const;
};

struct EngineResult {
  BeamformingState state;
  DiagnosticsTrace trace;
};

std::vector<std::vector<int>> strongest_candidates(const StrengthTable& s, int lc);

EngineResult run_dynamic(const NetworkLayout& layout, const ChannelRealization& ch,
                         std::span<const double> alpha,
                         const std::vector<std::vector<int>>& candidates,
                         std::span<const double> backhaul_bps_hz,
                         const EngineOptions& opts);

EngineResult run_static(const NetworkLayout& layout, const ChannelRealization& ch,
                        std::span<const double> alpha,
                        const ClusterAssignment& clusters,
                        std::span<const double> backhaul_bps_hz,
                        const EngineOptions& opts);

// --- composable pieces (exposed for tests) ----------------------------------

BeamformingState make_state(ClusterMode mode, const NetworkLayout& layout,
                            const ChannelRealization& ch,
                            std::span<const double> alpha,
                            std::vector<std::vector<int>> links, double tau);

// matched-filter start: each BS splits its power budget across the users
// that list it, evenly by default or following the warm state's block powers
void initialize_beamformers(BeamformingState& s, const EngineContext& ctx,
                            std::span<const double> power_budget,
                            const BeamformingState* warm = nullptr);

void compute_rates(BeamformingState& s, const EngineContext& ctx);

struct PassStats {
  double solver_seconds = 0.0;
  int solver_iterations = 0;
  std::string solver_status;
  std::vector<double> surrogate_usage;  // per BS, of the accepted beamformers
  bool kept_previous = false;           // monotone guard engaged
};

// Steps 1-3 (receivers, weights, QCQP beamformers) with beta/rate_hat frozen.
PassStats wmmse_pass(BeamformingState& s, const EngineContext& ctx,
                     std::span<const double> power_budget,
                     std::span<const double> backhaul_budget,
                     const EngineOptions& opts,
                     qcqp::DualVariables* warm_duals);

// Eq (4)/(5) style consumption with thresholded indicators, bps/Hz per BS.
std::vector<double> actual_backhaul(const BeamformingState& s,
                                    double indicator_threshold_dbm_hz);

}  // namespace cransim::wmmse
