#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cransim/channel.hpp"
#include "cransim/linalg.hpp"

// Convex per-iteration beamformer subproblem: minimize
//   sum_k  w_k^H A w_k - 2 Re(b_k^H w_k)
// subject to per-BS transmit power caps and per-BS weighted-power caps (the
// reweighted surrogate for the backhaul budget). Solved by supergradient
// ascent on the concave dual with a projected-Newton polish; the primal is
// recovered in closed form from the duals.

namespace cransim::qcqp {

using cransim::cd;

struct BlockMap {
  std::vector<int> offset;  // first antenna column per BS
  std::vector<int> width;   // antennas per BS
  int total = 0;

  int num_bs() const { return static_cast<int>(offset.size()); }
  static BlockMap from_layout(const NetworkLayout& layout);
};

// How the weighted-power ("backhaul") cap at BS l loads the blocks of w_k:
//   per_link:    coeff_{l,k} * ||w_k^l||^2 enters constraint l only
//   per_cluster: coeff_k * ||w_k||^2 (whole serving cluster) enters the
//                constraint of every BS in the user's cluster
enum class Coupling { per_link, per_cluster };

struct QcqpSubproblem {
  Coupling coupling = Coupling::per_link;
  BlockMap blocks;
  CMatrix a;                            // M_t x M_t Hermitian PSD
  std::vector<double> power_budget;     // per BS, mW/Hz
  std::vector<double> backhaul_budget;  // per BS, bps/Hz scale; inf = disabled

  struct User {
    int user_id = -1;
    std::vector<int> support;       // sorted BS ids; empty = skip
    CVector b;                      // stacked over support blocks
    std::vector<double> bh_coeff;   // per_link: aligned with support;
                                    // per_cluster: single entry
  };
  std::vector<User> users;

  int num_bs() const { return blocks.num_bs(); }
  int support_dim(const User& u) const;
};

struct DualVariables {
  std::vector<double> mu;      // power multipliers, >= 0
  std::vector<double> lambda;  // backhaul multipliers, >= 0
};

struct SolveOptions {
  double tol = 1e-6;        // relative constraint violation / slackness
  int max_iters = 5000;     // dual evaluations
  int subgrad_iters = 80;   // phase-1 length before the Newton polish
  bool newton_polish = true;
  std::vector<double>* dual_value_trace = nullptr;  // g per evaluation (tests)
};

struct Solution {
  std::vector<CVector> w;  // per problem user, stacked over support blocks
  DualVariables duals;
  std::string status;      // "converged" or "inexact"
  double objective = 0.0;
  double dual_value = 0.0;
  double max_violation_rel = 0.0;
  double max_compl_slack_rel = 0.0;
  int iterations = 0;
};

// Closed-form stationary point w_k = (A_k + D_k)^{-1} b_k for fixed duals,
// with a trace-scaled ridge whenever the system is singular.
std::vector<CVector> primal_from_duals(const QcqpSubproblem& p,
                                       const DualVariables& duals);

// Objective / constraint usage of beamformers given in support stacking.
// usage_of returns 2L entries: power per BS, then weighted-power per BS.
double objective_of(const QcqpSubproblem& p, const std::vector<CVector>& w);
std::vector<double> usage_of(const QcqpSubproblem& p, const std::vector<CVector>& w);
double max_violation_rel(const QcqpSubproblem& p, const std::vector<CVector>& w);

Solution solve(const QcqpSubproblem& p, const SolveOptions& opts = {},
               const DualVariables* warm_start = nullptr);

// Ingredients the engine provides; see wmmse.hpp for the state-level wrapper.
struct AssembleInput {
  const ChannelRealization* channel = nullptr;
  std::span<const double> alpha;     // K
  std::span<const double> rho;       // K
  std::span<const cd> receivers;     // K x N, row per user
  std::span<const std::vector<int>> supports;  // K, sorted BS ids
  const std::vector<char>* active = nullptr;   // optional mask, K
  Coupling coupling = Coupling::per_link;
  // per_link: coefficient per (user, support entry); per_cluster: one per user
  std::span<const std::vector<double>> link_coeff;
  std::span<const double> cluster_coeff;
  std::span<const double> power_budget;
  std::span<const double> backhaul_budget;
};

QcqpSubproblem assemble(const AssembleInput& in, const BlockMap& blocks);

// Text dump of a subproblem for offline cross-checking (see README).
void dump(const QcqpSubproblem& p, std::ostream& os);
QcqpSubproblem parse_dump(std::istream& is);

}  // namespace cransim::qcqp
