#pragma once

#include <vector>

#include "cransim/channel.hpp"
#include "cransim/wmmse.hpp"

// Static cluster construction: strength-gap candidate sets, load-capped
// multi-round negotiation, biased-strength clusters, and the strongest-S /
// own-cell baselines.

namespace cransim::clustering {

using wmmse::ClusterAssignment;

enum class PolicyKind { strongest_s, disjoint_cell, max_loading, biased };

struct ClusterPolicy {
  PolicyKind kind = PolicyKind::strongest_s;
  int strongest_s = 2;
  double eta1_db = 14.0;          // candidate-set strength gap
  double eta2_db = 12.0;          // biased-cluster strength gap
  double bias_macro_db = 0.0;
  double bias_pico_db = 6.0;
  int kmax_macro = 70;            // per-BS load caps for max_loading
  int kmax_pico = 10;
};

// Eq-style candidate set: BSs within eta1 dB of the user's strongest BS.
std::vector<int> candidate_cluster(int k, const StrengthTable& s, double eta1_db);

ClusterAssignment max_loading_clusters(const StrengthTable& s,
                                       const NetworkLayout& layout,
                                       const ClusterPolicy& policy);

ClusterAssignment biased_clusters(const StrengthTable& s,
                                  const NetworkLayout& layout,
                                  const ClusterPolicy& policy);

ClusterAssignment baseline_clusters(const StrengthTable& s,
                                    const NetworkLayout& layout,
                                    const ClusterPolicy& policy);

ClusterAssignment build_clusters(const StrengthTable& s,
                                 const NetworkLayout& layout,
                                 const ClusterPolicy& policy);

}  // namespace cransim::clustering
