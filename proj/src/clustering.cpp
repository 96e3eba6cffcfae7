#include "cransim/clustering.hpp"

#include <algorithm>
#include <stdexcept>

namespace cransim::clustering {

std::vector<int> candidate_cluster(int k, const StrengthTable& s, double eta1_db) {
  double best = -kInf;
  for (int l = 0; l < s.num_bs; ++l) best = std::max(best, s.at(l, k));
  std::vector<int> out;
  for (int l = 0; l < s.num_bs; ++l) {
    if (best - s.at(l, k) <= eta1_db) out.push_back(l);
  }
  return out;
}

ClusterAssignment max_loading_clusters(const StrengthTable& s,
                                       const NetworkLayout& layout,
                                       const ClusterPolicy& policy) {
  const int K = s.num_users;
  const int L = s.num_bs;

  // candidate lists ordered strongest-first (ties by ascending BS id)
  std::vector<std::vector<int>> cand(K);
  for (int k = 0; k < K; ++k) {
    const std::vector<int> in_set = candidate_cluster(k, s, policy.eta1_db);
    std::vector<int> ordered = bs_by_strength(s, k);
    for (int l : ordered) {
      if (std::find(in_set.begin(), in_set.end(), l) != in_set.end()) {
        cand[k].push_back(l);
      }
    }
  }

  std::vector<int> kmax(L);
  for (int l = 0; l < L; ++l) {
    kmax[l] = layout.base_stations[l].tier == Tier::macro ? policy.kmax_macro
                                                          : policy.kmax_pico;
  }

  std::vector<std::vector<int>> assigned(K);
  std::vector<int> load(L, 0);
  std::vector<char> bs_open(L, 1);
  std::vector<char> user_live(K, 1);
  int live_users = K;
  int open_bs = L;

  for (int round = 0; live_users > 0 && open_bs > 0; ++round) {
    // requests to each user's (round+1)-th strongest candidate
    std::vector<std::vector<int>> requests(L);
    for (int k = 0; k < K; ++k) {
      if (!user_live[k]) continue;
      if (round >= static_cast<int>(cand[k].size())) continue;
      const int l = cand[k][round];
      if (bs_open[l]) requests[l].push_back(k);
    }

    for (int l = 0; l < L; ++l) {
      if (!bs_open[l] || requests[l].empty()) continue;
      const int room = kmax[l] - load[l];
      if (room >= static_cast<int>(requests[l].size())) {
        for (int k : requests[l]) {
          assigned[k].push_back(l);
          ++load[l];
        }
      } else {
        // strongest requesters first, ties by ascending user id
        std::stable_sort(requests[l].begin(), requests[l].end(),
                         [&](int a, int b) {
                           const double sa = s.at(l, a), sb = s.at(l, b);
                           if (sa != sb) return sa > sb;
                           return a < b;
                         });
        for (int i = 0; i < room; ++i) {
          assigned[requests[l][i]].push_back(l);
          ++load[l];
        }
        bs_open[l] = 0;
        --open_bs;
      }
    }

    for (int k = 0; k < K; ++k) {
      if (user_live[k] && round + 1 >= static_cast<int>(cand[k].size())) {
        user_live[k] = 0;
        --live_users;
      }
    }
  }

  return ClusterAssignment::from_serving(std::move(assigned), L);
}

ClusterAssignment biased_clusters(const StrengthTable& s,
                                  const NetworkLayout& layout,
                                  const ClusterPolicy& policy) {
  const int K = s.num_users;
  const int L = s.num_bs;
  std::vector<double> bias(L);
  for (int l = 0; l < L; ++l) {
    bias[l] = layout.base_stations[l].tier == Tier::macro ? policy.bias_macro_db
                                                          : policy.bias_pico_db;
  }
  std::vector<std::vector<int>> serving(K);
  for (int k = 0; k < K; ++k) {
    double best = -kInf;
    for (int l = 0; l < L; ++l) best = std::max(best, s.at(l, k) + bias[l]);
    for (int l = 0; l < L; ++l) {
      if (best - (s.at(l, k) + bias[l]) <= policy.eta2_db) serving[k].push_back(l);
    }
  }
  return ClusterAssignment::from_serving(std::move(serving), L);
}

ClusterAssignment baseline_clusters(const StrengthTable& s,
                                    const NetworkLayout& layout,
                                    const ClusterPolicy& policy) {
  const int K = s.num_users;
  const int L = s.num_bs;
  std::vector<std::vector<int>> serving(K);
  if (policy.kind == PolicyKind::strongest_s) {
    if (policy.strongest_s < 1 || policy.strongest_s > L) {
      throw std::invalid_argument("strongest_s must be in [1, num_bs]");
    }
    for (int k = 0; k < K; ++k) {
      std::vector<int> order = bs_by_strength(s, k);
      order.resize(policy.strongest_s);
      serving[k] = std::move(order);
    }
  } else if (policy.kind == PolicyKind::disjoint_cell) {
    for (int k = 0; k < K; ++k) {
      const int cell = layout.users[k].cell;
      for (int l = 0; l < L; ++l) {
        if (layout.base_stations[l].cell == cell) serving[k].push_back(l);
      }
    }
  } else {
    throw std::invalid_argument("baseline_clusters: not a baseline policy");
  }
  return ClusterAssignment::from_serving(std::move(serving), L);
}

ClusterAssignment build_clusters(const StrengthTable& s,
                                 const NetworkLayout& layout,
                                 const ClusterPolicy& policy) {
  switch (policy.kind) {
    case PolicyKind::max_loading:
      return max_loading_clusters(s, layout, policy);
    case PolicyKind::biased:
      return biased_clusters(s, layout, policy);
    case PolicyKind::strongest_s:
    case PolicyKind::disjoint_cell:
      return baseline_clusters(s, layout, policy);
  }
  throw std::invalid_argument("unknown cluster policy");
}

}  // namespace cransim::clustering
