#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "cransim/clustering.hpp"
#include "cransim/rng.hpp"

using namespace cransim;
namespace cl = cransim::clustering;

namespace {

// layout with the right BS count/tiers for clustering; positions unused
NetworkLayout stub_layout(int num_macro, int num_pico) {
  NetworkLayout layout;
  for (int i = 0; i < num_macro + num_pico; ++i) {
    BaseStation bs;
    bs.id = i;
    bs.cell = 0;
    bs.tier = i < num_macro ? Tier::macro : Tier::pico;
    layout.base_stations.push_back(bs);
  }
  return layout;
}

StrengthTable table(int num_bs, int num_users, const std::vector<double>& vals) {
  StrengthTable s;
  s.num_bs = num_bs;
  s.num_users = num_users;
  s.s_dbm = vals;
  return s;
}

}  // namespace

TEST_CASE("candidate cluster keeps BSs within the strength gap") {
  const StrengthTable s = table(3, 1, {-80.0, -90.0, -100.0});
  CHECK(cl::candidate_cluster(0, s, 14.0) == std::vector<int>{0, 1});
  CHECK(cl::candidate_cluster(0, s, 0.0) == std::vector<int>{0});
  CHECK(cl::candidate_cluster(0, s, 100.0) == std::vector<int>{0, 1, 2});
}

TEST_CASE("zero gap keeps exact ties by id") {
  const StrengthTable s = table(3, 1, {-80.0, -80.0, -90.0});
  CHECK(cl::candidate_cluster(0, s, 0.0) == std::vector<int>{0, 1});
}

TEST_CASE("candidate cluster grows with the gap") {
  const StrengthTable s = table(4, 1, {-75.0, -82.0, -88.0, -95.0});
  std::size_t prev = 0;
  for (double eta = 0.0; eta <= 25.0; eta += 1.0) {
    const auto c = cl::candidate_cluster(0, s, eta);
    CHECK(c.size() >= prev);
    CHECK(!c.empty());
    CHECK(std::find(c.begin(), c.end(), 0) != c.end());
    prev = c.size();
  }
}

TEST_CASE("max-loading negotiation matches the two-user hand simulation") {
  // both users list BS0 first; user 0 wins it, user 1 falls through to BS1
  const StrengthTable s = table(2, 2, {-60.0, -61.0,    // BS0 row
                                       -70.0, -65.0});  // BS1 row
  NetworkLayout layout = stub_layout(2, 0);
  cl::ClusterPolicy p;
  p.eta1_db = 50.0;
  p.kmax_macro = 1;
  const auto ca = cl::max_loading_clusters(s, layout, p);
  CHECK(ca.serving[0] == std::vector<int>{0});
  CHECK(ca.serving[1] == std::vector<int>{1});
  CHECK(ca.consistent());
}

TEST_CASE("zero load caps leave every cluster empty") {
  const StrengthTable s = table(2, 3, {-60.0, -61.0, -62.0, -70.0, -65.0, -64.0});
  NetworkLayout layout = stub_layout(1, 1);
  cl::ClusterPolicy p;
  p.eta1_db = 50.0;
  p.kmax_macro = 0;
  p.kmax_pico = 0;
  const auto ca = cl::max_loading_clusters(s, layout, p);
  for (const auto& sv : ca.serving) CHECK(sv.empty());
}

TEST_CASE("max-loading respects caps and candidate membership") {
  Rng rng_vals(0, RngPurpose::generic);
  std::vector<double> vals(6 * 20);
  for (auto& v : vals) v = -60.0 - 40.0 * rng_vals.uniform01();
  const StrengthTable s = table(6, 20, vals);
  NetworkLayout layout = stub_layout(2, 4);
  cl::ClusterPolicy p;
  p.eta1_db = 18.0;
  p.kmax_macro = 5;
  p.kmax_pico = 2;
  const auto ca = cl::max_loading_clusters(s, layout, p);
  CHECK(ca.consistent());
  for (int l = 0; l < 6; ++l) {
    const int cap = layout.base_stations[l].tier == Tier::macro ? 5 : 2;
    CHECK(static_cast<int>(ca.served[l].size()) <= cap);
  }
  for (int k = 0; k < 20; ++k) {
    const auto cand = cl::candidate_cluster(k, s, p.eta1_db);
    for (int l : ca.serving[k]) {
      CHECK(std::find(cand.begin(), cand.end(), l) != cand.end());
    }
  }
}

TEST_CASE("biased clusters reduce to the unbiased gap rule at zero bias") {
  Rng rng_vals(1, RngPurpose::generic);
  std::vector<double> vals(4 * 10);
  for (auto& v : vals) v = -60.0 - 45.0 * rng_vals.uniform01();
  const StrengthTable s = table(4, 10, vals);
  NetworkLayout layout = stub_layout(1, 3);
  cl::ClusterPolicy p;
  p.eta2_db = 11.0;
  p.bias_macro_db = 0.0;
  p.bias_pico_db = 0.0;
  const auto ca = cl::biased_clusters(s, layout, p);
  for (int k = 0; k < 10; ++k) {
    CHECK(ca.serving[k] == cl::candidate_cluster(k, s, 11.0));
    CHECK(!ca.serving[k].empty());
  }
}

TEST_CASE("pico bias flips the strongest BS and widens pico membership") {
  // macro at -80 dBm, pico at -85 dBm; +6 dB pico bias makes the pico win
  const StrengthTable s = table(2, 1, {-80.0, -85.0});
  NetworkLayout layout = stub_layout(1, 1);
  cl::ClusterPolicy p;
  p.eta2_db = 12.0;
  p.bias_pico_db = 6.0;
  const auto ca = cl::biased_clusters(s, layout, p);
  CHECK(ca.serving[0] == std::vector<int>{0, 1});  // biased gap 1 dB <= 12

  p.eta2_db = 0.5;
  const auto tight = cl::biased_clusters(s, layout, p);
  CHECK(tight.serving[0] == std::vector<int>{1});  // only the biased-strongest
}

TEST_CASE("strongest-S baselines are singletons at S=1 and nested in S") {
  Rng rng_vals(2, RngPurpose::generic);
  std::vector<double> vals(5 * 8);
  for (auto& v : vals) v = -60.0 - 45.0 * rng_vals.uniform01();
  const StrengthTable s = table(5, 8, vals);
  NetworkLayout layout = stub_layout(2, 3);
  cl::ClusterPolicy p;
  p.kind = cl::PolicyKind::strongest_s;
  p.strongest_s = 1;
  const auto s1 = cl::baseline_clusters(s, layout, p);
  p.strongest_s = 2;
  const auto s2 = cl::baseline_clusters(s, layout, p);
  for (int k = 0; k < 8; ++k) {
    CHECK(s1.serving[k].size() == 1);
    for (int l : s1.serving[k]) {
      CHECK(std::find(s2.serving[k].begin(), s2.serving[k].end(), l) !=
            s2.serving[k].end());
    }
  }
  p.strongest_s = 99;
  CHECK_THROWS_AS(cl::baseline_clusters(s, layout, p), std::invalid_argument);
}

TEST_CASE("disjoint baseline serves each user by its own cell's four BSs") {
  NetworkConfig c;
  c.num_cells = 7;
  c.users_per_cell = 4;
  c.candidate_limit = 5;
  c.rng_seed = 77;
  const NetworkLayout layout = build_layout(c);
  const auto gains = sample_large_scale(layout, 77);
  const auto s = strength_table(layout, gains);
  cl::ClusterPolicy p;
  p.kind = cl::PolicyKind::disjoint_cell;
  const auto ca = cl::baseline_clusters(s, layout, p);
  for (int k = 0; k < layout.num_users(); ++k) {
    CHECK(ca.serving[k].size() == 4);
    for (int l : ca.serving[k]) {
      CHECK(layout.base_stations[l].cell == layout.users[k].cell);
    }
  }
}

TEST_CASE("assignment transpose consistency is detected") {
  auto ca = wmmse::ClusterAssignment::from_serving({{0, 1}, {1}}, 2);
  CHECK(ca.consistent());
  ca.served[0].clear();
  CHECK(!ca.consistent());
}
