#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "cransim/qcqp.hpp"
#include "cransim/rng.hpp"

using namespace cransim;
namespace q = cransim::qcqp;

// ---------------------------------------------------------------------------
// Brute-force oracle: dense grid ascent on the dual function, built on plain
// Gaussian elimination so it shares nothing with the production solver path.
// ---------------------------------------------------------------------------
#include "support/dual_grid_oracle.hpp"

// ---------------------------------------------------------------------------
// instance generator
// ---------------------------------------------------------------------------
namespace {

q::QcqpSubproblem random_instance(Rng& rng, bool per_cluster, bool with_backhaul) {
  q::QcqpSubproblem p;
  const int L = 1 + int(rng.next_u64() % 2);
  const int m = 1 + int(rng.next_u64() % 2);
  const int k_users = 1 + int(rng.next_u64() % 3);
  p.coupling = per_cluster ? q::Coupling::per_cluster : q::Coupling::per_link;
  p.blocks.total = 0;
  for (int l = 0; l < L; ++l) {
    p.blocks.offset.push_back(p.blocks.total);
    p.blocks.width.push_back(m);
    p.blocks.total += m;
  }
  const int mt = p.blocks.total;
  p.a = CMatrix(mt, mt);
  const int rank = 1 + int(rng.next_u64() % (k_users + 2));
  for (int r = 0; r < rank; ++r) {
    CVector v(mt);
    for (auto& x : v) x = cd(rng.normal(), rng.normal());
    rank1_update(p.a, cd(0.2 + 1.8 * rng.uniform01(), 0.0), v, v);
  }
  for (int l = 0; l < L; ++l) {
    p.power_budget.push_back(0.3 + 2.7 * rng.uniform01());
    p.backhaul_budget.push_back(with_backhaul ? 0.2 + 4.8 * rng.uniform01() : kInf);
  }
  for (int u = 0; u < k_users; ++u) {
    q::QcqpSubproblem::User pu;
    pu.user_id = u;
    for (int l = 0; l < L; ++l) {
      if (L == 1 || rng.uniform01() < 0.8) pu.support.push_back(l);
    }
    if (pu.support.empty()) pu.support.push_back(int(rng.next_u64() % L));
    const double bscale = 0.5 + 4.5 * rng.uniform01();
    pu.b.resize(p.support_dim(pu));
    for (auto& x : pu.b) x = bscale * cd(rng.normal(), rng.normal());
    if (per_cluster) {
      pu.bh_coeff = {rng.uniform01() < 0.15 ? 0.0 : 0.2 + 2.8 * rng.uniform01()};
    } else {
      for (std::size_t j = 0; j < pu.support.size(); ++j) {
        pu.bh_coeff.push_back(rng.uniform01() < 0.15 ? 0.0
                                                     : 0.2 + 2.8 * rng.uniform01());
      }
    }
    p.users.push_back(std::move(pu));
  }
  return p;
}

void check_against_oracle(const q::QcqpSubproblem& p, double rel_tol) {
  q::SolveOptions opts;
  const q::Solution sol = q::solve(p, opts);

  const double g_star = oracle::best_dual_value(p);
  // solver objective is an upper bound on f* >= grid dual value
  CHECK(sol.objective >= g_star - rel_tol * (1.0 + std::abs(g_star)));
  CHECK(sol.objective - g_star <= rel_tol * (1.0 + std::abs(g_star)));

  CHECK(sol.max_violation_rel <= 1e-6);
  // spec-form complementary slackness: dual * |slack| <= tol * budget
  const std::vector<double> usage = q::usage_of(p, sol.w);
  const int L = p.num_bs();
  for (int l = 0; l < L; ++l) {
    if (std::isfinite(p.power_budget[l])) {
      CHECK(sol.duals.mu[l] >= 0.0);
      CHECK(sol.duals.mu[l] * std::abs(p.power_budget[l] - usage[l]) <=
            1e-6 * p.power_budget[l] + 1e-12);
    }
    if (std::isfinite(p.backhaul_budget[l])) {
      CHECK(sol.duals.lambda[l] >= 0.0);
      CHECK(sol.duals.lambda[l] * std::abs(p.backhaul_budget[l] - usage[L + l]) <=
            1e-6 * p.backhaul_budget[l] + 1e-12);
    }
  }
}

}  // namespace

TEST_CASE("inactive constraints leave the unconstrained optimum untouched") {
  q::QcqpSubproblem p;
  p.blocks = {{0}, {2}, 2};
  p.a = CMatrix(2, 2);
  p.a(0, 0) = 2.0;
  p.a(1, 1) = 3.0;
  p.power_budget = {100.0};
  p.backhaul_budget = {kInf};
  q::QcqpSubproblem::User u;
  u.user_id = 0;
  u.support = {0};
  u.b = {cd(1.0, 0.5), cd(-0.25, 0.0)};
  u.bh_coeff = {1.0};
  p.users.push_back(u);

  const q::Solution sol = q::solve(p, {});
  CHECK(sol.status == "converged");
  CHECK(sol.duals.mu[0] == 0.0);
  CHECK(std::abs(sol.w[0][0] - cd(0.5, 0.25)) < 1e-9);
  CHECK(std::abs(sol.w[0][1] - cd(-0.25 / 3.0, 0.0)) < 1e-9);
}

TEST_CASE("scalar instance with a tight power cap matches the KKT closed form") {
  q::QcqpSubproblem p;
  p.blocks = {{0}, {1}, 1};
  p.a = CMatrix(1, 1);
  p.a(0, 0) = 0.7;
  p.power_budget = {0.9};
  p.backhaul_budget = {kInf};
  q::QcqpSubproblem::User u;
  u.user_id = 0;
  u.support = {0};
  u.b = {cd(3.0, -4.0)};  // |b| = 5, unconstrained |w| = 5/0.7 >> sqrt(0.9)
  u.bh_coeff = {0.0};
  p.users.push_back(u);

  const q::Solution sol = q::solve(p, {});
  const double pw = std::norm(sol.w[0][0]);
  CHECK(std::abs(pw - 0.9) <= 1e-6 * 0.9);
  // w = b / (a + mu) with the phase of b
  const cd expect = std::sqrt(0.9) * (u.b[0] / std::abs(u.b[0]));
  CHECK(std::abs(sol.w[0][0] - expect) < 1e-5);
  const double mu = sol.duals.mu[0];
  CHECK(std::abs(std::abs(u.b[0]) / (0.7 + mu) - std::sqrt(0.9)) < 1e-5);
}

TEST_CASE("scalar instance with a tight weighted cap matches hand algebra") {
  // min a|w|^2 - 2Re(conj(b) w) s.t. |w|^2 <= P, c|w|^2 <= C
  q::QcqpSubproblem p;
  p.blocks = {{0}, {1}, 1};
  p.a = CMatrix(1, 1);
  p.a(0, 0) = 1.1;
  p.power_budget = {4.0};
  p.backhaul_budget = {1.2};
  q::QcqpSubproblem::User u;
  u.user_id = 0;
  u.support = {0};
  u.b = {cd(0.0, 6.0)};
  u.bh_coeff = {2.0};  // weighted cap binds at |w|^2 = 0.6 < 4.0
  p.users.push_back(u);

  const q::Solution sol = q::solve(p, {});
  CHECK(std::abs(std::norm(sol.w[0][0]) - 0.6) <= 1e-6 * 0.6 + 1e-12);
  CHECK(sol.duals.mu[0] <= 1e-8);
  // KKT: w = b / (a + lambda * c)
  const double lam = sol.duals.lambda[0];
  CHECK(std::abs(6.0 / (1.1 + 2.0 * lam) - std::sqrt(0.6)) < 1e-5);
}

TEST_CASE("random per-link instances agree with the dual-grid oracle") {
  Rng rng(2024, RngPurpose::generic);
  for (int i = 0; i < 80; ++i) {
    const q::QcqpSubproblem p = random_instance(rng, false, true);
    CAPTURE(i);
    check_against_oracle(p, 1e-4);
  }
}

TEST_CASE("random cluster-coupled instances agree with the dual-grid oracle") {
  Rng rng(4048, RngPurpose::generic);
  for (int i = 0; i < 40; ++i) {
    const q::QcqpSubproblem p = random_instance(rng, true, true);
    CAPTURE(i);
    check_against_oracle(p, 1e-4);
  }
}

TEST_CASE("power-only instances agree with the dual-grid oracle") {
  Rng rng(77, RngPurpose::generic);
  for (int i = 0; i < 30; ++i) {
    const q::QcqpSubproblem p = random_instance(rng, false, false);
    CAPTURE(i);
    check_against_oracle(p, 1e-4);
  }
}

TEST_CASE("primal_from_duals: zero linear term gives zero beamformer") {
  Rng rng(9, RngPurpose::generic);
  q::QcqpSubproblem p = random_instance(rng, false, true);
  for (auto& u : p.users) {
    std::fill(u.b.begin(), u.b.end(), cd{});
  }
  q::DualVariables d;
  d.mu.assign(p.num_bs(), 0.1);
  d.lambda.assign(p.num_bs(), 0.2);
  const auto w = q::primal_from_duals(p, d);
  for (const auto& wk : w) {
    for (const cd& v : wk) CHECK(v == cd{});
  }
}

TEST_CASE("primal_from_duals matches the scalar stationarity formula") {
  q::QcqpSubproblem p;
  p.blocks = {{0}, {1}, 1};
  p.a = CMatrix(1, 1);
  p.a(0, 0) = 0.9;
  p.power_budget = {1.0};
  p.backhaul_budget = {2.0};
  q::QcqpSubproblem::User u;
  u.user_id = 0;
  u.support = {0};
  u.b = {cd(1.0, 2.0)};
  u.bh_coeff = {1.5};
  p.users.push_back(u);
  q::DualVariables d;
  d.mu = {0.4};
  d.lambda = {0.3};
  const auto w = q::primal_from_duals(p, d);
  const cd expect = u.b[0] / (0.9 + 0.4 + 0.3 * 1.5);
  CHECK(std::abs(w[0][0] - expect) < 1e-12);
}

TEST_CASE("block power is non-increasing in that block's power dual") {
  Rng rng(123, RngPurpose::generic);
  for (int rep = 0; rep < 30; ++rep) {
    q::QcqpSubproblem p = random_instance(rng, false, true);
    const int L = p.num_bs();
    q::DualVariables d;
    d.mu.assign(L, 0.05);
    d.lambda.assign(L, 0.05);
    const int sweep_bs = int(rng.next_u64() % L);
    double prev_block = kInf;
    for (double mu = 0.0; mu <= 12.0; mu += 0.4) {
      d.mu[sweep_bs] = mu;
      const auto w = q::primal_from_duals(p, d);
      double block = 0.0;
      for (std::size_t i = 0; i < p.users.size(); ++i) {
        int off = 0;
        for (std::size_t j = 0; j < p.users[i].support.size(); ++j) {
          const int l = p.users[i].support[j];
          const double bp = kern::sqnorm(p.blocks.width[l], w[i].data() + off);
          if (l == sweep_bs) block += bp;
          off += p.blocks.width[l];
        }
      }
      // raising a BS's power price never raises that BS's transmit power;
      // the aggregate norm can grow (cross-coupling), so only the swept
      // block is asserted
      CHECK(block <= prev_block * (1.0 + 1e-9) + 1e-15);
      prev_block = block;
    }
  }
}

TEST_CASE("assemble builds the single-user outer-product data") {
  const int n = 2, mt = 3;
  ChannelRealization ch;
  ch.num_users = 1;
  ch.rx_antennas = n;
  ch.total_antennas = mt;
  ch.h.resize(std::size_t(n) * mt);
  Rng rng(5, RngPurpose::generic);
  for (auto& v : ch.h) v = cd(rng.normal(), rng.normal());

  q::BlockMap blocks{{0, 2}, {2, 1}, 3};
  std::vector<double> alpha = {1.0}, rho = {1.0};
  std::vector<cd> u = {cd(0.3, -0.7), cd(1.1, 0.2)};
  std::vector<std::vector<int>> supports = {{0, 1}};
  std::vector<std::vector<double>> link_coeff = {{0.5, 0.25}};
  std::vector<char> active = {1};

  q::AssembleInput in;
  in.channel = &ch;
  in.alpha = alpha;
  in.rho = rho;
  in.receivers = u;
  in.supports = supports;
  in.active = &active;
  in.coupling = q::Coupling::per_link;
  in.link_coeff = link_coeff;
  std::vector<double> pb = {1.0, 1.0};
  std::vector<double> cb = {kInf, kInf};
  in.power_budget = pb;
  in.backhaul_budget = cb;

  const q::QcqpSubproblem p = q::assemble(in, blocks);

  // hu = H^H u
  CVector hu(mt);
  for (int c2 = 0; c2 < mt; ++c2) {
    cd acc{};
    for (int r = 0; r < n; ++r) acc += std::conj(ch.at(0, r, c2)) * u[r];
    hu[c2] = acc;
  }
  for (int i = 0; i < mt; ++i) {
    CHECK(std::abs(p.users[0].b[i] - hu[i]) < 1e-12);
    for (int j = 0; j < mt; ++j) {
      CHECK(std::abs(p.a(i, j) - hu[i] * std::conj(hu[j])) < 1e-12);
      CHECK(std::abs(p.a(i, j) - std::conj(p.a(j, i))) < 1e-12);
    }
  }
}

TEST_CASE("cluster-restricted assembly with full clusters equals the dynamic one") {
  const int n = 2, mt = 4, K = 2;
  ChannelRealization ch;
  ch.num_users = K;
  ch.rx_antennas = n;
  ch.total_antennas = mt;
  ch.h.resize(std::size_t(K) * n * mt);
  Rng rng(8, RngPurpose::generic);
  for (auto& v : ch.h) v = cd(rng.normal(), rng.normal());

  q::BlockMap blocks{{0, 2}, {2, 2}, 4};
  std::vector<double> alpha = {1.0, 0.7}, rho = {2.0, 1.3};
  std::vector<cd> u(std::size_t(K) * n);
  for (auto& v : u) v = cd(rng.normal(), rng.normal());
  std::vector<std::vector<int>> supports = {{0, 1}, {0, 1}};
  std::vector<char> active = {1, 1};
  std::vector<double> pb = {1.0, 1.0}, cb = {5.0, 5.0};

  q::AssembleInput in;
  in.channel = &ch;
  in.alpha = alpha;
  in.rho = rho;
  in.receivers = u;
  in.supports = supports;
  in.active = &active;
  in.power_budget = pb;
  in.backhaul_budget = cb;

  in.coupling = q::Coupling::per_link;
  std::vector<std::vector<double>> link_coeff = {{1.0, 1.0}, {1.0, 1.0}};
  in.link_coeff = link_coeff;
  const q::QcqpSubproblem pd = q::assemble(in, blocks);

  in.coupling = q::Coupling::per_cluster;
  std::vector<double> cluster_coeff = {1.0, 1.0};
  in.cluster_coeff = cluster_coeff;
  const q::QcqpSubproblem ps = q::assemble(in, blocks);

  for (int i = 0; i < mt; ++i) {
    for (int j = 0; j < mt; ++j) {
      CHECK(std::abs(pd.a(i, j) - ps.a(i, j)) < 1e-13);
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < mt; ++i) {
      CHECK(std::abs(pd.users[k].b[i] - ps.users[k].b[i]) < 1e-13);
    }
  }
}

TEST_CASE("problem dump round-trips through the text format") {
  Rng rng(55, RngPurpose::generic);
  const q::QcqpSubproblem p = random_instance(rng, false, true);
  std::stringstream ss;
  q::dump(p, ss);
  const q::QcqpSubproblem r = q::parse_dump(ss);
  REQUIRE(r.users.size() == p.users.size());
  CHECK(r.coupling == p.coupling);
  CHECK(r.power_budget == p.power_budget);
  CHECK(r.backhaul_budget == p.backhaul_budget);
  for (int i = 0; i < p.a.rows(); ++i) {
    for (int j = 0; j < p.a.cols(); ++j) {
      CHECK(std::abs(r.a(i, j) - p.a(i, j)) == 0.0);
    }
  }
  for (std::size_t k2 = 0; k2 < p.users.size(); ++k2) {
    CHECK(r.users[k2].support == p.users[k2].support);
    CHECK(r.users[k2].bh_coeff == p.users[k2].bh_coeff);
    for (std::size_t i = 0; i < p.users[k2].b.size(); ++i) {
      CHECK(std::abs(r.users[k2].b[i] - p.users[k2].b[i]) == 0.0);
    }
  }
}

TEST_CASE("jointly scaling the quadratic and linear terms leaves w unchanged") {
  Rng rng(66, RngPurpose::generic);
  for (int rep = 0; rep < 10; ++rep) {
    q::QcqpSubproblem p = random_instance(rng, false, true);
    const q::Solution s1 = q::solve(p, {});
    q::QcqpSubproblem p2 = p;
    const double t = 3.7;
    for (int i = 0; i < p2.a.rows(); ++i) {
      for (int j = 0; j < p2.a.cols(); ++j) p2.a(i, j) *= t;
    }
    for (auto& u : p2.users) {
      for (auto& v : u.b) v *= t;
    }
    const q::Solution s2 = q::solve(p2, {});
    for (std::size_t i = 0; i < s1.w.size(); ++i) {
      for (std::size_t j = 0; j < s1.w[i].size(); ++j) {
        CHECK(std::abs(s1.w[i][j] - s2.w[i][j]) <
              1e-4 * (1.0 + std::abs(s1.w[i][j])));
      }
    }
  }
}

TEST_CASE("dual value along the iterate path is windowed-max nondecreasing") {
  Rng rng(88, RngPurpose::generic);
  for (int rep = 0; rep < 10; ++rep) {
    const q::QcqpSubproblem p = random_instance(rng, false, true);
    std::vector<double> trace;
    q::SolveOptions opts;
    opts.dual_value_trace = &trace;
    q::solve(p, opts);
    REQUIRE(!trace.empty());
    const int window = 20;
    double prev_max = -kInf;
    for (std::size_t i = 0; i + window < trace.size(); i += window) {
      double wmax = -kInf;
      for (int j = 0; j < window; ++j) wmax = std::max(wmax, trace[i + j]);
      CHECK(wmax >= prev_max - 1e-7 * (1.0 + std::abs(prev_max)));
      prev_max = std::max(prev_max, wmax);
    }
  }
}

TEST_CASE("zero budgets force the coupled blocks to zero") {
  q::QcqpSubproblem p;
  p.blocks = {{0, 1}, {1, 1}, 2};
  p.a = CMatrix(2, 2);
  p.a(0, 0) = 1.0;
  p.a(1, 1) = 1.0;
  p.power_budget = {1.0, 0.0};  // BS 1 powered off
  p.backhaul_budget = {0.0, kInf};  // BS 0 has no backhaul
  q::QcqpSubproblem::User u;
  u.user_id = 0;
  u.support = {0, 1};
  u.b = {cd(1.0, 0.0), cd(1.0, 0.0)};
  u.bh_coeff = {1.0, 1.0};
  p.users.push_back(u);
  const q::Solution sol = q::solve(p, {});
  CHECK(sol.w[0][0] == cd{});  // zero backhaul with positive coeff
  CHECK(sol.w[0][1] == cd{});  // zero power budget
  CHECK(sol.max_violation_rel <= 1e-9);
}
