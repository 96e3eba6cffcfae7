#include "cransim/qcqp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cransim::qcqp {

BlockMap BlockMap::from_layout(const NetworkLayout& layout) {
  BlockMap bm;
  for (const auto& bs : layout.base_stations) {
    bm.offset.push_back(bs.antenna_offset);
    bm.width.push_back(bs.antennas);
  }
  bm.total = layout.total_antennas;
  return bm;
}

int QcqpSubproblem::support_dim(const User& u) const {
  int d = 0;
  for (int l : u.support) d += blocks.width[l];
  return d;
}

namespace {

// Restriction of the global quadratic matrix to one user's support blocks.
CMatrix gather_restricted(const CMatrix& a, const BlockMap& blocks,
                          const std::vector<int>& support) {
  int dim = 0;
  for (int l : support) dim += blocks.width[l];
  CMatrix out(dim, dim);
  int ri = 0;
  for (int li : support) {
    for (int r = 0; r < blocks.width[li]; ++r, ++ri) {
      const cd* src = a.row(blocks.offset[li] + r);
      cd* dst = out.row(ri);
      int cj = 0;
      for (int lj : support) {
        for (int c = 0; c < blocks.width[lj]; ++c, ++cj) {
          dst[cj] = src[blocks.offset[lj] + c];
        }
      }
    }
  }
  return out;
}

struct Constraint {
  bool power = true;  // else backhaul
  int bs = 0;
  double budget = 0.0;
};

struct UserWork {
  int orig = -1;                 // index into p.users
  std::vector<int> support;      // effective support after preprocessing
  std::vector<int> orig_entry;   // index of each support entry in the
                                 // original support list
  std::vector<int> loc_off;      // local antenna offset per entry
  std::vector<int> width;        // antennas per entry
  std::vector<double> coeff;     // per_link backhaul coefficient per entry
  double cluster_coeff = 0.0;    // per_cluster coefficient
  int dim = 0;
  CMatrix a;                     // restricted base matrix
  CVector b;
  // per-evaluation workspace
  CMatrix factor;
  CVector w;
  CVector scratch;
};

struct DiagWeights {
  // nu-space diagonal addition per support entry
  std::vector<double> d;
};

class DualSolver {
 public:
  DualSolver(const QcqpSubproblem& p, const SolveOptions& opts)
      : p_(p), opts_(opts) {
    setup();
  }

  Solution run(const DualVariables* warm);

 private:
  void setup();
  void eval(bool keep_factors);
  double eval_dual_at(const std::vector<double>& theta);  // g only
  void compute_usages();
  bool termination_metrics(double* viol, double* cs, double* gap) const;
  double primal_objective(const std::vector<CVector>& w) const;
  std::vector<CVector> project_feasible(double* obj_out) const;
  bool newton_step();
  void subgrad_step(int t);
  Solution finalize();

  const QcqpSubproblem& p_;
  SolveOptions opts_;

  std::vector<Constraint> cons_;
  std::vector<int> pow_index_;  // per BS -> constraint index or -1
  std::vector<int> bh_index_;
  std::vector<UserWork> users_;

  std::vector<double> theta_;      // normalized duals, >= 0
  std::vector<double> usage_;      // physical usage per constraint
  std::vector<double> grad_;       // usage/budget - 1
  double g_ = 0.0;                 // dual value at theta_
  double g_best_ = -kInf;
  std::vector<double> theta_best_;
  double f_upper_ = kInf;          // best feasible primal objective
  std::vector<CVector> w_best_;    // best feasible primal (reduced stacking)
  int evals_ = 0;
  double obj_scale_ = 1.0;
};

void DualSolver::setup() {
  const int L = p_.num_bs();
  pow_index_.assign(L, -1);
  bh_index_.assign(L, -1);
  for (int l = 0; l < L; ++l) {
    const double pb = p_.power_budget[l];
    if (std::isfinite(pb) && pb > 0.0) {
      pow_index_[l] = static_cast<int>(cons_.size());
      cons_.push_back({true, l, pb});
    }
    const double cb = p_.backhaul_budget[l];
    if (std::isfinite(cb) && cb > 0.0) {
      bh_index_[l] = static_cast<int>(cons_.size());
      cons_.push_back({false, l, cb});
    }
  }

  for (std::size_t i = 0; i < p_.users.size(); ++i) {
    const auto& pu = p_.users[i];
    if (pu.support.empty()) continue;
    if (kern::sqnorm(pu.b.size(), pu.b.data()) == 0.0) continue;  // w = 0 exactly

    // zero-budget power cap removes the block; zero weighted cap removes the
    // block (per_link) or the whole user (per_cluster)
    bool drop_user = false;
    if (p_.coupling == Coupling::per_cluster && pu.bh_coeff.size() == 1 &&
        pu.bh_coeff[0] > 0.0) {
      for (int l : pu.support) {
        if (p_.backhaul_budget[l] == 0.0) drop_user = true;
      }
    }
    if (drop_user) continue;

    UserWork uw;
    uw.orig = static_cast<int>(i);
    int orig_off = 0;
    for (std::size_t j = 0; j < pu.support.size(); ++j) {
      const int l = pu.support[j];
      const int wdt = p_.blocks.width[l];
      const double link_c =
          p_.coupling == Coupling::per_link ? pu.bh_coeff[j] : 0.0;
      const bool forced_zero =
          p_.power_budget[l] == 0.0 ||
          (p_.coupling == Coupling::per_link && link_c > 0.0 &&
           p_.backhaul_budget[l] == 0.0);
      if (!forced_zero) {
        uw.support.push_back(l);
        uw.orig_entry.push_back(static_cast<int>(j));
        uw.loc_off.push_back(uw.dim);
        uw.width.push_back(wdt);
        uw.coeff.push_back(link_c);
        uw.dim += wdt;
      }
      orig_off += wdt;
    }
    if (uw.dim == 0) continue;
    uw.cluster_coeff = p_.coupling == Coupling::per_cluster ? pu.bh_coeff[0] : 0.0;

    uw.a = gather_restricted(p_.a, p_.blocks, uw.support);
    uw.b.resize(uw.dim);
    int src_off = 0;
    int dst = 0;
    for (std::size_t j = 0; j < pu.support.size(); ++j) {
      const int wdt = p_.blocks.width[pu.support[j]];
      const bool kept =
          std::find(uw.orig_entry.begin(), uw.orig_entry.end(),
                    static_cast<int>(j)) != uw.orig_entry.end();
      if (kept) {
        for (int c = 0; c < wdt; ++c) uw.b[dst++] = pu.b[src_off + c];
      }
      src_off += wdt;
    }
    uw.factor = CMatrix(uw.dim, uw.dim);
    uw.w.resize(uw.dim);
    uw.scratch.resize(uw.dim);
    users_.push_back(std::move(uw));
  }

  theta_.assign(cons_.size(), 0.0);
  usage_.assign(cons_.size(), 0.0);
  grad_.assign(cons_.size(), 0.0);
}

// Lagrangian minimizer at the current duals. Leaves the Cholesky factor and
// the per-user solution in the workspace for the Newton phase.
void DualSolver::eval(bool /*keep_factors*/) {
  ++evals_;
  double g = 0.0;
  for (auto& uw : users_) {
    double cluster_nu = 0.0;
    if (p_.coupling == Coupling::per_cluster) {
      for (int l : uw.support) {
        const int c = bh_index_[l];
        if (c >= 0) cluster_nu += theta_[c] / cons_[c].budget;
      }
    }
    auto build = [&](double ridge) {
      uw.factor = uw.a;
      for (std::size_t j = 0; j < uw.support.size(); ++j) {
        const int l = uw.support[j];
        double add = ridge;
        if (const int c = pow_index_[l]; c >= 0)
          add += theta_[c] / cons_[c].budget;
        if (p_.coupling == Coupling::per_link) {
          if (const int c = bh_index_[l]; c >= 0)
            add += (theta_[c] / cons_[c].budget) * uw.coeff[j];
        } else {
          add += cluster_nu * uw.cluster_coeff;
        }
        for (int r = 0; r < uw.width[j]; ++r) {
          uw.factor(uw.loc_off[j] + r, uw.loc_off[j] + r) += add;
        }
      }
    };
    double tr = 0.0;
    for (int i = 0; i < uw.dim; ++i) tr += uw.a(i, i).real();
    double ridge = 0.0;
    build(0.0);
    while (!cholesky_factor(uw.factor)) {
      ridge = ridge == 0.0 ? std::max(1e-12 * std::max(tr, 1.0e-30), 1e-300)
                           : ridge * 100.0;
      build(ridge);
    }
    cholesky_solve(uw.factor, uw.b, uw.w);
    g -= kern::cdotc(uw.dim, uw.b.data(), uw.w.data()).real();
  }
  for (std::size_t c = 0; c < cons_.size(); ++c) g -= theta_[c];
  g_ = g;
  compute_usages();
  if (opts_.dual_value_trace) opts_.dual_value_trace->push_back(g_);
  if (g_ > g_best_) {
    g_best_ = g_;
    theta_best_ = theta_;
  }
}

void DualSolver::compute_usages() {
  std::fill(usage_.begin(), usage_.end(), 0.0);
  for (const auto& uw : users_) {
    double cluster_pow = 0.0;
    for (std::size_t j = 0; j < uw.support.size(); ++j) {
      const double bp = kern::sqnorm(uw.width[j], uw.w.data() + uw.loc_off[j]);
      cluster_pow += bp;
      const int l = uw.support[j];
      if (const int c = pow_index_[l]; c >= 0) usage_[c] += bp;
      if (p_.coupling == Coupling::per_link) {
        if (const int c = bh_index_[l]; c >= 0) usage_[c] += uw.coeff[j] * bp;
      }
    }
    if (p_.coupling == Coupling::per_cluster) {
      for (int l : uw.support) {
        if (const int c = bh_index_[l]; c >= 0)
          usage_[c] += uw.cluster_coeff * cluster_pow;
      }
    }
  }
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    grad_[c] = usage_[c] / cons_[c].budget - 1.0;
  }
}

bool DualSolver::termination_metrics(double* viol, double* cs, double* gap) const {
  double v = 0.0, s = 0.0, gp = 0.0;
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    v = std::max(v, grad_[c]);
    const double slack_rel = -grad_[c];
    s = std::max(s, theta_[c] * std::abs(slack_rel) / cons_[c].budget);
    gp += theta_[c] * slack_rel;
  }
  *viol = v;
  *cs = s;
  *gap = std::abs(gp) / (1.0 + std::abs(g_));
  return v <= opts_.tol && s <= opts_.tol && *gap <= opts_.tol;
}

double DualSolver::primal_objective(const std::vector<CVector>& w) const {
  double f = 0.0;
  for (std::size_t i = 0; i < users_.size(); ++i) {
    const auto& uw = users_[i];
    f += quad_form(uw.a, w[i]);
    f -= 2.0 * kern::cdotc(uw.dim, uw.b.data(), w[i].data()).real();
  }
  return f;
}

// Uniform per-BS block downscaling until every cap holds.
std::vector<CVector> DualSolver::project_feasible(double* obj_out) const {
  std::vector<CVector> w;
  w.reserve(users_.size());
  for (const auto& uw : users_) w.push_back(uw.w);

  for (int pass = 0; pass < 40; ++pass) {
    std::vector<double> usage(cons_.size(), 0.0);
    for (std::size_t i = 0; i < users_.size(); ++i) {
      const auto& uw = users_[i];
      double cluster_pow = 0.0;
      for (std::size_t j = 0; j < uw.support.size(); ++j) {
        const double bp = kern::sqnorm(uw.width[j], w[i].data() + uw.loc_off[j]);
        cluster_pow += bp;
        const int l = uw.support[j];
        if (const int c = pow_index_[l]; c >= 0) usage[c] += bp;
        if (p_.coupling == Coupling::per_link) {
          if (const int c = bh_index_[l]; c >= 0) usage[c] += uw.coeff[j] * bp;
        }
      }
      if (p_.coupling == Coupling::per_cluster) {
        for (int l : uw.support) {
          if (const int c = bh_index_[l]; c >= 0)
            usage[c] += uw.cluster_coeff * cluster_pow;
        }
      }
    }
    bool any = false;
    for (std::size_t c = 0; c < cons_.size(); ++c) {
      if (usage[c] <= cons_[c].budget) continue;
      any = true;
      const double f = std::sqrt(cons_[c].budget / usage[c]) * (1.0 - 1e-13);
      const int bs = cons_[c].bs;
      for (std::size_t i = 0; i < users_.size(); ++i) {
        const auto& uw = users_[i];
        for (std::size_t j = 0; j < uw.support.size(); ++j) {
          if (uw.support[j] != bs) continue;
          const bool whole_cluster = !cons_[c].power &&
                                     p_.coupling == Coupling::per_cluster &&
                                     uw.cluster_coeff > 0.0;
          if (whole_cluster) {
            for (int t = 0; t < uw.dim; ++t) w[i][t] *= f;
          } else if (cons_[c].power ||
                     (p_.coupling == Coupling::per_link && uw.coeff[j] > 0.0)) {
            for (int t = 0; t < uw.width[j]; ++t) w[i][uw.loc_off[j] + t] *= f;
          }
        }
      }
    }
    if (!any) break;
  }
  if (obj_out) *obj_out = primal_objective(w);
  return w;
}

void DualSolver::subgrad_step(int t) {
  double gnorm2 = 0.0;
  for (double gc : grad_) gnorm2 += gc * gc;
  if (gnorm2 == 0.0) return;

  // diminishing schedule, bounded by the Polyak step whenever the feasible
  // primal value provides a valid target
  double step = obj_scale_ * 1.0 / std::sqrt(double(t));
  if (std::isfinite(f_upper_) && f_upper_ > g_) {
    step = std::min(step, (f_upper_ - g_) / gnorm2);
  }
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    theta_[c] = std::max(0.0, theta_[c] + step * grad_[c]);
  }
}

bool DualSolver::newton_step() {
  // free set: positive duals plus violated constraints
  std::vector<int> free;
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    if (theta_[c] > 0.0 || grad_[c] > 0.0) free.push_back(static_cast<int>(c));
  }
  if (free.empty()) return false;
  const int nf = static_cast<int>(free.size());
  std::vector<int> pos(cons_.size(), -1);
  for (int i = 0; i < nf; ++i) pos[free[i]] = i;

  // negative dual Hessian on the free set (real symmetric PSD)
  std::vector<double> h(std::size_t(nf) * nf, 0.0);
  auto add = [&](int ca, int cb, double v) {
    const int ia = pos[ca], ib = pos[cb];
    if (ia < 0 || ib < 0) return;
    h[std::size_t(ia) * nf + ib] += v;
    if (ia != ib) h[std::size_t(ib) * nf + ia] += v;
  };

  for (auto& uw : users_) {
    const int ns = static_cast<int>(uw.support.size());
    // z_j = M^{-1} (mask_j .* w), using the factor kept by eval()
    std::vector<CVector> z(ns);
    for (int j = 0; j < ns; ++j) {
      CVector v(uw.dim, cd{});
      for (int t = 0; t < uw.width[j]; ++t)
        v[uw.loc_off[j] + t] = uw.w[uw.loc_off[j] + t];
      z[j].resize(uw.dim);
      cholesky_solve(uw.factor, v, z[j]);
    }
    // E[j1][j2] = Re((mask_j1 .* w)^H z_j2)
    std::vector<double> e(std::size_t(ns) * ns);
    for (int j1 = 0; j1 < ns; ++j1) {
      for (int j2 = 0; j2 < ns; ++j2) {
        e[std::size_t(j1) * ns + j2] =
            kern::cdotc(uw.width[j1], uw.w.data() + uw.loc_off[j1],
                        z[j2].data() + uw.loc_off[j1])
                .real();
      }
    }
    CVector zc;
    double gq = 0.0;
    std::vector<double> fv(ns, 0.0);
    if (p_.coupling == Coupling::per_cluster && uw.cluster_coeff > 0.0) {
      CVector v(uw.dim);
      for (int t = 0; t < uw.dim; ++t) v[t] = uw.cluster_coeff * uw.w[t];
      zc.resize(uw.dim);
      cholesky_solve(uw.factor, v, zc);
      gq = uw.cluster_coeff * kern::cdotc(uw.dim, uw.w.data(), zc.data()).real();
      for (int j = 0; j < ns; ++j) {
        fv[j] = kern::cdotc(uw.width[j], uw.w.data() + uw.loc_off[j],
                            zc.data() + uw.loc_off[j])
                    .real();
      }
    }

    for (int j1 = 0; j1 < ns; ++j1) {
      const int l1 = uw.support[j1];
      const int cp1 = pow_index_[l1];
      const int cb1 = bh_index_[l1];
      for (int j2 = j1; j2 < ns; ++j2) {
        const int l2 = uw.support[j2];
        const int cp2 = pow_index_[l2];
        const int cb2 = bh_index_[l2];
        const double ev = e[std::size_t(j1) * ns + j2];
        if (cp1 >= 0 && cp2 >= 0) {
          add(cp1, cp2, 2.0 * ev / (cons_[cp1].budget * cons_[cp2].budget));
        }
        if (p_.coupling == Coupling::per_link) {
          if (cp1 >= 0 && cb2 >= 0)
            add(cp1, cb2,
                2.0 * uw.coeff[j2] * ev / (cons_[cp1].budget * cons_[cb2].budget));
          if (cb1 >= 0 && cp2 >= 0 && j1 != j2)
            add(cb1, cp2,
                2.0 * uw.coeff[j1] * ev / (cons_[cb1].budget * cons_[cp2].budget));
          if (cb1 >= 0 && cb2 >= 0)
            add(cb1, cb2,
                2.0 * uw.coeff[j1] * uw.coeff[j2] * ev /
                    (cons_[cb1].budget * cons_[cb2].budget));
        }
      }
      if (p_.coupling == Coupling::per_cluster && uw.cluster_coeff > 0.0) {
        // power row vs every cluster-coupled backhaul column
        for (int j2 = 0; j2 < ns; ++j2) {
          const int cb = bh_index_[uw.support[j2]];
          if (cp1 >= 0 && cb >= 0)
            add(cp1, cb, 2.0 * fv[j1] / (cons_[cp1].budget * cons_[cb].budget));
        }
      }
    }
    if (p_.coupling == Coupling::per_cluster && uw.cluster_coeff > 0.0) {
      for (int j1 = 0; j1 < ns; ++j1) {
        const int cb1 = bh_index_[uw.support[j1]];
        if (cb1 < 0) continue;
        for (int j2 = j1; j2 < ns; ++j2) {
          const int cb2 = bh_index_[uw.support[j2]];
          if (cb2 < 0) continue;
          add(cb1, cb2, 2.0 * gq / (cons_[cb1].budget * cons_[cb2].budget));
        }
      }
    }
  }

  // solve (-H + ridge) delta = grad on the free set
  double dmax = 0.0;
  for (int i = 0; i < nf; ++i) dmax = std::max(dmax, h[std::size_t(i) * nf + i]);
  const double ridge = std::max(1e-11 * dmax, 1e-300);
  CMatrix hs(nf, nf);
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j < nf; ++j) hs(i, j) = h[std::size_t(i) * nf + j];
    hs(i, i) += ridge;
  }
  CVector rhs(nf), delta(nf);
  for (int i = 0; i < nf; ++i) rhs[i] = grad_[free[i]];
  try {
    hermitian_solve(hs, rhs, delta);
  } catch (const std::exception&) {
    return false;
  }

  // proportional constraint rows make the Hessian singular along directions
  // where g is piecewise linear; cap the step so clamping stays reachable by
  // the backtracking search
  double cap = 0.0;
  for (int i = 0; i < nf; ++i) {
    cap = std::max(cap, std::abs(delta[i].real()) /
                            (10.0 * (1.0 + theta_[free[i]])));
  }
  if (cap > 1.0) {
    for (int i = 0; i < nf; ++i) delta[i] /= cap;
  }

  const std::vector<double> theta0 = theta_;
  const double g0 = g_;
  double t = 1.0;
  for (int ls = 0; ls < 60 && evals_ < opts_.max_iters; ++ls, t *= 0.5) {
    for (int i = 0; i < nf; ++i) {
      theta_[free[i]] = std::max(0.0, theta0[free[i]] + t * delta[i].real());
    }
    eval(true);
    if (g_ > g0 + 1e-15 * (1.0 + std::abs(g0))) return true;
    if (g_ >= g0 - 1e-13 * (1.0 + std::abs(g0)) && ls == 0) return true;
  }
  theta_ = theta0;
  eval(true);
  return false;
}

Solution DualSolver::finalize() {
  Solution sol;
  const int L = p_.num_bs();
  sol.duals.mu.assign(L, 0.0);
  sol.duals.lambda.assign(L, 0.0);
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    const double nu = theta_[c] / cons_[c].budget;
    if (cons_[c].power) {
      sol.duals.mu[cons_[c].bs] = nu;
    } else {
      sol.duals.lambda[cons_[c].bs] = nu;
    }
  }

  double obj = 0.0;
  std::vector<CVector> w = project_feasible(&obj);
  if (!w_best_.empty() && f_upper_ < obj) {
    w = w_best_;
    obj = f_upper_;
  }

  double viol, cs, gap;
  const bool dual_ok = termination_metrics(&viol, &cs, &gap);

  // primal-side metrics of the beamformers actually returned
  std::vector<double> usage(cons_.size(), 0.0);
  for (std::size_t i = 0; i < users_.size(); ++i) {
    const auto& uw = users_[i];
    double cluster_pow = 0.0;
    for (std::size_t j = 0; j < uw.support.size(); ++j) {
      const double bp = kern::sqnorm(uw.width[j], w[i].data() + uw.loc_off[j]);
      cluster_pow += bp;
      if (const int c = pow_index_[uw.support[j]]; c >= 0) usage[c] += bp;
      if (p_.coupling == Coupling::per_link) {
        if (const int c = bh_index_[uw.support[j]]; c >= 0)
          usage[c] += uw.coeff[j] * bp;
      }
    }
    if (p_.coupling == Coupling::per_cluster) {
      for (int l : uw.support) {
        if (const int c = bh_index_[l]; c >= 0)
          usage[c] += uw.cluster_coeff * cluster_pow;
      }
    }
  }
  double viol_ret = 0.0, cs_ret = 0.0;
  for (std::size_t c = 0; c < cons_.size(); ++c) {
    viol_ret = std::max(viol_ret, (usage[c] - cons_[c].budget) / cons_[c].budget);
    cs_ret = std::max(cs_ret, theta_[c] * std::abs(cons_[c].budget - usage[c]) /
                                  (cons_[c].budget * cons_[c].budget));
  }

  sol.status = dual_ok && viol_ret <= opts_.tol && cs_ret <= opts_.tol
                   ? "converged"
                   : "inexact";
  sol.objective = obj;
  sol.dual_value = g_;
  sol.max_violation_rel = std::max(0.0, viol_ret);
  sol.max_compl_slack_rel = cs_ret;
  sol.iterations = evals_;

  // scatter back into the original support stacking (zeros where removed)
  sol.w.resize(p_.users.size());
  for (std::size_t i = 0; i < p_.users.size(); ++i) {
    sol.w[i].assign(p_.support_dim(p_.users[i]), cd{});
  }
  for (std::size_t i = 0; i < users_.size(); ++i) {
    const auto& uw = users_[i];
    const auto& pu = p_.users[uw.orig];
    std::vector<int> orig_off(pu.support.size(), 0);
    int acc = 0;
    for (std::size_t j = 0; j < pu.support.size(); ++j) {
      orig_off[j] = acc;
      acc += p_.blocks.width[pu.support[j]];
    }
    for (std::size_t j = 0; j < uw.support.size(); ++j) {
      const int oj = uw.orig_entry[j];
      for (int t = 0; t < uw.width[j]; ++t) {
        sol.w[uw.orig][orig_off[oj] + t] = w[i][uw.loc_off[j] + t];
      }
    }
  }
  return sol;
}

Solution DualSolver::run(const DualVariables* warm) {
  if (warm && !warm->mu.empty()) {
    for (std::size_t c = 0; c < cons_.size(); ++c) {
      const double nu = cons_[c].power ? warm->mu[cons_[c].bs]
                                       : warm->lambda[cons_[c].bs];
      theta_[c] = std::max(0.0, nu) * cons_[c].budget;
    }
  }

  eval(false);
  {
    double fobj;
    w_best_ = project_feasible(&fobj);
    f_upper_ = fobj;
  }
  obj_scale_ = std::max(1e-12, std::abs(f_upper_));

  double viol, cs, gap;
  if (termination_metrics(&viol, &cs, &gap)) return finalize();

  for (int t = 1; evals_ < opts_.max_iters; ++t) {
    if (opts_.newton_polish &&
        (t > opts_.subgrad_iters || (t > 10 && viol < 0.05))) {
      break;
    }
    subgrad_step(t);
    eval(false);
    if (termination_metrics(&viol, &cs, &gap)) return finalize();
    double fobj;
    auto cand = project_feasible(&fobj);
    if (fobj < f_upper_) {
      f_upper_ = fobj;
      w_best_ = std::move(cand);
    }
  }

  if (opts_.newton_polish) {
    // restart from the best dual point seen so far
    if (!theta_best_.empty()) {
      theta_ = theta_best_;
    }
    eval(true);
    int failures = 0;
    while (evals_ < opts_.max_iters) {
      if (termination_metrics(&viol, &cs, &gap)) break;
      if (newton_step()) {
        failures = 0;
      } else if (++failures > 6) {
        break;
      } else {
        for (int s = 0; s < 10 && evals_ < opts_.max_iters; ++s) {
          subgrad_step(100 + evals_);
          eval(true);
        }
      }
      double fobj;
      auto cand = project_feasible(&fobj);
      if (fobj < f_upper_) {
        f_upper_ = fobj;
        w_best_ = std::move(cand);
      }
    }
  }
  return finalize();
}

}  // namespace

std::vector<CVector> primal_from_duals(const QcqpSubproblem& p,
                                       const DualVariables& duals) {
  std::vector<CVector> out(p.users.size());
  for (std::size_t i = 0; i < p.users.size(); ++i) {
    const auto& pu = p.users[i];
    const int dim = p.support_dim(pu);
    out[i].assign(dim, cd{});
    if (dim == 0) continue;
    if (kern::sqnorm(pu.b.size(), pu.b.data()) == 0.0) continue;

    CMatrix m = gather_restricted(p.a, p.blocks, pu.support);
    double cluster_lam = 0.0;
    if (p.coupling == Coupling::per_cluster) {
      for (int l : pu.support) cluster_lam += duals.lambda[l];
    }
    int off = 0;
    for (std::size_t j = 0; j < pu.support.size(); ++j) {
      const int l = pu.support[j];
      double add = duals.mu[l];
      if (p.coupling == Coupling::per_link) {
        add += duals.lambda[l] * pu.bh_coeff[j];
      } else {
        add += cluster_lam * pu.bh_coeff[0];
      }
      for (int t = 0; t < p.blocks.width[l]; ++t) m(off + t, off + t) += add;
      off += p.blocks.width[l];
    }
    hermitian_solve(m, pu.b, out[i]);
  }
  return out;
}

Solution solve(const QcqpSubproblem& p, const SolveOptions& opts,
               const DualVariables* warm_start) {
  DualSolver solver(p, opts);
  return solver.run(warm_start);
}

double objective_of(const QcqpSubproblem& p, const std::vector<CVector>& w) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.users.size(); ++i) {
    const auto& pu = p.users[i];
    if (pu.support.empty()) continue;
    CMatrix a = gather_restricted(p.a, p.blocks, pu.support);
    f += quad_form(a, w[i]);
    f -= 2.0 * kern::cdotc(w[i].size(), pu.b.data(), w[i].data()).real();
  }
  return f;
}

std::vector<double> usage_of(const QcqpSubproblem& p, const std::vector<CVector>& w) {
  const int L = p.num_bs();
  std::vector<double> usage(std::size_t(2) * L, 0.0);
  for (std::size_t i = 0; i < p.users.size(); ++i) {
    const auto& pu = p.users[i];
    double cluster_pow = 0.0;
    int off = 0;
    for (std::size_t j = 0; j < pu.support.size(); ++j) {
      const int l = pu.support[j];
      const int wd = p.blocks.width[l];
      const double bp = kern::sqnorm(wd, w[i].data() + off);
      cluster_pow += bp;
      usage[l] += bp;
      if (p.coupling == Coupling::per_link) {
        usage[std::size_t(L) + l] += pu.bh_coeff[j] * bp;
      }
      off += wd;
    }
    if (p.coupling == Coupling::per_cluster && !pu.support.empty()) {
      for (int l : pu.support) {
        usage[std::size_t(L) + l] += pu.bh_coeff[0] * cluster_pow;
      }
    }
  }
  return usage;
}

double max_violation_rel(const QcqpSubproblem& p, const std::vector<CVector>& w) {
  const int L = p.num_bs();
  const std::vector<double> usage = usage_of(p, w);
  double v = 0.0;
  for (int l = 0; l < L; ++l) {
    if (std::isfinite(p.power_budget[l])) {
      const double scale = std::max(p.power_budget[l], 1e-30);
      v = std::max(v, (usage[l] - p.power_budget[l]) / scale);
    }
    if (std::isfinite(p.backhaul_budget[l])) {
      const double scale = std::max(p.backhaul_budget[l], 1e-30);
      v = std::max(v, (usage[std::size_t(L) + l] - p.backhaul_budget[l]) / scale);
    }
  }
  return std::max(0.0, v);
}

QcqpSubproblem assemble(const AssembleInput& in, const BlockMap& blocks) {
  const ChannelRealization& ch = *in.channel;
  const int K = static_cast<int>(in.supports.size());
  const int N = ch.rx_antennas;
  const int mt = ch.total_antennas;

  QcqpSubproblem p;
  p.coupling = in.coupling;
  p.blocks = blocks;
  p.a = CMatrix(mt, mt);
  p.power_budget.assign(in.power_budget.begin(), in.power_budget.end());
  p.backhaul_budget.assign(in.backhaul_budget.begin(), in.backhaul_budget.end());

  CVector hu(mt);
  for (int k = 0; k < K; ++k) {
    if (in.active && !(*in.active)[k]) continue;
    if (in.supports[k].empty()) continue;
    const double s = in.alpha[k] * in.rho[k];
    if (s <= 0.0) continue;

    // hu = H_k^H u_k
    std::fill(hu.begin(), hu.end(), cd{});
    for (int r = 0; r < N; ++r) {
      const cd ur = std::conj(in.receivers[std::size_t(k) * N + r]);
      kern::axpy(mt, ur, ch.user_row(k, r), hu.data());
    }
    for (cd& v : hu) v = std::conj(v);

    rank1_update(p.a, cd(s, 0.0), hu, hu);

    QcqpSubproblem::User pu;
    pu.user_id = k;
    pu.support = in.supports[k];
    int dim = 0;
    for (int l : pu.support) dim += blocks.width[l];
    pu.b.resize(dim);
    int off = 0;
    for (int l : pu.support) {
      for (int t = 0; t < blocks.width[l]; ++t) {
        pu.b[off + t] = s * hu[blocks.offset[l] + t];
      }
      off += blocks.width[l];
    }
    if (in.coupling == Coupling::per_link) {
      pu.bh_coeff = in.link_coeff[k];
    } else {
      pu.bh_coeff = {in.cluster_coeff[k]};
    }
    p.users.push_back(std::move(pu));
  }
  return p;
}

void dump(const QcqpSubproblem& p, std::ostream& os) {
  os.precision(17);
  os << "qcqp v1\n";
  os << "coupling " << (p.coupling == Coupling::per_link ? "per_link" : "per_cluster")
     << "\n";
  const int L = p.num_bs();
  os << "bs " << L << " antennas " << p.blocks.total << "\n";
  os << "blockmap";
  for (int l = 0; l < L; ++l) os << " " << p.blocks.offset[l] << " " << p.blocks.width[l];
  os << "\npower";
  for (double v : p.power_budget) os << " " << v;
  os << "\nbackhaul";
  for (double v : p.backhaul_budget) os << " " << v;
  os << "\nmatrix " << p.a.rows() << "\n";
  for (int i = 0; i < p.a.rows(); ++i) {
    for (int j = 0; j < p.a.cols(); ++j) {
      os << p.a(i, j).real() << " " << p.a(i, j).imag()
         << (j + 1 == p.a.cols() ? "\n" : " ");
    }
  }
  os << "users " << p.users.size() << "\n";
  for (const auto& u : p.users) {
    os << "user " << u.user_id << " support " << u.support.size();
    for (int l : u.support) os << " " << l;
    os << "\nb";
    for (const cd& v : u.b) os << " " << v.real() << " " << v.imag();
    os << "\ncoeff";
    for (double v : u.bh_coeff) os << " " << v;
    os << "\n";
  }
}

QcqpSubproblem parse_dump(std::istream& is) {
  auto expect = [&](const char* tok) {
    std::string s;
    is >> s;
    if (s != tok) throw std::runtime_error("qcqp dump: expected '" + std::string(tok) +
                                           "', got '" + s + "'");
  };
  QcqpSubproblem p;
  expect("qcqp");
  expect("v1");
  expect("coupling");
  std::string mode;
  is >> mode;
  p.coupling = mode == "per_cluster" ? Coupling::per_cluster : Coupling::per_link;
  expect("bs");
  int L, mt;
  is >> L;
  expect("antennas");
  is >> mt;
  expect("blockmap");
  p.blocks.offset.resize(L);
  p.blocks.width.resize(L);
  for (int l = 0; l < L; ++l) is >> p.blocks.offset[l] >> p.blocks.width[l];
  p.blocks.total = mt;
  expect("power");
  p.power_budget.resize(L);
  for (double& v : p.power_budget) is >> v;
  expect("backhaul");
  p.backhaul_budget.resize(L);
  for (double& v : p.backhaul_budget) is >> v;
  expect("matrix");
  int n;
  is >> n;
  p.a = CMatrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double re, im;
      is >> re >> im;
      p.a(i, j) = cd(re, im);
    }
  }
  expect("users");
  std::size_t nu;
  is >> nu;
  p.users.resize(nu);
  for (auto& u : p.users) {
    expect("user");
    is >> u.user_id;
    expect("support");
    std::size_t ns;
    is >> ns;
    u.support.resize(ns);
    for (int& l : u.support) is >> l;
    expect("b");
    u.b.resize(p.support_dim(u));
    for (cd& v : u.b) {
      double re, im;
      is >> re >> im;
      v = cd(re, im);
    }
    expect("coeff");
    u.bh_coeff.resize(p.coupling == Coupling::per_link ? ns : 1);
    for (double& v : u.bh_coeff) is >> v;
  }
  if (!is) throw std::runtime_error("qcqp dump: truncated input");
  return p;
}

}  // namespace cransim::qcqp
