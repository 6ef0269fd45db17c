#include "gridflow/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <Eigen/SparseCholesky>

namespace gridflow {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
  }
  return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e4;
constexpr double kInfeasTol = 1e-5;
constexpr double kRhoEqFactor = 1e3;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Scaling {
  Vec d, e;      // column and row scalings
  double c = 1;  // cost scaling
};

// Modified Ruiz equilibration of [[P, C'],[C, 0]] plus cost normalization.
Scaling equilibrate(SpMat& P, Vec& q, SpMat& C, Vec& l, Vec& u, int iters) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(C.rows());
  Scaling sc;
  sc.d = Vec::Ones(n);
  sc.e = Vec::Ones(m);
  for (int it = 0; it < iters; ++it) {
    Vec dn = Vec::Zero(n), en = Vec::Zero(m);
    for (int j = 0; j < n; ++j) {
      for (SpMat::InnerIterator pit(P, j); pit; ++pit)
        dn[j] = std::max(dn[j], std::abs(pit.value()));
      for (SpMat::InnerIterator cit(C, j); cit; ++cit) {
        dn[j] = std::max(dn[j], std::abs(cit.value()));
        en[cit.row()] = std::max(en[cit.row()], std::abs(cit.value()));
      }
    }
    auto to_scale = [](double v) {
      if (v < 1e-12) return 1.0;
      return 1.0 / std::sqrt(std::clamp(v, kMinScale, kMaxScale));
    };
    Vec ds = dn.unaryExpr(to_scale), es = en.unaryExpr(to_scale);
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator pit(P, j); pit; ++pit)
        pit.valueRef() *= ds[pit.row()] * ds[j];
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator cit(C, j); cit; ++cit)
        cit.valueRef() *= es[cit.row()] * ds[j];
    q = q.cwiseProduct(ds);
    l = l.cwiseProduct(es);
    u = u.cwiseProduct(es);
    sc.d = sc.d.cwiseProduct(ds);
    sc.e = sc.e.cwiseProduct(es);
  }
  // one final cost normalization; doing this inside the loop feeds back into
  // the next Ruiz pass and diverges on nearly-linear objectives
  if (iters > 0) {
    double pnorm = 0;
    for (int j = 0; j < n; ++j) {
      double col = 0;
      for (SpMat::InnerIterator pit(P, j); pit; ++pit)
        col = std::max(col, std::abs(pit.value()));
      pnorm += col;
    }
    pnorm = n ? pnorm / n : 0.0;
    double g = std::max(pnorm, inf_norm(q));
    if (g > 1e-12) {
      g = 1.0 / std::clamp(g, kMinScale, kMaxScale);
      P *= g;
      q *= g;
      sc.c = g;
    }
  }
  return sc;
}

struct Kkt {
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  SpMat K;
  int n = 0, m = 0;
  bool analyzed = false;

  bool assemble_and_factor(const SpMat& P, const SpMat& C, double sigma,
                           const Vec& rho) {
    n = static_cast<int>(P.rows());
    m = static_cast<int>(C.rows());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(P.nonZeros() + 2 * C.nonZeros() + n + m);
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(P, j); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), j, it.value());
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, sigma);
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(C, j); it; ++it) {
        trip.emplace_back(n + static_cast<int>(it.row()), j, it.value());
        trip.emplace_back(j, n + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -1.0 / rho[i]);
    K.resize(n + m, n + m);
    K.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed) {
      ldlt.analyzePattern(K);
      analyzed = true;
    }
    ldlt.factorize(K);
    return ldlt.info() == Eigen::Success;
  }

  void solve(const Vec& rhs, Vec& out) const { out = ldlt.solve(rhs); }
};

struct Residuals {
  double prim = kInf, dual = kInf;
  double prim_rel = kInf, dual_rel = kInf;  // for rho adaptation
  int worst_row = -1;
};

Residuals residuals(const SpMat& Ps, const Vec& qs, const SpMat& Cs,
                    const Scaling& sc, const Vec& x, const Vec& z,
                    const Vec& y) {
  Residuals r;
  Vec Cx = Cs * x;
  Vec Px = Ps * x;
  Vec Cty = Cs.transpose() * y;
  // unscale
  Vec e_inv_Cx = Cx.cwiseQuotient(sc.e);
  Vec e_inv_z = z.cwiseQuotient(sc.e);
  r.prim = 0;
  for (int i = 0; i < Cx.size(); ++i) {
    double v = std::abs(e_inv_Cx[i] - e_inv_z[i]);
    if (v > r.prim) {
      r.prim = v;
      r.worst_row = i;
    }
  }
  Vec d_inv = sc.d.cwiseInverse();
  double cinv = 1.0 / sc.c;
  double rd = cinv * inf_norm((Px + qs + Cty).cwiseProduct(d_inv));
  r.dual = rd;
  double sp = std::max(inf_norm(e_inv_Cx), inf_norm(e_inv_z));
  double sd = cinv * std::max({inf_norm(Px.cwiseProduct(d_inv)),
                               inf_norm(qs.cwiseProduct(d_inv)),
                               inf_norm(Cty.cwiseProduct(d_inv))});
  r.prim_rel = r.prim / std::max(sp, 1e-10);
  r.dual_rel = r.dual / std::max(sd, 1e-10);
  return r;
}

// Active-set refinement on the unscaled problem; returns true when the
// refined point has strictly better KKT residuals.
bool polish(const CanonicalProblem& prob, const SpMat& P0, const SolverSettings& st,
            Vec& x, Vec& y, double r_prim, double r_dual) {
  const int n = prob.n, m = prob.m;
  std::vector<int> active;
  std::vector<double> rhs_act;
  std::vector<int> side;  // -1 lower, 0 equality, +1 upper
  const double eps_act = 1e-12 * std::max(1.0, inf_norm(y));
  // weakly active rows carry a vanishing dual; classify those by slack
  const double slack_tol = std::clamp(10 * r_prim, 1e-6, 1e-3);
  Vec Cx0 = prob.C * x;
  for (int i = 0; i < m; ++i) {
    if (prob.l[i] == prob.u[i]) {
      active.push_back(i);
      rhs_act.push_back(prob.l[i]);
      side.push_back(0);
    } else if ((y[i] < -eps_act || Cx0[i] - prob.l[i] < slack_tol) &&
               prob.l[i] > -kInf && y[i] <= eps_act) {
      active.push_back(i);
      rhs_act.push_back(prob.l[i]);
      side.push_back(-1);
    } else if ((y[i] > eps_act || prob.u[i] - Cx0[i] < slack_tol) &&
               prob.u[i] < kInf) {
      active.push_back(i);
      rhs_act.push_back(prob.u[i]);
      side.push_back(1);
    }
  }
  SpMat Ct = prob.C.transpose();
  Vec xp, yp;
  // Active-set refinement: drop rows whose refined dual comes out
  // wrong-signed, add rows the candidate violates, repeat.
  const int max_rounds = 8;
  for (int round = 0; round < max_rounds; ++round) {
    const int ma = static_cast<int>(active.size());
    std::vector<Eigen::Triplet<double>> trip, trip0;
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(P0, j); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), j, it.value());
        trip0.emplace_back(static_cast<int>(it.row()), j, it.value());
      }
    std::vector<int> row_to_act(m, -1);
    for (int k = 0; k < ma; ++k) row_to_act[active[k]] = k;
    for (int j = 0; j < m; ++j) {
      if (row_to_act[j] < 0) continue;
      int k = row_to_act[j];
      for (SpMat::InnerIterator it(Ct, j); it; ++it) {
        trip.emplace_back(n + k, static_cast<int>(it.row()), it.value());
        trip.emplace_back(static_cast<int>(it.row()), n + k, it.value());
        trip0.emplace_back(n + k, static_cast<int>(it.row()), it.value());
        trip0.emplace_back(static_cast<int>(it.row()), n + k, it.value());
      }
    }
    SpMat K0(n + ma, n + ma);
    K0.setFromTriplets(trip0.begin(), trip0.end());
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    double delta = st.polish_reg;
    bool factored = false;
    for (int attempt = 0; attempt < 3; ++attempt) {
      auto reg = trip;
      for (int j = 0; j < n; ++j) reg.emplace_back(j, j, delta);
      for (int k = 0; k < ma; ++k) reg.emplace_back(n + k, n + k, -delta);
      SpMat K(n + ma, n + ma);
      K.setFromTriplets(reg.begin(), reg.end());
      ldlt.compute(K);
      if (ldlt.info() == Eigen::Success) {
        factored = true;
        break;
      }
      delta *= 100;
    }
    if (!factored) return false;
    Vec rhs(n + ma);
    rhs.head(n) = -prob.q;
    for (int k = 0; k < ma; ++k) rhs[n + k] = rhs_act[k];
    Vec sol = ldlt.solve(rhs);
    for (int ref = 0; ref < 3; ++ref) {
      Vec resid = rhs - K0 * sol;
      sol += ldlt.solve(resid);
    }
    xp = sol.head(n);
    yp = Vec::Zero(m);
    for (int k = 0; k < ma; ++k) yp[active[k]] = sol[n + k];
    std::vector<int> keep;
    for (int k = 0; k < ma; ++k) {
      bool wrong = (side[k] < 0 && yp[active[k]] > 10 * st.eps_abs) ||
                   (side[k] > 0 && yp[active[k]] < -10 * st.eps_abs);
      if (!wrong) keep.push_back(k);
    }
    // inactive rows the candidate violates must join the working set
    Vec Cxp = prob.C * xp;
    std::vector<int> in_set(m, 0);
    for (int k : keep) in_set[active[k]] = 1;
    std::vector<int> add;
    for (int i = 0; i < m; ++i) {
      if (in_set[i] || prob.l[i] == prob.u[i]) continue;
      if (Cxp[i] < prob.l[i] - 1e-9 || Cxp[i] > prob.u[i] + 1e-9)
        add.push_back(i);
    }
    if (std::getenv("GRIDFLOW_QP_DEBUG"))
      std::fprintf(stderr, "polish round %d: %d active, %d wrong-signed, %d violated\n",
                   round, ma, ma - static_cast<int>(keep.size()),
                   static_cast<int>(add.size()));
    if (static_cast<int>(keep.size()) == ma && add.empty()) break;
    if (round == max_rounds - 1) return false;
    std::vector<int> na;
    std::vector<double> nr;
    std::vector<int> ns;
    for (int k : keep) {
      na.push_back(active[k]);
      nr.push_back(rhs_act[k]);
      ns.push_back(side[k]);
    }
    for (int i : add) {
      bool low = Cxp[i] < prob.l[i] - 1e-9;
      na.push_back(i);
      nr.push_back(low ? prob.l[i] : prob.u[i]);
      ns.push_back(low ? -1 : 1);
    }
    active = std::move(na);
    rhs_act = std::move(nr);
    side = std::move(ns);
  }
  Vec Cx = prob.C * xp;
  double rp = 0;
  for (int i = 0; i < m; ++i) {
    double v = std::max(prob.l[i] - Cx[i], Cx[i] - prob.u[i]);
    rp = std::max(rp, v);
  }
  double rd = inf_norm(P0 * xp + prob.q + prob.C.transpose() * yp);
  if (std::getenv("GRIDFLOW_QP_DEBUG"))
    std::fprintf(stderr, "polish candidate rp=%g rd=%g vs admm rp=%g rd=%g\n",
                 rp, rd, r_prim, r_dual);
  if (std::max(rp, rd) < std::max(r_prim, r_dual)) {
    x = xp;
    y = yp;
    return true;
  }
  return false;
}

}  // namespace

QpResult solve_qp(const CanonicalProblem& prob, const SolverSettings& st,
                  const Vec* x0, const Vec* y0) {
  const int n = prob.n, m = prob.m;
  if (n == 0) throw Error("empty problem");
  for (int i = 0; i < m; ++i)
    if (prob.l[i] > prob.u[i]) throw Error("constraint row with l > u");

  SpMat P0 = prob.P;
  if (st.regularization > 0) {
    SpMat reg(n, n);
    reg.setIdentity();
    P0 = P0 + st.regularization * reg;
  }

  SpMat Ps = P0, Cs = prob.C;
  Vec qs = prob.q, ls = prob.l, us = prob.u;
  Scaling sc = equilibrate(Ps, qs, Cs, ls, us, st.scaling_iterations);

  double rho_base = st.rho;
  auto rho_vec = [&](double base) {
    Vec r(m);
    for (int i = 0; i < m; ++i)
      r[i] = (prob.l[i] == prob.u[i]) ? base * kRhoEqFactor : base;
    return r;
  };
  Vec rho = rho_vec(rho_base);

  Kkt kkt;
  double sigma = st.sigma;
  for (int attempt = 0; attempt < 4; ++attempt) {
    if (kkt.assemble_and_factor(Ps, Cs, sigma, rho)) break;
    sigma *= 100;
    if (attempt == 3) throw Error("KKT factorization failed");
  }

  Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
  if (x0 && x0->size() == n) x = x0->cwiseQuotient(sc.d);
  if (y0 && y0->size() == m) y = sc.c * y0->cwiseProduct(sc.e);
  z = (Cs * x).cwiseMax(ls).cwiseMin(us);

  QpResult out;
  SolveReport& rep = out.report;
  rep.status = SolveStatus::MaxIterations;

  Vec rhs(n + m), sol(n + m), xt(n), zt(m), zho(m);
  Vec x_last(n), y_last(m);
  int factor_count = 1;
  int iter = 0;
  for (iter = 1; iter <= st.max_iterations; ++iter) {
    x_last = x;
    y_last = y;
    rhs.head(n) = sigma * x - qs;
    rhs.tail(m) = z - y.cwiseQuotient(rho);
    kkt.solve(rhs, sol);
    xt = sol.head(n);
    zt = z + (sol.tail(m) - y).cwiseQuotient(rho);
    const double a = st.over_relaxation;
    zho = a * zt + (1.0 - a) * z;
    x = a * xt + (1.0 - a) * x;
    z = (zho + y.cwiseQuotient(rho)).cwiseMax(ls).cwiseMin(us);
    y += rho.cwiseProduct(zho - z);

    if (iter % st.check_interval != 0 && iter != st.max_iterations) continue;

    Residuals r = residuals(Ps, qs, Cs, sc, x, z, y);
    rep.iterations = iter;
    rep.primal_residual = r.prim;
    rep.dual_residual = r.dual;
    rep.worst_row = r.worst_row;
    double eps_p = st.eps_abs;
    double eps_d = st.eps_abs;
    {
      Vec Cx = (Cs * x).cwiseQuotient(sc.e);
      Vec zu = z.cwiseQuotient(sc.e);
      eps_p += st.eps_rel * std::max(inf_norm(Cx), inf_norm(zu));
      Vec d_inv = sc.d.cwiseInverse();
      double cinv = 1.0 / sc.c;
      eps_d += st.eps_rel * cinv *
               std::max({inf_norm((Ps * x).cwiseProduct(d_inv)),
                         inf_norm(qs.cwiseProduct(d_inv)),
                         inf_norm((Cs.transpose() * y).cwiseProduct(d_inv))});
    }
    if (r.prim <= eps_p && r.dual <= eps_d) {
      rep.status = SolveStatus::Optimal;
      break;
    }

    // infeasibility certificates from single-iteration differences (unscaled)
    Vec dy = (y - y_last).cwiseProduct(sc.e) / sc.c;
    double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-14) {
      Vec v = dy / dy_norm;
      double ctv = inf_norm(prob.C.transpose() * v);
      bool support_ok = true;
      double gap = 0;
      for (int i = 0; i < m; ++i) {
        double vp = std::max(v[i], 0.0), vm = std::min(v[i], 0.0);
        if (vp > kInfeasTol && prob.u[i] >= kInf) support_ok = false;
        if (vm < -kInfeasTol && prob.l[i] <= -kInf) support_ok = false;
        if (prob.u[i] < kInf) gap += prob.u[i] * vp;
        if (prob.l[i] > -kInf) gap += prob.l[i] * vm;
      }
      if (support_ok && ctv <= kInfeasTol && gap <= -kInfeasTol) {
        rep.status = SolveStatus::PrimalInfeasible;
        rep.iterations = iter;
        int worst = 0;
        for (int i = 1; i < m; ++i)
          if (std::abs(v[i]) > std::abs(v[worst])) worst = i;
        rep.worst_row = worst;
        out.x = x.cwiseProduct(sc.d);
        out.y = v;
        return out;
      }
    }
    Vec dx = (x - x_last).cwiseProduct(sc.d);
    double dx_norm = inf_norm(dx);
    if (dx_norm > 1e-14) {
      Vec w = dx / dx_norm;
      double pw = inf_norm(P0 * w);
      double qw = prob.q.dot(w);
      bool cone_ok = true;
      Vec Cw = prob.C * w;
      int worst = -1;
      double worst_mag = 0;
      for (int i = 0; i < m; ++i) {
        bool lf = prob.l[i] > -kInf, uf = prob.u[i] < kInf;
        double viol = 0;
        if (lf && uf)
          viol = std::abs(Cw[i]);
        else if (uf)
          viol = std::max(Cw[i], 0.0);
        else if (lf)
          viol = std::max(-Cw[i], 0.0);
        if (viol > kInfeasTol) cone_ok = false;
        if (std::abs(Cw[i]) > worst_mag) {
          worst_mag = std::abs(Cw[i]);
          worst = i;
        }
      }
      if (cone_ok && pw <= kInfeasTol && qw <= -kInfeasTol) {
        rep.status = SolveStatus::DualInfeasible;
        rep.iterations = iter;
        rep.worst_row = worst;
        out.x = w;
        out.y = Vec::Zero(m);
        return out;
      }
    }

    if (st.adaptive_rho && factor_count < 60) {
      double ratio = r.prim_rel / std::max(r.dual_rel, 1e-16);
      if (ratio > 5.0 || ratio < 0.2) {
        double nr = std::clamp(rho_base * std::sqrt(ratio), kRhoMin, kRhoMax);
        if (nr / rho_base > 1.5 || rho_base / nr > 1.5) {
          rho_base = nr;
          rho = rho_vec(rho_base);
          kkt.assemble_and_factor(Ps, Cs, sigma, rho);
          ++factor_count;
        }
      }
    }
  }
  if (iter > st.max_iterations) rep.iterations = st.max_iterations;

  out.x = x.cwiseProduct(sc.d);
  out.y = y.cwiseProduct(sc.e) / sc.c;

  if (rep.status == SolveStatus::Optimal && st.polish) {
    // residuals of the unscaled point before polish
    Vec Cx = prob.C * out.x;
    double rp = 0;
    for (int i = 0; i < m; ++i)
      rp = std::max(rp, std::max(prob.l[i] - Cx[i], Cx[i] - prob.u[i]));
    rp = std::max(rp, 0.0);
    double rd = inf_norm(P0 * out.x + prob.q + prob.C.transpose() * out.y);
    if (polish(prob, P0, st, out.x, out.y, rp, rd)) rep.polished = true;
  }
  {
    // final unscaled residuals
    Vec Cx = prob.C * out.x;
    double rp = 0;
    int worst = -1;
    for (int i = 0; i < m; ++i) {
      double v = std::max(prob.l[i] - Cx[i], Cx[i] - prob.u[i]);
      if (v > rp) {
        rp = v;
        worst = i;
      }
    }
    rep.primal_residual = std::max(rp, 0.0);
    rep.dual_residual =
        inf_norm(P0 * out.x + prob.q + prob.C.transpose() * out.y);
    if (worst >= 0 && rep.status != SolveStatus::Optimal) rep.worst_row = worst;
    rep.objective = prob.objective_at(out.x);
  }
  return out;
}

}  // namespace gridflow
