#include <ostream>
#include <sstream>

#include "gridflow/problem.hpp"
#include "gridflow/solution.hpp"

namespace gridflow {

namespace {

struct Builder {
  explicit Builder(int terminal_cols) : n(terminal_cols) {}

  int n;
  std::vector<Eigen::Triplet<double>> Pt, Ct;
  std::vector<double> q_extra;  // aux columns only; terminal q kept separately
  std::vector<double> q;        // full, resized lazily
  std::vector<double> l, u;
  std::vector<ColTag> col_tags;  // aux columns only
  std::vector<RowTag> row_tags;
  double constant = 0.0;

  int add_col(ColTag tag) {
    col_tags.push_back(tag);
    q.push_back(0.0);
    return n++;
  }
  int add_row(RowTag tag, double lo, double hi) {
    row_tags.push_back(tag);
    l.push_back(lo);
    u.push_back(hi);
    return static_cast<int>(l.size()) - 1;
  }
  void C(int row, int col, double v) { Ct.emplace_back(row, col, v); }
  // accumulates (1/2) x'Px terms; pass the full second-derivative weight
  void P(int i, int j, double v) {
    Pt.emplace_back(i, j, v);
    if (i != j) Pt.emplace_back(j, i, v);
  }
  void linear(int col, double v) { q[col] += v; }
};

}  // namespace

CanonicalProblem compile(const Network& net, const Array3* delta) {
  {
    auto issues = net.validate();
    if (!issues.empty()) throw ValidationError(std::move(issues));
  }
  const int M = net.num_terminals();
  const int N = net.num_nets();
  const int T = net.horizon();
  const int S = net.num_scenarios();
  const double h = net.period_hours();
  const auto& pi = net.probabilities();
  if (delta && (delta->dim0() != N || delta->dim1() != T || delta->dim2() != S))
    throw Error("perturbation array must have shape N x T x S");

  CanonicalProblem prob;
  prob.M = M;
  prob.N = N;
  prob.T = T;
  prob.S = S;
  prob.prob = pi;

  Builder b(M * T * S);
  b.q.assign(static_cast<size_t>(M) * T * S, 0.0);

  auto tcol = [&](int m, int t, int s) { return (s * T + t) * M + m; };

  // Net balance rows first: A p^(s) + delta^(s) = 0 per (net, period, scenario).
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < N; ++n) {
        double rhs = delta ? -(*delta)(n, t, s) : 0.0;
        int row = b.add_row({RowTag::Kind::NetBalance, n, -1, -1, "net balance",
                             t, s, -1},
                            rhs, rhs);
        for (int m : net.net(n).terminals) b.C(row, tcol(m, t, s), 1.0);
      }

  // Device lowerings.
  for (DeviceId d = 0; d < net.num_devices(); ++d) {
    const Device& dev = net.device(d);
    auto dev_row = [&](const char* label, int t, int s, double lo, double hi) {
      return b.add_row({RowTag::Kind::Device, -1, d, -1, label, t, s, -1}, lo, hi);
    };
    for (int s = 0; s < S; ++s) {
      const double w = pi[s];
      if (const auto* g = std::get_if<GenericGenerator>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int c = tcol(dev.terminals[0], t, s);
          if (g->alpha > 0) b.P(c, c, w * 2 * g->alpha);
          b.linear(c, -w * g->beta);
          b.constant += w * g->gamma;
          if (g->p_min > -kInf || g->p_max < kInf) {
            int row = dev_row("power bounds", t, s, -g->p_max, -g->p_min);
            b.C(row, c, 1.0);
          }
        }
        for (int t = 1; t < T; ++t) {
          int c0 = tcol(dev.terminals[0], t - 1, s);
          int c1 = tcol(dev.terminals[0], t, s);
          if (g->ramp_up || g->ramp_down) {
            double up = g->ramp_up ? *g->ramp_up : kInf;
            double down = g->ramp_down ? *g->ramp_down : kInf;
            int row = dev_row("ramp limit", t, s, -down, up);
            b.C(row, c1, 1.0);
            b.C(row, c0, -1.0);
          }
          if (g->smoothing == SmoothingKind::Quadratic && g->smoothing_weight > 0) {
            double wq = w * 2 * g->smoothing_weight;
            b.P(c0, c0, wq);
            b.P(c1, c1, wq);
            b.P(c0, c1, -wq);
          } else if (g->smoothing == SmoothingKind::L1 && g->smoothing_weight > 0) {
            int a = b.add_col({ColTag::Kind::AbsSmooth, d, t, t, s});
            b.linear(a, w * g->smoothing_weight);
            int r1 = dev_row("smoothing epigraph", t, s, 0.0, kInf);
            b.C(r1, a, 1.0);
            b.C(r1, c1, -1.0);
            b.C(r1, c0, 1.0);
            int r2 = dev_row("smoothing epigraph", t, s, 0.0, kInf);
            b.C(r2, a, 1.0);
            b.C(r2, c1, 1.0);
            b.C(r2, c0, -1.0);
          }
        }
      } else if (const auto* g = std::get_if<FixedGenerator>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int row = dev_row("fixed output", t, s, -g->p_fix.at(t, s),
                            -g->p_fix.at(t, s));
          b.C(row, tcol(dev.terminals[0], t, s), 1.0);
        }
      } else if (const auto* g = std::get_if<RenewableGenerator>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int row = dev_row("available power", t, s, -g->p_avail.at(t, s), 0.0);
          b.C(row, tcol(dev.terminals[0], t, s), 1.0);
        }
      } else if (const auto* l = std::get_if<FixedLoad>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int row = dev_row("fixed demand", t, s, l->p_fix.at(t, s),
                            l->p_fix.at(t, s));
          b.C(row, tcol(dev.terminals[0], t, s), 1.0);
        }
      } else if (const auto* l = std::get_if<CurtailableLoad>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int c = tcol(dev.terminals[0], t, s);
          b.linear(c, -w * l->lambda_curt);
          b.constant += w * l->lambda_curt * l->p_des;
          int row = dev_row("power bounds", t, s, l->p_min, l->p_des);
          b.C(row, c, 1.0);
        }
      } else if (const auto* l = std::get_if<DeferrableLoad>(&dev.spec)) {
        double lo = l->energy_min >= 0 ? l->energy_min : l->energy;
        int erow = dev_row("energy window", l->start, s, lo, l->energy);
        for (int t = 0; t < T; ++t) {
          int c = tcol(dev.terminals[0], t, s);
          if (t >= l->start && t <= l->end) {
            int row = dev_row("power bounds", t, s, 0.0, l->p_max);
            b.C(row, c, 1.0);
            b.C(erow, c, h);
          } else {
            int row = dev_row("outside window", t, s, 0.0, 0.0);
            b.C(row, c, 1.0);
          }
        }
      } else if (const auto* l = std::get_if<ThermalLoad>(&dev.spec)) {
        const double a = l->conductivity / l->heat_capacity;
        const double g = l->cop / l->heat_capacity;
        std::vector<int> theta(T);
        for (int t = 0; t < T; ++t) {
          theta[t] = b.add_col({ColTag::Kind::ThermalTemp, d, t, t, s});
          int row = dev_row("temperature bounds", t, s, l->temp_min, l->temp_max);
          b.C(row, theta[t], 1.0);
          int prow = dev_row("power bounds", t, s, 0.0, l->p_max);
          b.C(prow, tcol(dev.terminals[0], t, s), 1.0);
        }
        for (int t = 0; t < T; ++t) {
          // theta_{t+1} = theta_t + a (amb_t - theta_t) - g p_t
          double rhs = a * l->ambient.at(t, s);
          int row = dev_row("thermal dynamics", t, s, rhs, rhs);
          b.C(row, theta[t], 1.0);
          b.C(row, tcol(dev.terminals[0], t, s), g);
          if (t == 0)
            b.l[row] = b.u[row] = rhs + (1.0 - a) * l->temp_init;
          else
            b.C(row, theta[t - 1], -(1.0 - a));
        }
      } else if (const auto* g = std::get_if<GridTie>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int c = tcol(dev.terminals[0], t, s);
          int e = b.add_col({ColTag::Kind::GridEpigraph, d, t, t, s});
          b.linear(e, w);
          int r1 = dev_row("buy-side epigraph", t, s, 0.0, kInf);
          b.C(r1, e, 1.0);
          b.C(r1, c, g->price_buy);
          int r2 = dev_row("sell-side epigraph", t, s, 0.0, kInf);
          b.C(r2, e, 1.0);
          b.C(r2, c, g->price_sell);
          if (g->max_buy < kInf || g->max_sell < kInf) {
            int row = dev_row("exchange bounds", t, s, -g->max_buy, g->max_sell);
            b.C(row, c, 1.0);
          }
        }
      } else if (std::get_if<PowerDissipator>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int row = dev_row("nonnegative power", t, s, 0.0, kInf);
          b.C(row, tcol(dev.terminals[0], t, s), 1.0);
        }
      } else if (const auto* l = std::get_if<LosslessLine>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int c1 = tcol(dev.terminals[0], t, s);
          int c2 = tcol(dev.terminals[1], t, s);
          int row = dev_row("lossless transfer", t, s, 0.0, 0.0);
          b.C(row, c1, 1.0);
          b.C(row, c2, 1.0);
          if (l->p_min > -kInf || l->p_max < kInf) {
            int brow = dev_row("flow bounds", t, s, l->p_min, l->p_max);
            b.C(brow, c1, 1.0);
          }
          if (l->flow_cost > 0) b.P(c1, c1, w * 2 * l->flow_cost);
        }
      } else if (const auto* l = std::get_if<LossyLine>(&dev.spec)) {
        const double spacing = l->p_max / (l->cuts - 1);
        for (int t = 0; t < T; ++t) {
          int c1 = tcol(dev.terminals[0], t, s);
          int c2 = tcol(dev.terminals[1], t, s);
          int cap = dev_row("loss cap", t, s, -kInf, l->loss * l->p_max * l->p_max);
          b.C(cap, c1, 1.0);
          b.C(cap, c2, 1.0);
          int box = dev_row("flow bounds", t, s, -2 * l->p_max, 2 * l->p_max);
          b.C(box, c1, 1.0);
          b.C(box, c2, -1.0);
          // Tangents of y >= loss * d^2 at d_k = k * spacing, k = -(K-1)..K-1:
          //   (1 - loss d_k) p1 + (1 + loss d_k) p2 >= -loss d_k^2
          for (int k = -(l->cuts - 1); k <= l->cuts - 1; ++k) {
            double dk = k * spacing;
            int row = dev_row("loss tangent", t, s, -l->loss * dk * dk, kInf);
            b.C(row, c1, 1.0 - l->loss * dk);
            b.C(row, c2, 1.0 + l->loss * dk);
          }
        }
      } else if (const auto* c = std::get_if<Converter>(&dev.spec)) {
        for (int t = 0; t < T; ++t) {
          int c1 = tcol(dev.terminals[0], t, s);
          int c2 = tcol(dev.terminals[1], t, s);
          int r1 = dev_row("forward conversion", t, s, 0.0, kInf);
          b.C(r1, c1, c->eff_fwd);
          b.C(r1, c2, 1.0);
          int r2 = dev_row("reverse conversion", t, s, 0.0, kInf);
          b.C(r2, c1, 1.0 / c->eff_rev);
          b.C(r2, c2, 1.0);
          if (c->p_min > -kInf || c->p_max < kInf) {
            int row = dev_row("input bounds", t, s, c->p_min, c->p_max);
            b.C(row, c1, 1.0);
          }
        }
      } else if (const auto* st = std::get_if<IdealStorage>(&dev.spec)) {
        const double keep = 1.0 - st->leakage;
        std::vector<int> ecol(T);
        for (int t = 0; t < T; ++t) {
          ecol[t] = b.add_col({ColTag::Kind::StorageEnergy, d, t, t, s});
          int row = dev_row("energy bounds", t, s, st->energy_min, st->energy_max);
          b.C(row, ecol[t], 1.0);
          int prow = dev_row("charge bounds", t, s, st->p_min, st->p_max);
          b.C(prow, tcol(dev.terminals[0], t, s), 1.0);
        }
        for (int t = 0; t < T; ++t) {
          // E_t = (1 - alpha) E_{t-1} + h p_t, E_{-1} = energy_init
          double rhs = t == 0 ? keep * st->energy_init : 0.0;
          int row = dev_row("energy balance", t, s, rhs, rhs);
          b.C(row, ecol[t], 1.0);
          b.C(row, tcol(dev.terminals[0], t, s), -h);
          if (t > 0) b.C(row, ecol[t - 1], -keep);
        }
        if (st->energy_final) {
          int row = dev_row("terminal energy", T - 1, s, *st->energy_final,
                            *st->energy_final);
          b.C(row, ecol[T - 1], 1.0);
        }
        if (st->final_energy_price)
          b.linear(ecol[T - 1], w * (*st->final_energy_price));
        if (st->cycle_cost > 0) {
          for (int t = 0; t < T; ++t) {
            int a = b.add_col({ColTag::Kind::AbsCharge, d, t, t, s});
            b.linear(a, w * st->cycle_cost);
            int c = tcol(dev.terminals[0], t, s);
            int r1 = dev_row("cycle epigraph", t, s, 0.0, kInf);
            b.C(r1, a, 1.0);
            b.C(r1, c, -1.0);
            int r2 = dev_row("cycle epigraph", t, s, 0.0, kInf);
            b.C(r2, a, 1.0);
            b.C(r2, c, 1.0);
          }
        }
      }
      // Composite: nothing to lower; its parts are ordinary hidden devices.
    }
  }

  // Information pattern: first-period powers agree across scenarios.
  for (int s = 1; s < S; ++s)
    for (int m = 0; m < M; ++m) {
      int row = b.add_row(
          {RowTag::Kind::InfoPattern, -1, net.terminal(m).device, m,
           "information pattern", 0, 0, s},
          0.0, 0.0);
      b.C(row, tcol(m, 0, s), 1.0);
      b.C(row, tcol(m, 0, 0), -1.0);
    }

  prob.n = b.n;
  prob.m = static_cast<int>(b.l.size());
  prob.P.resize(prob.n, prob.n);
  prob.P.setFromTriplets(b.Pt.begin(), b.Pt.end());
  prob.C.resize(prob.m, prob.n);
  prob.C.setFromTriplets(b.Ct.begin(), b.Ct.end());
  prob.q = Eigen::Map<Eigen::VectorXd>(b.q.data(), b.q.size());
  prob.l = Eigen::Map<Eigen::VectorXd>(b.l.data(), b.l.size());
  prob.u = Eigen::Map<Eigen::VectorXd>(b.u.data(), b.u.size());
  prob.objective_constant = b.constant;

  prob.col_tags.reserve(prob.n);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t)
      for (int m = 0; m < M; ++m)
        prob.col_tags.push_back({ColTag::Kind::TerminalPower,
                                 net.terminal(m).device,
                                 net.terminal(m).local_index, t, s});
  prob.col_tags.insert(prob.col_tags.end(), b.col_tags.begin(), b.col_tags.end());
  prob.row_tags = std::move(b.row_tags);
  return prob;
}

std::string CanonicalProblem::describe_row(int row, const Network& net) const {
  const RowTag& tag = row_tags.at(row);
  std::ostringstream os;
  switch (tag.kind) {
    case RowTag::Kind::NetBalance:
      os << "net " << net.net(tag.net).name << " balance";
      break;
    case RowTag::Kind::Device:
      os << net.device(tag.device).name << " " << tag.label;
      break;
    case RowTag::Kind::InfoPattern:
      os << "information pattern on " << net.device(tag.device).name << "["
         << net.terminal(tag.terminal).local_index << "]";
      break;
  }
  os << " (period " << tag.period;
  if (S > 1) os << ", scenario " << (tag.kind == RowTag::Kind::InfoPattern
                                         ? tag.scenario2
                                         : tag.scenario);
  os << ")";
  return os.str();
}

void dump_triplets(std::ostream& os, const CanonicalProblem& prob) {
  os << "# quadratic " << prob.n << " " << prob.n << "\n";
  for (int j = 0; j < prob.n; ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(prob.P, j); it; ++it)
      os << it.row() << " " << j << " " << it.value() << "\n";
  os << "# linear\n";
  for (int j = 0; j < prob.n; ++j)
    if (prob.q[j] != 0) os << j << " " << prob.q[j] << "\n";
  os << "# constraints " << prob.m << " " << prob.n << "\n";
  for (int j = 0; j < prob.n; ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(prob.C, j); it; ++it)
      os << it.row() << " " << j << " " << it.value() << "\n";
  os << "# bounds\n";
  for (int i = 0; i < prob.m; ++i)
    os << i << " " << prob.l[i] << " " << prob.u[i] << "\n";
}

Solution decode(const CanonicalProblem& prob, const QpResult& result) {
  Solution sol;
  sol.report = result.report;
  sol.x = result.x;
  sol.y = result.y;
  sol.power = Array3(prob.M, prob.T, prob.S);
  sol.price = Array3(prob.N, prob.T, prob.S);
  sol.price_raw = Array3(prob.N, prob.T, prob.S);
  for (int s = 0; s < prob.S; ++s)
    for (int t = 0; t < prob.T; ++t)
      for (int m = 0; m < prob.M; ++m)
        sol.power(m, t, s) = result.x[prob.terminal_col(m, t, s)];
  for (int s = 0; s < prob.S; ++s)
    for (int t = 0; t < prob.T; ++t)
      for (int n = 0; n < prob.N; ++n) {
        double raw = result.y[prob.net_row(n, t, s)];
        sol.price_raw(n, t, s) = raw / prob.prob[s];
        sol.price(n, t, s) = sol.price_raw(n, t, s);
      }
  if (prob.S > 1) {
    // First-period prices: the information-pattern rows absorb differences
    // between raw per-scenario duals; report the probability-weighted
    // aggregate, which is the sensitivity to a common first-period extraction.
    for (int n = 0; n < prob.N; ++n) {
      double common = 0;
      for (int s = 0; s < prob.S; ++s) common += result.y[prob.net_row(n, 0, s)];
      for (int s = 0; s < prob.S; ++s) sol.price(n, 0, s) = common;
    }
  }
  for (size_t c = static_cast<size_t>(prob.M) * prob.T * prob.S;
       c < prob.col_tags.size(); ++c) {
    const ColTag& tag = prob.col_tags[c];
    if (tag.kind != ColTag::Kind::StorageEnergy &&
        tag.kind != ColTag::Kind::ThermalTemp)
      continue;
    AuxState* state = nullptr;
    for (auto& a : sol.aux)
      if (a.device == tag.device && a.kind == tag.kind) state = &a;
    if (!state) {
      sol.aux.push_back({tag.device, tag.kind, Array3(1, prob.T, prob.S)});
      state = &sol.aux.back();
    }
    state->values(0, tag.period, tag.scenario) = result.x[c];
  }
  sol.objective = prob.objective_at(result.x);
  return sol;
}

void encode_terminal_powers(const CanonicalProblem& prob, const Array3& power,
                            Eigen::VectorXd& x) {
  if (x.size() != prob.n) x = Eigen::VectorXd::Zero(prob.n);
  for (int s = 0; s < prob.S; ++s)
    for (int t = 0; t < prob.T; ++t)
      for (int m = 0; m < prob.M; ++m)
        x[prob.terminal_col(m, t, s)] = power(m, t, s);
}

Solution solve_network(const Network& net, const SolverSettings& settings,
                       const Array3* delta, const Eigen::VectorXd* x0,
                       const Eigen::VectorXd* y0) {
  CanonicalProblem prob = compile(net, delta);
  QpResult res = solve_qp(prob, settings, x0, y0);
  return decode(prob, res);
}

}  // namespace gridflow
