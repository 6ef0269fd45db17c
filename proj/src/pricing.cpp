#include "gridflow/pricing.hpp"

#include <cmath>
#include <sstream>

namespace gridflow {

Eigen::MatrixXd PriceSheet::device_prices(const Network& net, DeviceId d,
                                          int scenario) const {
  const Device& dev = net.device(d);
  Eigen::MatrixXd lam(dev.terminals.size(), price.dim1());
  for (size_t i = 0; i < dev.terminals.size(); ++i) {
    NetId n = *net.terminal(dev.terminals[i]).net;
    for (int t = 0; t < price.dim1(); ++t)
      lam(static_cast<int>(i), t) = price(n, t, scenario);
  }
  return lam;
}

PriceSheet price_sheet(const Network& net, const Solution& sol) {
  PriceSheet sheet;
  sheet.price = sol.price;
  for (int s = 0; s < sheet.price.dim2(); ++s)
    for (int t = 0; t < sheet.price.dim1(); ++t)
      for (int n = 0; n < sheet.price.dim0(); ++n)
        if (sheet.price(n, t, s) < -1e-9) {
          sheet.has_negative = true;
          std::ostringstream os;
          os << "negative price " << sheet.price(n, t, s) << " at net "
             << net.net(n).name << " (period " << t << ", scenario " << s
             << "); often a sign of poor network design";
          sheet.warnings.push_back(os.str());
        }
  return sheet;
}

PaymentLedger payments(const Network& net, const Solution& sol) {
  if (!sol.optimal())
    throw Error(std::string("payments require an optimal solution, got ") +
                to_string(sol.report.status));
  const int T = sol.power.dim1();
  const int S = sol.power.dim2();
  const auto& pi = net.probabilities();

  PaymentLedger ledger;
  ledger.device_total.assign(net.num_devices(), 0.0);
  ledger.net_period_sum = Array3(net.num_nets(), T, S);
  ledger.device_period.assign(net.num_devices(), Array3(1, T, S));

  for (int m = 0; m < net.num_terminals(); ++m) {
    const Terminal& term = net.terminal(m);
    NetId n = *term.net;
    // Money conservation is recorded at every net, including composite
    // internals.  Attribution: exposed composite terminals bill the parent;
    // purely internal exchanges cancel at their hidden net.
    DeviceId owner = term.device;
    bool attribute = true;
    if (net.device(owner).parent >= 0) {
      const auto* comp =
          std::get_if<Composite>(&net.device(net.device(owner).parent).spec);
      bool exposed = false;
      if (comp)
        for (int g : comp->exposed_terminals)
          if (g == m) exposed = true;
      if (exposed)
        owner = net.device(owner).parent;
      else
        attribute = false;
    }
    for (int s = 0; s < S; ++s)
      for (int t = 0; t < T; ++t) {
        double pay = sol.price(n, t, s) * sol.power(m, t, s);
        ledger.net_period_sum(n, t, s) += pay;
        if (attribute) {
          ledger.device_period[owner](0, t, s) += pay;
          ledger.device_total[owner] += pi[s] * pay;
        }
      }
  }
  for (double v : ledger.device_total) ledger.grand_total += v;
  return ledger;
}

PriceCheck price_check(const Network& net, NetId n, int t, int s, double eps,
                       const SolverSettings& settings) {
  const int N = net.num_nets(), T = net.horizon(), S = net.num_scenarios();
  Solution base = solve_network(net, settings);
  if (!base.optimal()) throw Error("price_check requires a solvable base problem");
  PriceCheck pc;
  pc.reported = base.price(n, t, s);

  auto perturbed = [&](double e) {
    Array3 delta(N, T, S, 0.0);
    delta(n, t, s) = e;
    return solve_network(net, settings, &delta);
  };
  Solution plus = perturbed(eps);
  Solution minus = perturbed(-eps);
  const double pi = net.probabilities()[s];
  if (plus.optimal() && minus.optimal()) {
    pc.finite_difference =
        (plus.objective - minus.objective) / (2 * eps * pi);
  } else if (minus.optimal()) {
    pc.one_sided = true;
    pc.finite_difference = (base.objective - minus.objective) / (eps * pi);
  } else if (plus.optimal()) {
    pc.one_sided = true;
    pc.finite_difference = (plus.objective - base.objective) / (eps * pi);
  } else {
    throw Error("both perturbed problems infeasible in price_check");
  }
  pc.gap = std::abs(pc.finite_difference - pc.reported);
  return pc;
}

namespace {

struct Subgradient {
  double lo, hi;
};

// Subdifferential of the single-period cost at p, including the normal cone
// of the device's box, for separable single-terminal devices.
Subgradient subgradient_at(const DeviceSpec& spec, double p, double avail,
                           double fix, double tol) {
  Subgradient g{0, 0};
  if (const auto* gen = std::get_if<GenericGenerator>(&spec)) {
    double u = -p;
    double base = 2 * gen->alpha * p - gen->beta;  // d/dp of alpha p^2 - beta p
    g = {base, base};
    if (u <= gen->p_min + tol) g.hi = kInf;    // p at upper end of its box
    if (u >= gen->p_max - tol) g.lo = -kInf;   // p at lower end
  } else if (std::get_if<RenewableGenerator>(&spec)) {
    g = {0, 0};
    if (p <= -avail + tol) g.lo = -kInf;
    if (p >= -tol) g.hi = kInf;
  } else if (std::get_if<FixedGenerator>(&spec) || std::get_if<FixedLoad>(&spec)) {
    (void)fix;
    g = {-kInf, kInf};
  } else if (const auto* l = std::get_if<CurtailableLoad>(&spec)) {
    g = {-l->lambda_curt, -l->lambda_curt};
    if (p <= l->p_min + tol) g.lo = -kInf;
    if (p >= l->p_des - tol) g.hi = kInf;
  } else if (const auto* gt = std::get_if<GridTie>(&spec)) {
    if (std::abs(p) <= tol)
      g = {-gt->price_buy, -gt->price_sell};
    else if (p < 0)
      g = {-gt->price_buy, -gt->price_buy};
    else
      g = {-gt->price_sell, -gt->price_sell};
    if (p <= -gt->max_buy + tol) g.lo = -kInf;
    if (p >= gt->max_sell - tol) g.hi = kInf;
  } else if (std::get_if<PowerDissipator>(&spec)) {
    g = {0, 0};
    if (p <= tol) g.lo = -kInf;
  }
  return g;
}

bool is_separable_single_terminal(const DeviceSpec& spec) {
  if (const auto* gen = std::get_if<GenericGenerator>(&spec))
    return !gen->ramp_up && !gen->ramp_down &&
           gen->smoothing == SmoothingKind::None;
  return std::get_if<RenewableGenerator>(&spec) ||
         std::get_if<FixedGenerator>(&spec) || std::get_if<FixedLoad>(&spec) ||
         std::get_if<CurtailableLoad>(&spec) || std::get_if<GridTie>(&spec) ||
         std::get_if<PowerDissipator>(&spec);
}

}  // namespace

ProfitCheck profit_check(const Network& net, const Solution& sol, DeviceId d,
                         double tol) {
  const Device& dev = net.device(d);
  ProfitCheck out;
  if (!is_separable_single_terminal(dev.spec)) {
    out.note = "cost couples periods or terminals; not checked";
    return out;
  }
  out.checked = true;
  const int T = sol.power.dim1(), S = sol.power.dim2();
  const int m = dev.terminals[0];
  const NetId n = *net.terminal(m).net;
  const double bound_tol = 1e-6;
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < T; ++t) {
      if (S > 1 && t == 0 && s > 0) continue;  // common column checked once
      double p = sol.power(m, t, s);
      double lam = (S > 1 && t == 0) ? sol.price(n, t, s) : sol.price_raw(n, t, s);
      double avail = 0, fix = 0;
      if (const auto* r = std::get_if<RenewableGenerator>(&dev.spec))
        avail = r->p_avail.at(t, s);
      ProfitEntry e;
      e.local_terminal = 0;
      e.period = t;
      e.scenario = s;
      Subgradient g = subgradient_at(dev.spec, p, avail, fix, bound_tol);
      if (g.lo == g.hi) {
        e.residual = g.lo + lam;  // grad f + lambda
        out.max_residual = std::max(out.max_residual, std::abs(*e.residual));
      } else {
        e.interval_lo = g.lo;
        e.interval_hi = g.hi;
        e.interval_ok = (-lam >= g.lo - tol) && (-lam <= g.hi + tol);
        out.intervals_ok = out.intervals_ok && e.interval_ok;
      }
      out.entries.push_back(e);
    }
  }
  return out;
}

}  // namespace gridflow
