#include "gridflow/mpc.hpp"

#include <algorithm>
#include <cmath>

namespace gridflow {

namespace {

const std::vector<double>* find_series(const SimInput& input, DeviceId d,
                                       Quantity q) {
  for (const auto& s : input.series)
    if (s.device == d && s.quantity == q) return &s.truth;
  return nullptr;
}

Schedule slice_schedule(const Schedule& s, int t0, int w) {
  if (s.periods == 1) return s;
  Schedule out;
  out.periods = w;
  out.scenarios = s.scenarios;
  out.values.reserve(static_cast<size_t>(w) * s.scenarios);
  for (int sc = 0; sc < s.scenarios; ++sc)
    for (int t = 0; t < w; ++t) out.values.push_back(s.at(t0 + t, sc));
  return out;
}

// Forecast the next w-1 true values of a bound series at origin t0.
std::vector<double> make_forecast(const ForecastBinding& fb,
                                  const std::vector<double>& truth, int t0,
                                  int w, int time_offset) {
  std::vector<double> out(std::max(0, w - 1));
  switch (fb.kind) {
    case ForecastBinding::Kind::Oracle:
      for (int tau = 1; tau < w; ++tau) out[tau - 1] = truth[t0 + tau];
      break;
    case ForecastBinding::Kind::Persistence:
      for (int tau = 1; tau < w; ++tau) out[tau - 1] = fb.clip.apply(truth[t0]);
      break;
    case ForecastBinding::Kind::Model: {
      const auto& pipe = fb.pipeline;
      const int M = pipe.ar.lags;
      std::vector<double> recent(M);
      // residuals before the run start are taken as zero
      for (int j = 0; j < M; ++j) {
        int idx = t0 - j;
        recent[j] = idx >= 0
                        ? truth[idx]
                        : pipe.baseline.value(time_offset + idx);
      }
      auto fc = pipe.forecast_at(recent, time_offset + t0);
      if (static_cast<int>(fc.size()) < w - 1)
        throw Error("forecaster horizon shorter than the planning window");
      for (int tau = 1; tau < w; ++tau) out[tau - 1] = fc[tau - 1];
      break;
    }
  }
  return out;
}

struct State {
  std::map<DeviceId, double> storage_energy;
  std::map<DeviceId, double> thermal_temp;
  std::map<DeviceId, double> deferrable_delivered;
};

State initial_state(const Network& base) {
  State st;
  for (DeviceId d = 0; d < base.num_devices(); ++d) {
    if (const auto* s = std::get_if<IdealStorage>(&base.device(d).spec))
      st.storage_energy[d] = s->energy_init;
    else if (const auto* th = std::get_if<ThermalLoad>(&base.device(d).spec))
      st.thermal_temp[d] = th->temp_init;
    else if (std::get_if<DeferrableLoad>(&base.device(d).spec))
      st.deferrable_delivered[d] = 0.0;
  }
  return st;
}

// Window problem over [t0, t0+w), with K scenarios.  Column 0 carries true
// values; later columns carry forecasts (per scenario in robust mode).
Network window_network(const Network& base, const SimInput& input,
                       const SimulationConfig& config, const State& state,
                       int t0, int w, int k,
                       const std::map<DeviceId, std::vector<std::vector<double>>>&
                           scenario_forecasts) {
  Network win = base;
  win.set_horizon(w);
  win.set_scenarios(k, {});
  const bool mpc_mode = config.mode != SimMode::Dopf;

  for (DeviceId d = 0; d < win.num_devices(); ++d) {
    Device& dev = win.device(d);
    if (auto* g = std::get_if<FixedGenerator>(&dev.spec)) {
      g->p_fix = slice_schedule(g->p_fix, t0, w);
    } else if (auto* g = std::get_if<RenewableGenerator>(&dev.spec)) {
      const std::vector<double>* truth =
          find_series(input, d, Quantity::RenewableAvail);
      if (truth) {
        auto it = scenario_forecasts.find(d);
        Schedule sched;
        sched.periods = w;
        sched.scenarios = k;
        sched.values.resize(static_cast<size_t>(w) * k);
        for (int s = 0; s < k; ++s) {
          sched.values[static_cast<size_t>(s) * w] = (*truth)[t0];
          for (int tau = 1; tau < w; ++tau)
            sched.values[static_cast<size_t>(s) * w + tau] =
                std::max(0.0, it->second[s][tau - 1]);
        }
        g->p_avail = std::move(sched);
      } else {
        g->p_avail = slice_schedule(g->p_avail, t0, w);
      }
    } else if (auto* l = std::get_if<FixedLoad>(&dev.spec)) {
      const std::vector<double>* truth =
          find_series(input, d, Quantity::FixedLoadPower);
      if (truth) {
        auto it = scenario_forecasts.find(d);
        Schedule sched;
        sched.periods = w;
        sched.scenarios = k;
        sched.values.resize(static_cast<size_t>(w) * k);
        for (int s = 0; s < k; ++s) {
          sched.values[static_cast<size_t>(s) * w] = (*truth)[t0];
          for (int tau = 1; tau < w; ++tau)
            sched.values[static_cast<size_t>(s) * w + tau] = it->second[s][tau - 1];
        }
        l->p_fix = std::move(sched);
      } else {
        l->p_fix = slice_schedule(l->p_fix, t0, w);
      }
    } else if (auto* th = std::get_if<ThermalLoad>(&dev.spec)) {
      th->ambient = slice_schedule(th->ambient, t0, w);
      if (mpc_mode || t0 > 0) th->temp_init = state.thermal_temp.at(d);
    } else if (auto* st = std::get_if<IdealStorage>(&dev.spec)) {
      if (mpc_mode)
        st->energy_init = std::clamp(state.storage_energy.at(d),
                                     st->energy_min, st->energy_max);
      TerminalCondition tc = TerminalCondition::none();
      auto it = config.terminal.find(d);
      if (it != config.terminal.end())
        tc = it->second;
      else if (mpc_mode)
        tc = TerminalCondition::constraint(
            std::get<IdealStorage>(base.device(d).spec).energy_init);
      st->energy_final.reset();
      st->final_energy_price.reset();
      switch (tc.kind) {
        case TerminalCondition::Kind::None:
          break;
        case TerminalCondition::Kind::Constraint:
          st->energy_final = tc.value;
          break;
        case TerminalCondition::Kind::Cost:
          st->final_energy_price = tc.value;
          break;
      }
    } else if (auto* def = std::get_if<DeferrableLoad>(&dev.spec)) {
      const double h = base.period_hours();
      double remaining =
          std::max(0.0, def->energy - (mpc_mode ? state.deferrable_delivered.at(d)
                                                : 0.0));
      int a = std::max(def->start - t0, 0);
      int e = std::min(def->end - t0, w - 1);
      if (e < a) {
        // no overlap with the activity window: the load draws nothing here
        def->start = 0;
        def->end = 0;
        def->energy = 0.0;
        def->energy_min = 0.0;
      } else {
        int periods_after = std::max(0, def->end - (t0 + w - 1));
        double future_cap = def->p_max * h * periods_after;
        def->start = a;
        def->end = e;
        def->energy = remaining;
        def->energy_min = std::max(0.0, remaining - future_cap);
      }
    }
  }
  return win;
}

// Soften window-specific equality rows so a forecast-driven infeasibility
// still yields an executable plan: slacks with a linear penalty.
CanonicalProblem soften(const CanonicalProblem& prob, double penalty) {
  CanonicalProblem out = prob;
  std::vector<int> rows;
  for (int i = 0; i < prob.m; ++i) {
    const RowTag& tag = prob.row_tags[i];
    if (tag.kind != RowTag::Kind::Device) continue;
    std::string label = tag.label;
    // the executed column holds true data; never soften it
    bool per_period = label == "fixed demand" || label == "fixed output";
    if (per_period && tag.period > 0)
      rows.push_back(i);
    else if (label == "energy window" || label == "terminal energy")
      rows.push_back(i);
  }
  if (rows.empty()) return out;
  const int extra = static_cast<int>(rows.size()) * 2;
  out.P.conservativeResize(prob.n + extra, prob.n + extra);
  out.C.conservativeResize(prob.m + extra, prob.n + extra);
  out.q.conservativeResize(prob.n + extra);
  out.l.conservativeResize(prob.m + extra);
  out.u.conservativeResize(prob.m + extra);
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < prob.n; ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(prob.C, j); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), j, it.value());
  for (size_t kidx = 0; kidx < rows.size(); ++kidx) {
    int cp = prob.n + 2 * static_cast<int>(kidx);
    int cm = cp + 1;
    trip.emplace_back(rows[kidx], cp, 1.0);
    trip.emplace_back(rows[kidx], cm, -1.0);
    int rp = prob.m + 2 * static_cast<int>(kidx);
    int rm = rp + 1;
    trip.emplace_back(rp, cp, 1.0);
    trip.emplace_back(rm, cm, 1.0);
    out.q[cp] = penalty;
    out.q[cm] = penalty;
    out.l[rp] = 0;
    out.u[rp] = kInf;
    out.l[rm] = 0;
    out.u[rm] = kInf;
    out.col_tags.push_back({ColTag::Kind::AbsCharge, -1, 0, 0, 0});
    out.col_tags.push_back({ColTag::Kind::AbsCharge, -1, 0, 0, 0});
    out.row_tags.push_back({RowTag::Kind::Device, -1, -1, -1, "slack", 0, 0, -1});
    out.row_tags.push_back({RowTag::Kind::Device, -1, -1, -1, "slack", 0, 0, -1});
  }
  out.C.setFromTriplets(trip.begin(), trip.end());
  out.n = prob.n + extra;
  out.m = prob.m + extra;
  return out;
}

double smoothing_cost(const GenericGenerator& g, double dp) {
  if (g.smoothing == SmoothingKind::Quadratic)
    return g.smoothing_weight * dp * dp;
  if (g.smoothing == SmoothingKind::L1)
    return g.smoothing_weight * std::abs(dp);
  return 0.0;
}

}  // namespace

double realized_period_cost(const Network& base, const SimInput& input, int t,
                            const std::vector<double>& executed) {
  (void)input;
  double cost = 0;
  for (DeviceId d = 0; d < base.num_devices(); ++d) {
    const Device& dev = base.device(d);
    if (const auto* g = std::get_if<GenericGenerator>(&dev.spec)) {
      double u = -executed[dev.terminals[0]];
      cost += g->alpha * u * u + g->beta * u + g->gamma;
    } else if (const auto* l = std::get_if<CurtailableLoad>(&dev.spec)) {
      cost += l->lambda_curt * (l->p_des - executed[dev.terminals[0]]);
    } else if (const auto* gt = std::get_if<GridTie>(&dev.spec)) {
      double p = executed[dev.terminals[0]];
      cost += std::max(-gt->price_buy * p, -gt->price_sell * p);
    } else if (const auto* st = std::get_if<IdealStorage>(&dev.spec)) {
      cost += st->cycle_cost * std::abs(executed[dev.terminals[0]]);
    } else if (const auto* ll = std::get_if<LosslessLine>(&dev.spec)) {
      double p = executed[dev.terminals[0]];
      cost += ll->flow_cost * p * p;
    }
  }
  (void)t;
  return cost;
}

namespace {

SimulationTrace run_loop(const Network& base, const SimInput& input,
                         const SimulationConfig& config) {
  const int L = input.run_length;
  const int M = base.num_terminals();
  const int N = base.num_nets();
  if (L <= 0) throw Error("run length must be positive");
  for (const auto& s : input.series)
    if (static_cast<int>(s.truth.size()) < L)
      throw Error("realized series for " + base.device(s.device).name +
                  " shorter than the run");

  const bool dopf = config.mode == SimMode::Dopf;
  const bool robust = config.mode == SimMode::RobustMpc;
  const int K = robust ? std::max(1, config.scenario_count) : 1;

  SimulationTrace trace;
  trace.keep_planned = config.keep_planned;
  trace.device_payment_total.assign(base.num_devices(), 0.0);
  State state = initial_state(base);
  std::vector<double> prev_exec;
  Eigen::VectorXd warm_x, warm_y;

  const int total_steps = dopf ? 1 : L;
  for (int t0 = 0; t0 < total_steps; ++t0) {
    const int w = dopf ? L : std::min(config.horizon, L - t0);

    // forecasts for bound, uncertain quantities; the prescient path injects
    // the realized series as an oracle forecast
    std::map<DeviceId, std::vector<std::vector<double>>> fc;
    for (const auto& s : input.series) {
      ForecastBinding binding;
      if (dopf) {
        binding.kind = ForecastBinding::Kind::Oracle;
      } else {
        auto fit = input.forecasters.find(s.device);
        if (fit != input.forecasters.end()) binding = fit->second;
      }
      auto point = make_forecast(binding, s.truth, t0, w, input.time_offset);
      std::vector<std::vector<double>> per_scenario;
      if (robust && K > 1 && binding.kind == ForecastBinding::Kind::Model &&
          binding.pipeline.error && w > 1) {
        // shrinking final windows use the leading block of the error model
        forecast::ErrorModel err = *binding.pipeline.error;
        const int h = static_cast<int>(point.size());
        if (err.mu.size() > h) {
          err.mu = err.mu.head(h).eval();
          err.sigma = err.sigma.topLeftCorner(h, h).eval();
        }
        per_scenario = forecast::sample_scenarios(
            point, err, K,
            config.seed * 0x9e3779b97f4a7c15ULL + 0x100000001b3ULL * t0 +
                static_cast<uint64_t>(s.device),
            binding.clip);
      } else {
        per_scenario.assign(K, point);
      }
      fc[s.device] = std::move(per_scenario);
    }

    Network win = window_network(base, input, config, state, t0, w, K, fc);
    CanonicalProblem prob = compile(win);
    const Eigen::VectorXd* x0 = nullptr;
    const Eigen::VectorXd* y0 = nullptr;
    if (config.warm_start && warm_x.size() == prob.n && warm_y.size() == prob.m) {
      x0 = &warm_x;
      y0 = &warm_y;
    }
    QpResult res = solve_qp(prob, config.solver, x0, y0);
    bool softened = false;
    if (res.report.status == SolveStatus::PrimalInfeasible && !dopf) {
      CanonicalProblem soft = soften(prob, config.infeasibility_penalty);
      QpResult res2 = solve_qp(soft, config.solver);
      if (res2.report.status == SolveStatus::Optimal) {
        softened = true;
        res2.x.conservativeResize(prob.n);
        res2.y.conservativeResize(prob.m);
        res = std::move(res2);
      }
    }
    if (res.report.status != SolveStatus::Optimal && !softened) {
      throw Error("window at period " + std::to_string(t0) + " " +
                  to_string(res.report.status) + " (worst: " +
                  (res.report.worst_row >= 0
                       ? prob.describe_row(
                             std::min(res.report.worst_row, prob.m - 1), win)
                       : "") +
                  ")");
    }
    warm_x = res.x;
    warm_y = res.y;
    Solution sol = decode(prob, res);
    if (trace.keep_planned) trace.planned.push_back(sol);

    const int exec_cols = dopf ? w : 1;
    for (int col = 0; col < exec_cols; ++col) {
      StepRecord rec;
      rec.period = t0 + col;
      rec.window_length = w;
      rec.report = res.report;
      rec.softened = softened;
      rec.executed.resize(M);
      for (int m = 0; m < M; ++m) {
        double v = 0;
        for (int s = 0; s < prob.S; ++s)
          v += win.probabilities()[s] * sol.power(m, col, s);
        rec.executed[m] = v;
      }
      rec.price.resize(N);
      for (int n = 0; n < N; ++n) rec.price[n] = sol.price(n, col, 0);
      rec.payment.assign(base.num_devices(), 0.0);
      for (int m = 0; m < M; ++m) {
        const Terminal& term = base.terminal(m);
        DeviceId owner = term.device;
        if (base.device(owner).parent >= 0) owner = base.device(owner).parent;
        rec.payment[owner] += rec.price[*term.net] * rec.executed[m];
      }
      rec.realized_cost =
          realized_period_cost(base, input, rec.period, rec.executed);
      // smoothing / irregular-change costs between consecutive executed flows
      for (DeviceId d = 0; d < base.num_devices(); ++d) {
        const auto* g = std::get_if<GenericGenerator>(&base.device(d).spec);
        if (!g || g->smoothing == SmoothingKind::None) continue;
        if (!prev_exec.empty()) {
          double dp = rec.executed[base.device(d).terminals[0]] -
                      prev_exec[base.device(d).terminals[0]];
          rec.realized_cost += smoothing_cost(*g, dp);
        }
      }

      // carry state with the same arithmetic as the compiled recurrences
      for (auto& [d, e] : state.storage_energy) {
        const auto& st = std::get<IdealStorage>(base.device(d).spec);
        e = (1.0 - st.leakage) * e +
            base.period_hours() * rec.executed[base.device(d).terminals[0]];
      }
      for (auto& [d, th] : state.thermal_temp) {
        const auto& spec = std::get<ThermalLoad>(base.device(d).spec);
        double amb = spec.ambient.at(rec.period, 0);
        th += (spec.conductivity / spec.heat_capacity) * (amb - th) -
              (spec.cop / spec.heat_capacity) *
                  rec.executed[base.device(d).terminals[0]];
      }
      for (auto& [d, delivered] : state.deferrable_delivered) {
        const auto& spec = std::get<DeferrableLoad>(base.device(d).spec);
        if (rec.period >= spec.start && rec.period <= spec.end)
          delivered +=
              base.period_hours() * rec.executed[base.device(d).terminals[0]];
      }

      prev_exec = rec.executed;
      trace.realized_total += rec.realized_cost;
      for (DeviceId d = 0; d < base.num_devices(); ++d)
        trace.device_payment_total[d] += rec.payment[d];
      trace.steps.push_back(std::move(rec));
    }
  }
  return trace;
}

}  // namespace

PaymentLedger planned_payments(const Network& window_net, const Solution& plan) {
  PaymentLedger ledger = payments(window_net, plan);
  ledger.planned = true;
  return ledger;
}

SimulationTrace run_dopf(const Network& base, const SimInput& input,
                         const SimulationConfig& config) {
  SimulationConfig c = config;
  c.mode = SimMode::Dopf;
  return run_loop(base, input, c);
}

SimulationTrace run_mpc(const Network& base, const SimInput& input,
                        const SimulationConfig& config) {
  SimulationConfig c = config;
  c.mode = SimMode::Mpc;
  c.scenario_count = 1;
  return run_loop(base, input, c);
}

SimulationTrace run_robust_mpc(const Network& base, const SimInput& input,
                               const SimulationConfig& config) {
  SimulationConfig c = config;
  c.mode = SimMode::RobustMpc;
  return run_loop(base, input, c);
}

}  // namespace gridflow
