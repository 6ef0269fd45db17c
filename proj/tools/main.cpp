#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gridflow/io.hpp"
#include "gridflow/mpc.hpp"
#include "gridflow/pricing.hpp"

namespace fs = std::filesystem;
using namespace gridflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitUnbounded = 3;

int status_exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return kExitOk;
    case SolveStatus::PrimalInfeasible: return kExitInfeasible;
    case SolveStatus::DualInfeasible: return kExitUnbounded;
    case SolveStatus::MaxIterations: return kExitUsage;
  }
  return kExitUsage;
}

void print_warnings(const Network& net) {
  for (const auto& w : net.warnings()) std::cerr << "warning: " << w << "\n";
}

struct PerturbSpec {
  std::string net;
  int t = 0, s = 0;
  double eps = 0.0;
};

PerturbSpec parse_perturb(const std::string& text) {
  PerturbSpec p;
  std::stringstream ss(text);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, ',')) parts.push_back(part);
  if (parts.size() != 4)
    throw Error("--perturb expects net,period,scenario,eps");
  p.net = parts[0];
  p.t = std::stoi(parts[1]);
  p.s = std::stoi(parts[2]);
  p.eps = std::stod(parts[3]);
  return p;
}

int cmd_solve(const std::string& network_file, bool dynamic,
              const std::string& out_dir, const std::string& perturb,
              const std::string& dump_qp) {
  auto loaded = io::load_network(network_file);
  Network& net = loaded.network;
  print_warnings(net);
  if (net.horizon() > 1 && !dynamic)
    std::cerr << "note: horizon T=" << net.horizon()
              << "; solving the dynamic problem (--dynamic)\n";
  if (!dump_qp.empty()) {
    std::ofstream f(dump_qp);
    dump_triplets(f, compile(net));
  }
  auto sol = solve_network(net);
  if (!sol.optimal()) {
    std::cerr << "solve failed: " << to_string(sol.report.status) << "\n";
    if (sol.report.worst_row >= 0) {
      auto prob = compile(net);
      std::cerr << "  offending row: "
                << prob.describe_row(sol.report.worst_row, net) << "\n";
    }
    return status_exit_code(sol.report.status);
  }
  auto ledger = payments(net, sol);
  auto sheet = price_sheet(net, sol);
  for (const auto& w : sheet.warnings) std::cerr << "warning: " << w << "\n";

  fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "flows.csv");
    io::write_flows_csv(f, net, sol);
    std::ofstream p(dir / "prices.csv");
    io::write_prices_csv(p, net, sol);
    std::ofstream pay(dir / "payments.csv");
    io::write_payments_csv(pay, net, sol, ledger);
  }
  std::cout << io::summary(net, sol, ledger);
  std::cout << "Objective: " << sol.objective << "\n";

  if (!perturb.empty()) {
    PerturbSpec ps = parse_perturb(perturb);
    Array3 delta(net.num_nets(), net.horizon(), net.num_scenarios());
    delta(net.find_net(ps.net), ps.t, ps.s) = ps.eps;
    auto psol = solve_network(net, {}, &delta);
    if (!psol.optimal()) {
      std::cout << "Perturbed problem: " << to_string(psol.report.status) << "\n";
    } else {
      std::cout << "Perturbation " << ps.net << " t=" << ps.t << " s=" << ps.s
                << " eps=" << ps.eps << ": objective delta "
                << (psol.objective - sol.objective) << " (price "
                << sol.price(net.find_net(ps.net), ps.t, ps.s) << ")\n";
    }
  }
  return kExitOk;
}

forecast::Pipeline train_pipeline(const io::LoadedNetwork::ForecastConfig& cfg,
                                  const fs::path& base_dir, int horizon,
                                  int64_t* train_start, int64_t* train_step) {
  if (cfg.train_series.empty())
    throw Error(cfg.device + ": model forecaster needs a train series");
  auto ts = io::read_timeseries(base_dir / cfg.train_series);
  *train_start = ts.start_epoch;
  *train_step = ts.step_seconds;
  forecast::Pipeline pipe;
  pipe.clip = {cfg.clip_lo, cfg.clip_hi};
  pipe.baseline = forecast::fit_baseline(ts.values, cfg.periods);
  auto resid = pipe.baseline.residuals(ts.values);
  int lags = cfg.lags > 0 ? cfg.lags : horizon;
  pipe.ar = forecast::fit_residual_ar(resid, lags, horizon + 1, cfg.ridge);
  if (!cfg.validation_series.empty()) {
    auto vs = io::read_timeseries(base_dir / cfg.validation_series);
    int offset =
        static_cast<int>((vs.start_epoch - ts.start_epoch) / ts.step_seconds);
    pipe.error = forecast::fit_error_model(pipe.baseline, pipe.ar, vs.values,
                                           offset, pipe.clip);
  }
  return pipe;
}

int cmd_simulate(const std::string& network_file, const std::string& modes_arg,
                 const std::string& data_dir, int horizon, int scenarios,
                 uint64_t seed, const std::string& out_dir) {
  auto loaded = io::load_network(network_file);
  Network& net = loaded.network;
  print_warnings(net);
  const fs::path base_dir = fs::path(network_file).parent_path();
  const fs::path data(data_dir);

  SimInput input;
  int64_t run_start = 0, run_step = 0;
  for (DeviceId d = 0; d < net.num_devices(); ++d) {
    const Device& dev = net.device(d);
    if (dev.hidden) continue;
    Quantity q;
    if (std::get_if<FixedLoad>(&dev.spec)) q = Quantity::FixedLoadPower;
    else if (std::get_if<RenewableGenerator>(&dev.spec)) q = Quantity::RenewableAvail;
    else continue;
    fs::path file = data / (dev.name + ".csv");
    if (!fs::exists(file)) continue;
    auto ts = io::read_timeseries(file);
    if (input.series.empty()) {
      input.run_length = static_cast<int>(ts.values.size());
      run_start = ts.start_epoch;
      run_step = ts.step_seconds;
    } else if (static_cast<int>(ts.values.size()) != input.run_length) {
      throw Error("realized series lengths differ in " + data_dir);
    }
    input.series.push_back({d, q, ts.values});
  }
  if (input.series.empty())
    throw Error("no realized series found in " + data_dir +
                " (expected <device>.csv per uncertain device)");

  for (const auto& fc : loaded.forecast_configs) {
    DeviceId d = net.find_device(fc.device);
    ForecastBinding binding;
    if (fc.kind == "oracle") {
      binding.kind = ForecastBinding::Kind::Oracle;
    } else if (fc.kind == "persistence") {
      binding.kind = ForecastBinding::Kind::Persistence;
      binding.clip = {fc.clip_lo, fc.clip_hi};
    } else if (fc.kind == "model") {
      binding.kind = ForecastBinding::Kind::Model;
      int64_t tstart = 0, tstep = 0;
      binding.pipeline = train_pipeline(fc, base_dir, horizon, &tstart, &tstep);
      binding.clip = binding.pipeline.clip;
      if (tstep != run_step)
        throw Error(fc.device + ": train and realized series step differ");
      input.time_offset = static_cast<int>((run_start - tstart) / tstep);
    } else {
      throw Error(fc.device + ": unknown forecaster kind " + fc.kind);
    }
    input.forecasters[d] = binding;
  }

  std::vector<std::string> modes;
  {
    std::stringstream ss(modes_arg);
    std::string part;
    while (std::getline(ss, part, ',')) modes.push_back(part);
  }
  SimulationConfig cfg;
  cfg.horizon = horizon;
  cfg.scenario_count = scenarios;
  cfg.seed = seed;

  fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  std::map<std::string, SimulationTrace> traces;
  for (const auto& mode : modes) {
    SimulationTrace trace;
    if (mode == "dopf") trace = run_dopf(net, input, cfg);
    else if (mode == "mpc") trace = run_mpc(net, input, cfg);
    else if (mode == "rmpc") trace = run_robust_mpc(net, input, cfg);
    else throw Error("unknown mode " + mode + " (expected dopf|mpc|rmpc)");
    std::ofstream f(dir / ("trace_" + mode + ".csv"));
    io::write_trace_csv(f, net, trace);
    traces[mode] = std::move(trace);
    int softened = 0;
    for (const auto& s : traces[mode].steps) softened += s.softened ? 1 : 0;
    std::cout << "mode " << mode << ": realized cost "
              << traces[mode].realized_total << " over "
              << traces[mode].steps.size() << " periods";
    if (softened) std::cout << " (" << softened << " softened windows)";
    std::cout << "\n";
  }

  std::cout << "\nTotal device payments\n";
  {
    std::ostringstream head;
    head << "device";
    for (const auto& [mode, _] : traces) head << "," << mode;
    std::cout << head.str() << "\n";
    for (DeviceId d = 0; d < net.num_devices(); ++d) {
      if (net.device(d).hidden) continue;
      std::cout << net.device(d).name;
      for (const auto& [mode, trace] : traces)
        std::cout << "," << trace.device_payment_total[d];
      std::cout << "\n";
    }
  }
  if (traces.count("dopf")) {
    double base = traces["dopf"].realized_total;
    for (const auto& [mode, trace] : traces) {
      if (mode == "dopf") continue;
      bool ok = base <= trace.realized_total + 1e-6 * std::abs(base);
      std::cout << "prescience check: cost(dopf) <= cost(" << mode << "): "
                << (ok ? "ok" : "VIOLATED") << " (" << base << " vs "
                << trace.realized_total << ")\n";
      if (!ok) return kExitUsage;
    }
  }
  return kExitOk;
}

std::vector<double> parse_periods(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
  if (out.empty()) throw Error("--periods expects a comma-separated list");
  return out;
}

int cmd_forecast(const std::string& action, const std::string& series_file,
                 const std::string& periods_arg, int lags, int horizon,
                 double ridge, const std::string& validation_file,
                 const std::string& model_file, int k, uint64_t seed,
                 const std::string& clip_arg, const std::string& out_file) {
  if (action == "fit") {
    auto ts = io::read_timeseries(series_file);
    forecast::Pipeline pipe;
    pipe.baseline = forecast::fit_baseline(ts.values, parse_periods(periods_arg));
    auto resid = pipe.baseline.residuals(ts.values);
    pipe.ar = forecast::fit_residual_ar(resid, lags > 0 ? lags : horizon,
                                        horizon, ridge);
    if (!clip_arg.empty()) {
      auto comma = clip_arg.find(',');
      if (comma == std::string::npos) throw Error("--clip expects lo,hi");
      pipe.clip = {std::stod(clip_arg.substr(0, comma)),
                   std::stod(clip_arg.substr(comma + 1))};
    }
    if (!validation_file.empty()) {
      auto vs = io::read_timeseries(validation_file);
      int offset = static_cast<int>((vs.start_epoch - ts.start_epoch) /
                                    ts.step_seconds);
      pipe.error = forecast::fit_error_model(pipe.baseline, pipe.ar, vs.values,
                                             offset, pipe.clip);
    }
    std::ofstream(out_file.empty() ? "model.json" : out_file)
        << io::pipeline_to_json(pipe);
    std::cout << "fitted baseline with " << pipe.baseline.periods.size()
              << " periods and a " << (pipe.ar.horizon - 1) << "x"
              << pipe.ar.lags << " AR coefficient matrix\n";
    return kExitOk;
  }

  std::ifstream mf(model_file);
  if (!mf) throw Error("cannot open model file " + model_file);
  std::stringstream buf;
  buf << mf.rdbuf();
  auto pipe = io::pipeline_from_json(buf.str());
  auto ts = io::read_timeseries(series_file);
  if (static_cast<int>(ts.values.size()) < pipe.ar.lags)
    throw Error("series shorter than the model's lag window");
  std::vector<double> recent(pipe.ar.lags);
  int t0 = static_cast<int>(ts.values.size()) - 1;
  for (int j = 0; j < pipe.ar.lags; ++j) recent[j] = ts.values[t0 - j];
  auto fc = pipe.forecast_at(recent, static_cast<double>(t0));

  io::TimeSeries out;
  out.step_seconds = ts.step_seconds;
  out.start_epoch = ts.start_epoch + (t0 + 1) * ts.step_seconds;
  if (action == "predict") {
    out.values = fc;
    io::write_timeseries(out_file.empty() ? "forecast.csv" : out_file, out);
    std::cout << "wrote " << fc.size() << " forecast values\n";
    return kExitOk;
  }
  if (action == "scenarios") {
    if (!pipe.error)
      throw Error("model file has no error distribution; fit with --validation");
    auto scen = forecast::sample_scenarios(fc, *pipe.error, k, seed, pipe.clip);
    std::ofstream f(out_file.empty() ? "scenarios.csv" : out_file);
    f << "timestamp";
    for (int i = 0; i < k; ++i) f << ",s" << i;
    f << "\n";
    char buf2[64];
    for (size_t tau = 0; tau < fc.size(); ++tau) {
      f << io::format_iso8601(out.start_epoch +
                              static_cast<int64_t>(tau) * out.step_seconds);
      for (int i = 0; i < k; ++i) {
        std::snprintf(buf2, sizeof(buf2), "%.12g", scen[i][tau]);
        f << ',' << buf2;
      }
      f << "\n";
    }
    std::cout << "wrote " << k << " scenarios of length " << fc.size() << "\n";
    return kExitOk;
  }
  throw Error("unknown forecast action " + action +
              " (expected fit|predict|scenarios)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"device-network power flow optimization and simulation"};
  app.require_subcommand(1);

  std::string network_file, out_dir, perturb, dump_qp;
  bool dynamic = false;
  auto* solve = app.add_subcommand("solve", "solve an optimal power flow problem");
  solve->add_option("--network", network_file, "network JSON file")->required();
  solve->add_flag("--dynamic", dynamic, "multi-period (dynamic) problem");
  solve->add_option("--out", out_dir, "directory for CSV results");
  solve->add_option("--perturb", perturb,
                    "net,period,scenario,eps power extraction");
  solve->add_option("--dump-qp", dump_qp,
                    "write the compiled QP as sparse triplets");

  std::string sim_network, sim_modes = "dopf", sim_data, sim_out;
  int sim_horizon = 1, sim_scenarios = 1;
  uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand("simulate", "receding-horizon simulation");
  sim->add_option("--network", sim_network, "network JSON file")->required();
  sim->add_option("--mode", sim_modes, "dopf|mpc|rmpc, comma separated");
  sim->add_option("--data", sim_data, "directory of realized series CSVs")
      ->required();
  sim->add_option("--horizon", sim_horizon, "planning window length")->required();
  sim->add_option("--scenarios", sim_scenarios, "scenario count for rmpc");
  sim->add_option("--seed", sim_seed, "scenario sampling seed");
  sim->add_option("--out", sim_out, "directory for trace CSVs");

  std::string fc_action, fc_series, fc_periods, fc_validation, fc_model,
      fc_clip, fc_out;
  int fc_lags = 0, fc_horizon = 2, fc_k = 1;
  double fc_ridge = 1e-6;
  uint64_t fc_seed = 0;
  auto* fct = app.add_subcommand("forecast", "fit and apply time-series models");
  fct->add_option("action", fc_action, "fit|predict|scenarios")->required();
  fct->add_option("--series", fc_series, "timestamp,value CSV")->required();
  fct->add_option("--periods", fc_periods, "baseline periods, comma separated");
  fct->add_option("--lags", fc_lags, "AR window length M");
  fct->add_option("--horizon", fc_horizon, "forecast horizon T");
  fct->add_option("--ridge", fc_ridge, "ridge weight for the AR fit");
  fct->add_option("--validation", fc_validation, "series for the error model");
  fct->add_option("--model", fc_model, "model JSON (predict/scenarios)");
  fct->add_option("--k", fc_k, "number of scenarios");
  fct->add_option("--seed", fc_seed, "sampling seed");
  fct->add_option("--clip", fc_clip, "lo,hi forecast range");
  fct->add_option("--out", fc_out, "output file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed())
      return cmd_solve(network_file, dynamic, out_dir, perturb, dump_qp);
    if (sim->parsed())
      return cmd_simulate(sim_network, sim_modes, sim_data, sim_horizon,
                          sim_scenarios, sim_seed, sim_out);
    if (fct->parsed())
      return cmd_forecast(fc_action, fc_series, fc_periods, fc_lags, fc_horizon,
                          fc_ridge, fc_validation, fc_model, fc_k, fc_seed,
                          fc_clip, fc_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
