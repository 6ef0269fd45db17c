// End-to-end CLI checks: simulate over realized data with a trained
// forecaster, forecast fit/predict, and the documented exit codes.
//
// usage: cli_driver <path-to-cli-binary>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "gridflow/forecast.hpp"
#include "gridflow/io.hpp"

using namespace gridflow;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "[ok] " : "[FAIL] ") << what << "\n";
  if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<double> wind_series(int n, uint64_t seed, int offset = 0) {
  forecast::Rng rng(seed);
  std::vector<double> w(n);
  double r = 0;
  for (int t = 0; t < n; ++t) {
    r = 0.9 * r + 0.6 * rng.normal();
    double base = 8 + 5 * std::sin(2 * std::numbers::pi * (t + offset) / 96.0);
    w[t] = std::clamp(base + r, 0.0, 16.0);
  }
  return w;
}

}  // namespace

int run_all(const std::string& cli);

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_driver <gridflow-binary>\n";
    return 2;
  }
  try {
    return run_all(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "cli driver aborted: " << e.what() << "\n";
    return 1;
  }
}

int run_all(const std::string& cli) {
  auto dir = fs::temp_directory_path() / "gridflow_cli_driver";
  fs::remove_all(dir);
  fs::create_directories(dir / "data");

  const int64_t start = io::parse_iso8601("2020-03-01T00:00:00");
  const int64_t step = 900;
  const int train_n = 960, run_n = 48;
  {
    io::TimeSeries train{start, step, wind_series(train_n, 5)};
    io::write_timeseries(dir / "wind_train.csv", train);
    io::TimeSeries val{start + train_n * step, step,
                       wind_series(600, 6, train_n)};
    io::write_timeseries(dir / "wind_validation.csv", val);
    io::TimeSeries realized{start + (train_n + 600) * step, step,
                            wind_series(run_n, 7, train_n + 600)};
    io::write_timeseries(dir / "data" / "wind.csv", realized);
  }
  std::ofstream(dir / "farm.json") << R"({
  "meta": {"T": 1, "h": 0.25, "S": 1, "power_unit": "MW"},
  "devices": [
    {"name": "gas", "kind": "generic_generator",
     "params": {"alpha": 0.1, "beta": 20, "p_min": 0, "p_max": 50}},
    {"name": "wind", "kind": "renewable_generator", "params": {"p_avail": 0},
     "forecast": {"kind": "model", "periods": [96, 48], "lags": 24,
                  "clip": [0, 16], "train": "wind_train.csv",
                  "validation": "wind_validation.csv"}},
    {"name": "storage", "kind": "ideal_storage",
     "params": {"leakage": 1e-12, "energy_min": 0, "energy_max": 50,
                "energy_init": 0, "p_min": -5, "p_max": 5, "cycle_cost": 0.01}},
    {"name": "load", "kind": "fixed_load", "params": {"p_fix": 18}}
  ],
  "nets": [
    {"name": "bus", "members": ["gas.0", "wind.0", "storage.0", "load.0"]}
  ]
})";

  auto run = [&](const std::string& args, const fs::path& out) {
    std::string cmd = cli + " " + args + " > " + out.string() + " 2> " +
                      out.string() + ".err";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };

  // simulate all three modes over the realized series
  int rc = run("simulate --network " + (dir / "farm.json").string() +
                   " --mode dopf,mpc,rmpc --data " + (dir / "data").string() +
                   " --horizon 12 --scenarios 5 --seed 3 --out " + dir.string(),
               dir / "sim.out");
  check(rc == 0, "simulate dopf,mpc,rmpc exits 0");
  std::string sim_out = slurp(dir / "sim.out");
  check(sim_out.find("prescience check: cost(dopf) <= cost(mpc): ok") !=
            std::string::npos,
        "prescience check against mpc printed and ok");
  check(sim_out.find("prescience check: cost(dopf) <= cost(rmpc): ok") !=
            std::string::npos,
        "prescience check against rmpc printed and ok");
  check(sim_out.find("Total device payments") != std::string::npos,
        "per-device total payment table present");
  for (const char* f : {"trace_dopf.csv", "trace_mpc.csv", "trace_rmpc.csv"}) {
    std::string text = slurp(dir / f);
    check(text.rfind("period,", 0) == 0, std::string(f) + " written with header");
    int rows = static_cast<int>(std::count(text.begin(), text.end(), '\n')) - 1;
    check(rows == run_n, std::string(f) + " has one row per period");
  }

  // dopf trace equals a plain dynamic solve of the same horizon
  {
    auto loaded = io::load_network(dir / "farm.json");
    auto realized = io::read_timeseries(dir / "data" / "wind.csv");
    Network full = loaded.network;
    full.set_horizon(run_n);
    auto& wind = std::get<RenewableGenerator>(
        full.device(full.find_device("wind")).spec);
    wind.p_avail = Schedule::of(realized.values);
    auto sol = solve_network(full);
    check(sol.optimal(), "library cross-check solve optimal");
    std::istringstream trace(slurp(dir / "trace_dopf.csv"));
    std::string line;
    std::getline(trace, line);  // header: period,gas[0],wind[0],storage[0],load[0],...
    std::getline(trace, line);
    std::stringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // period
    std::getline(row, cell, ',');  // gas[0]
    double gas_trace = std::stod(cell);
    double gas_lib =
        sol.power(full.device(full.find_device("gas")).terminals[0], 0, 0);
    check(std::abs(gas_trace - gas_lib) <= 1e-6,
          "trace_dopf first-period gas flow matches the library solve");
  }

  // forecast fit + predict produce a horizon-long CSV continuing the series
  rc = run("forecast fit --series " + (dir / "wind_train.csv").string() +
               " --periods 96,48,24,12 --lags 24 --horizon 288 --validation " +
               (dir / "wind_validation.csv").string() + " --out " +
               (dir / "model.json").string(),
           dir / "fit.out");
  check(rc == 0, "forecast fit exits 0");
  rc = run("forecast predict --model " + (dir / "model.json").string() +
               " --series " + (dir / "wind_train.csv").string() + " --out " +
               (dir / "forecast.csv").string(),
           dir / "predict.out");
  check(rc == 0, "forecast predict exits 0");
  {
    auto fc = io::read_timeseries(dir / "forecast.csv");
    check(fc.values.size() == 287, "forecast CSV has horizon-1 = 287 values");
    check(fc.start_epoch == start + train_n * step,
          "forecast timestamps continue the input series");
    bool in_range = true;
    for (double v : fc.values) in_range = in_range && v >= 0 && v <= 16;
    check(in_range, "forecast values respect the clip range");
  }

  // exit code 2: infeasible network
  std::ofstream(dir / "infeasible.json") << R"({
  "meta": {"T": 1},
  "devices": [
    {"name": "gen", "kind": "generic_generator",
     "params": {"alpha": 0.1, "p_min": 0, "p_max": 10}},
    {"name": "load", "kind": "fixed_load", "params": {"p_fix": 50}}
  ],
  "nets": [{"name": "bus", "members": ["gen.0", "load.0"]}]
})";
  rc = run("solve --network " + (dir / "infeasible.json").string(),
           dir / "inf.out");
  check(rc == 2, "infeasible network exits 2 (got " + std::to_string(rc) + ")");

  // exit code 3: unbounded network
  std::ofstream(dir / "unbounded.json") << R"({
  "meta": {"T": 1},
  "devices": [
    {"name": "cheap", "kind": "grid_tie", "params": {"price_buy": 2, "price_sell": 1}},
    {"name": "dear", "kind": "grid_tie", "params": {"price_buy": 10, "price_sell": 8}}
  ],
  "nets": [{"name": "bus", "members": ["cheap.0", "dear.0"]}]
})";
  rc = run("solve --network " + (dir / "unbounded.json").string(),
           dir / "unb.out");
  check(rc == 3, "unbounded network exits 3 (got " + std::to_string(rc) + ")");

  // exit code 1: parse error
  std::ofstream(dir / "broken.json") << "{";
  rc = run("solve --network " + (dir / "broken.json").string(), dir / "bad.out");
  check(rc == 1, "parse error exits 1 (got " + std::to_string(rc) + ")");

  std::cout << (failures == 0 ? "cli driver: all checks passed\n"
                              : "cli driver: FAILURES\n");
  return failures == 0 ? 0 : 1;
}
