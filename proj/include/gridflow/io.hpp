#ifndef GRIDFLOW_IO_HPP
#define GRIDFLOW_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridflow/mpc.hpp"
#include "gridflow/network.hpp"
#include "gridflow/pricing.hpp"

namespace gridflow::io {

// --- time series CSV: header "timestamp,value", ISO-8601, uniform spacing ---

struct TimeSeries {
  int64_t start_epoch = 0;   // seconds since Unix epoch (UTC)
  int64_t step_seconds = 0;  // uniform spacing
  std::vector<double> values;
};

int64_t parse_iso8601(const std::string& stamp);  // throws Error on bad format
std::string format_iso8601(int64_t epoch_seconds);

TimeSeries read_timeseries(const std::filesystem::path& file);
void write_timeseries(const std::filesystem::path& file, const TimeSeries& ts);

// --- network description file (JSON) ---

struct LoadedNetwork {
  Network network;
  std::string power_unit = "MW";
  // Forecaster configuration per device name, straight from the file.
  struct ForecastConfig {
    std::string device;
    std::string kind;  // "oracle" | "persistence" | "model"
    std::vector<double> periods;
    int lags = 0;
    double ridge = 1e-6;
    double clip_lo = -kInf, clip_hi = kInf;
    std::string train_series;       // path, relative to the network file
    std::string validation_series;  // optional, for the error model
  };
  std::vector<ForecastConfig> forecast_configs;
};

LoadedNetwork load_network(const std::filesystem::path& file);
std::string network_to_json(const Network& net, const std::string& power_unit = "MW");

// --- result CSV exports ---

void write_flows_csv(std::ostream& os, const Network& net, const Solution& sol);
void write_prices_csv(std::ostream& os, const Network& net, const Solution& sol);
void write_payments_csv(std::ostream& os, const Network& net, const Solution& sol,
                        const PaymentLedger& ledger);
void write_trace_csv(std::ostream& os, const Network& net,
                     const SimulationTrace& trace);

// --- session summary in the classic three-block layout ---
//   Terminal                  Power     (2 decimals)
//   Net                       Price     (4 decimals)
//   Device                  Payment     (2 decimals)
// For T or S > 1 the first period of scenario 0 is shown for powers/prices;
// payments are totals.
std::string summary(const Network& net, const Solution& sol,
                    const PaymentLedger& ledger);

// --- forecast model file (versioned JSON) ---

std::string pipeline_to_json(const forecast::Pipeline& p);
forecast::Pipeline pipeline_from_json(const std::string& text);

}  // namespace gridflow::io

#endif
