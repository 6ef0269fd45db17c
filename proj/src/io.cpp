#include "gridflow/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace gridflow::io {

using nlohmann::json;

// ---------------------------------------------------------------- time series

int64_t parse_iso8601(const std::string& stamp) {
  int y, mo, d, h, mi, se;
  char tail = 0;
  int got = std::sscanf(stamp.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h,
                        &mi, &se, &tail);
  if (got < 6 || (got == 7 && tail != 'Z'))
    throw Error("bad ISO-8601 timestamp: " + stamp);
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
    throw Error("bad ISO-8601 timestamp: " + stamp);
  // days since epoch (civil-from-days, Howard Hinnant's algorithm)
  int yy = y - (mo <= 2);
  int era = (yy >= 0 ? yy : yy - 399) / 400;
  unsigned yoe = static_cast<unsigned>(yy - era * 400);
  unsigned doy = (153u * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  int64_t days = era * 146097LL + static_cast<int64_t>(doe) - 719468;
  return days * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(int64_t t) {
  int64_t days = t / 86400;
  int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int64_t z = days + 719468;
  int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned doe = static_cast<unsigned>(z - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  int64_t y = static_cast<int64_t>(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  unsigned d = doy - (153 * mp + 2) / 5 + 1;
  unsigned m = mp + (mp < 10 ? 3 : -9);
  y += (m <= 2);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04" PRId64 "-%02u-%02uT%02" PRId64
                                  ":%02" PRId64 ":%02" PRId64,
                y, m, d, rem / 3600, (rem % 3600) / 60, rem % 60);
  return buf;
}

TimeSeries read_timeseries(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(file.string() + ": empty file");
  if (line.rfind("timestamp,value", 0) != 0)
    throw Error(file.string() + ": expected header 'timestamp,value'");
  TimeSeries ts;
  int64_t prev = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(file.string() + ":" + std::to_string(line_no) +
                  ": missing comma");
    int64_t t;
    double v;
    try {
      t = parse_iso8601(line.substr(0, comma));
      v = std::stod(line.substr(comma + 1));
    } catch (const std::exception& e) {
      throw Error(file.string() + ":" + std::to_string(line_no) + ": " +
                  e.what());
    }
    if (ts.values.empty()) {
      ts.start_epoch = t;
    } else if (ts.values.size() == 1) {
      ts.step_seconds = t - prev;
      if (ts.step_seconds <= 0)
        throw Error(file.string() + ": timestamps must increase");
    } else if (t - prev != ts.step_seconds) {
      throw Error(file.string() + ":" + std::to_string(line_no) +
                  ": non-uniform timestamp spacing");
    }
    prev = t;
    ts.values.push_back(v);
  }
  if (ts.values.empty()) throw Error(file.string() + ": no data rows");
  if (ts.step_seconds == 0) ts.step_seconds = 3600;
  return ts;
}

void write_timeseries(const std::filesystem::path& file, const TimeSeries& ts) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << "timestamp,value\n";
  char buf[64];
  for (size_t i = 0; i < ts.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", ts.values[i]);
    out << format_iso8601(ts.start_epoch +
                          static_cast<int64_t>(i) * ts.step_seconds)
        << ',' << buf << '\n';
  }
}

// ------------------------------------------------------------- network files

namespace {

Schedule schedule_from_json(const json& j, const std::filesystem::path& dir) {
  if (j.is_number()) return Schedule(j.get<double>());
  if (j.is_array()) {
    if (!j.empty() && j[0].is_array()) {
      // [scenario][period]
      Schedule s;
      s.scenarios = static_cast<int>(j.size());
      s.periods = static_cast<int>(j[0].size());
      s.values.clear();
      for (const auto& row : j) {
        if (static_cast<int>(row.size()) != s.periods)
          throw Error("ragged per-scenario schedule");
        for (const auto& v : row) s.values.push_back(v.get<double>());
      }
      return s;
    }
    Schedule s;
    s.periods = static_cast<int>(j.size());
    s.values.clear();
    for (const auto& v : j) s.values.push_back(v.get<double>());
    return s;
  }
  if (j.is_object() && j.contains("series")) {
    TimeSeries ts = read_timeseries(dir / j["series"].get<std::string>());
    Schedule s;
    s.periods = static_cast<int>(ts.values.size());
    s.values = ts.values;
    return s;
  }
  throw Error("schedule must be a number, array, nested array, or {series: path}");
}

json schedule_to_json(const Schedule& s) {
  if (s.periods == 1 && s.scenarios == 1) return s.values[0];
  if (s.scenarios == 1) return json(s.values);
  json rows = json::array();
  for (int sc = 0; sc < s.scenarios; ++sc) {
    json row = json::array();
    for (int t = 0; t < s.periods; ++t)
      row.push_back(s.values[static_cast<size_t>(sc) * s.periods + t]);
    rows.push_back(row);
  }
  return rows;
}

double num_or(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  const auto& v = p.at(key);
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw Error(std::string("bad numeric value for ") + key);
  }
  return v.get<double>();
}

DeviceSpec spec_from_json(const std::string& kind, const json& p,
                          const std::filesystem::path& dir) {
  if (kind == "generic_generator") {
    GenericGenerator g;
    g.alpha = num_or(p, "alpha", 0);
    g.beta = num_or(p, "beta", 0);
    g.gamma = num_or(p, "gamma", 0);
    g.p_min = num_or(p, "p_min", 0);
    g.p_max = num_or(p, "p_max", kInf);
    if (p.contains("ramp_up")) g.ramp_up = p["ramp_up"].get<double>();
    if (p.contains("ramp_down")) g.ramp_down = p["ramp_down"].get<double>();
    if (p.contains("smoothing")) {
      std::string s = p["smoothing"].get<std::string>();
      if (s == "quadratic") g.smoothing = SmoothingKind::Quadratic;
      else if (s == "l1") g.smoothing = SmoothingKind::L1;
      else if (s != "none") throw Error("smoothing must be none|quadratic|l1");
      g.smoothing_weight = num_or(p, "smoothing_weight", 0);
    }
    return g;
  }
  if (kind == "fixed_generator")
    return FixedGenerator{schedule_from_json(p.at("p_fix"), dir)};
  if (kind == "renewable_generator")
    return RenewableGenerator{schedule_from_json(p.at("p_avail"), dir)};
  if (kind == "fixed_load")
    return FixedLoad{schedule_from_json(p.at("p_fix"), dir)};
  if (kind == "curtailable_load")
    return CurtailableLoad{num_or(p, "p_des", 0), num_or(p, "p_min", 0),
                           num_or(p, "lambda_curt", 0)};
  if (kind == "deferrable_load") {
    DeferrableLoad l;
    l.energy = num_or(p, "energy", 0);
    l.start = p.at("start").get<int>();
    l.end = p.at("end").get<int>();
    l.p_max = num_or(p, "p_max", kInf);
    return l;
  }
  if (kind == "thermal_load") {
    ThermalLoad l;
    l.heat_capacity = num_or(p, "heat_capacity", 1);
    l.conductivity = num_or(p, "conductivity", 0);
    l.ambient = schedule_from_json(p.at("ambient"), dir);
    l.cop = num_or(p, "cop", 1);
    l.temp_min = num_or(p, "temp_min", -kInf);
    l.temp_max = num_or(p, "temp_max", kInf);
    l.p_max = num_or(p, "p_max", kInf);
    l.temp_init = num_or(p, "temp_init", 0);
    return l;
  }
  if (kind == "grid_tie") {
    GridTie g;
    g.price_buy = num_or(p, "price_buy", 0);
    g.price_sell = num_or(p, "price_sell", 0);
    g.max_buy = num_or(p, "max_buy", kInf);
    g.max_sell = num_or(p, "max_sell", kInf);
    return g;
  }
  if (kind == "power_dissipator") return PowerDissipator{};
  if (kind == "lossless_line") {
    LosslessLine l;
    if (p.contains("p_max") && !p.contains("p_min"))
      return LosslessLine::symmetric(p["p_max"].get<double>(),
                                     num_or(p, "flow_cost", 0));
    l.p_min = num_or(p, "p_min", -kInf);
    l.p_max = num_or(p, "p_max", kInf);
    l.flow_cost = num_or(p, "flow_cost", 0);
    return l;
  }
  if (kind == "lossy_line") {
    LossyLine l;
    l.loss = num_or(p, "loss", 0);
    l.p_max = num_or(p, "p_max", 0);
    l.cuts = p.contains("cuts") ? p["cuts"].get<int>() : 20;
    return l;
  }
  if (kind == "converter") {
    Converter c;
    c.eff_fwd = num_or(p, "eff_fwd", 0.9);
    c.eff_rev = num_or(p, "eff_rev", 0.9);
    c.p_min = num_or(p, "p_min", -kInf);
    c.p_max = num_or(p, "p_max", kInf);
    return c;
  }
  if (kind == "ideal_storage") {
    IdealStorage s;
    s.leakage = num_or(p, "leakage", 1e-12);
    s.energy_min = num_or(p, "energy_min", 0);
    s.energy_max = num_or(p, "energy_max", 0);
    s.energy_init = num_or(p, "energy_init", 0);
    s.p_min = num_or(p, "p_min", 0);
    s.p_max = num_or(p, "p_max", 0);
    if (p.contains("energy_final")) s.energy_final = p["energy_final"].get<double>();
    if (p.contains("final_energy_price"))
      s.final_energy_price = p["final_energy_price"].get<double>();
    s.cycle_cost = num_or(p, "cycle_cost", 0);
    return s;
  }
  throw Error("unknown device kind: " + kind);
}

TerminalRef parse_ref(const std::string& text, int ndev,
                      const std::vector<std::string>& names) {
  auto dot = text.rfind('.');
  if (dot == std::string::npos)
    throw Error("terminal reference '" + text + "' must be device.index");
  std::string dev = text.substr(0, dot);
  int local = std::stoi(text.substr(dot + 1));
  for (int i = 0; i < ndev; ++i)
    if (names[i] == dev) return {i, local};
  throw Error("terminal reference to unknown device '" + dev + "'");
}

json spec_params_to_json(const DeviceSpec& spec);

}  // namespace

LoadedNetwork load_network(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(file.string() + ": " + e.what());
  }
  const auto dir = file.parent_path();
  const json& meta = doc.at("meta");
  int T = meta.value("T", 1);
  double h = meta.value("h", 1.0);
  int S = meta.value("S", 1);
  std::vector<double> probs;
  if (meta.contains("probabilities"))
    probs = meta["probabilities"].get<std::vector<double>>();
  LoadedNetwork out{Network(T, h, S, probs), "MW", {}};
  if (meta.contains("power_unit"))
    out.power_unit = meta["power_unit"].get<std::string>();

  for (const auto& jd : doc.at("devices")) {
    std::string name = jd.at("name").get<std::string>();
    std::string kind = jd.at("kind").get<std::string>();
    const json params = jd.value("params", json::object());
    if (kind == "composite") {
      std::vector<std::pair<std::string, DeviceSpec>> parts;
      std::vector<std::string> part_names;
      for (const auto& jp : params.at("parts")) {
        std::string pname = jp.at("name").get<std::string>();
        parts.emplace_back(pname,
                           spec_from_json(jp.at("kind").get<std::string>(),
                                          jp.value("params", json::object()),
                                          dir));
        part_names.push_back(pname);
      }
      std::vector<std::vector<TerminalRef>> internal;
      for (const auto& jn : params.at("internal_nets")) {
        std::vector<TerminalRef> refs;
        for (const auto& jr : jn)
          refs.push_back(parse_ref(jr.get<std::string>(),
                                   static_cast<int>(part_names.size()),
                                   part_names));
        internal.push_back(refs);
      }
      std::vector<TerminalRef> exposed;
      for (const auto& jr : params.at("exposed"))
        exposed.push_back(parse_ref(jr.get<std::string>(),
                                    static_cast<int>(part_names.size()),
                                    part_names));
      out.network.add_composite(name, std::move(parts), internal, exposed);
    } else {
      out.network.add_device(name, spec_from_json(kind, params, dir));
    }
    if (jd.contains("forecast")) {
      const json& jf = jd["forecast"];
      LoadedNetwork::ForecastConfig fc;
      fc.device = name;
      fc.kind = jf.value("kind", std::string("model"));
      if (jf.contains("periods"))
        fc.periods = jf["periods"].get<std::vector<double>>();
      fc.lags = jf.value("lags", 0);
      fc.ridge = jf.value("ridge", 1e-6);
      if (jf.contains("clip")) {
        fc.clip_lo = jf["clip"][0].get<double>();
        fc.clip_hi = jf["clip"][1].get<double>();
      }
      fc.train_series = jf.value("train", std::string());
      fc.validation_series = jf.value("validation", std::string());
      out.forecast_configs.push_back(std::move(fc));
    }
  }
  for (const auto& jn : doc.at("nets")) {
    std::string nname = jn.at("name").get<std::string>();
    std::vector<TerminalRef> refs;
    for (const auto& jr : jn.at("members")) {
      std::string text = jr.get<std::string>();
      auto dot = text.rfind('.');
      if (dot == std::string::npos)
        throw Error("net member '" + text + "' must be device.index");
      std::string dev = text.substr(0, dot);
      refs.push_back(
          {out.network.find_device(dev), std::stoi(text.substr(dot + 1))});
    }
    if (refs.empty()) throw Error("net " + nname + " lists no member terminals");
    out.network.connect_new(nname, refs);
  }
  auto issues = out.network.validate();
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

namespace {

json spec_params_to_json(const DeviceSpec& spec) {
  json p = json::object();
  auto put = [&p](const char* k, double v) {
    if (v == kInf) p[k] = "inf";
    else if (v == -kInf) p[k] = "-inf";
    else p[k] = v;
  };
  if (const auto* g = std::get_if<GenericGenerator>(&spec)) {
    put("alpha", g->alpha);
    put("beta", g->beta);
    put("gamma", g->gamma);
    put("p_min", g->p_min);
    put("p_max", g->p_max);
    if (g->ramp_up) put("ramp_up", *g->ramp_up);
    if (g->ramp_down) put("ramp_down", *g->ramp_down);
    if (g->smoothing != SmoothingKind::None) {
      p["smoothing"] = g->smoothing == SmoothingKind::Quadratic ? "quadratic" : "l1";
      put("smoothing_weight", g->smoothing_weight);
    }
  } else if (const auto* g = std::get_if<FixedGenerator>(&spec)) {
    p["p_fix"] = schedule_to_json(g->p_fix);
  } else if (const auto* g = std::get_if<RenewableGenerator>(&spec)) {
    p["p_avail"] = schedule_to_json(g->p_avail);
  } else if (const auto* l = std::get_if<FixedLoad>(&spec)) {
    p["p_fix"] = schedule_to_json(l->p_fix);
  } else if (const auto* l = std::get_if<CurtailableLoad>(&spec)) {
    put("p_des", l->p_des);
    put("p_min", l->p_min);
    put("lambda_curt", l->lambda_curt);
  } else if (const auto* l = std::get_if<DeferrableLoad>(&spec)) {
    put("energy", l->energy);
    p["start"] = l->start;
    p["end"] = l->end;
    put("p_max", l->p_max);
  } else if (const auto* l = std::get_if<ThermalLoad>(&spec)) {
    put("heat_capacity", l->heat_capacity);
    put("conductivity", l->conductivity);
    p["ambient"] = schedule_to_json(l->ambient);
    put("cop", l->cop);
    put("temp_min", l->temp_min);
    put("temp_max", l->temp_max);
    put("p_max", l->p_max);
    put("temp_init", l->temp_init);
  } else if (const auto* g = std::get_if<GridTie>(&spec)) {
    put("price_buy", g->price_buy);
    put("price_sell", g->price_sell);
    put("max_buy", g->max_buy);
    put("max_sell", g->max_sell);
  } else if (const auto* l = std::get_if<LosslessLine>(&spec)) {
    put("p_min", l->p_min);
    put("p_max", l->p_max);
    put("flow_cost", l->flow_cost);
  } else if (const auto* l = std::get_if<LossyLine>(&spec)) {
    put("loss", l->loss);
    put("p_max", l->p_max);
    p["cuts"] = l->cuts;
  } else if (const auto* c = std::get_if<Converter>(&spec)) {
    put("eff_fwd", c->eff_fwd);
    put("eff_rev", c->eff_rev);
    put("p_min", c->p_min);
    put("p_max", c->p_max);
  } else if (const auto* s = std::get_if<IdealStorage>(&spec)) {
    put("leakage", s->leakage);
    put("energy_min", s->energy_min);
    put("energy_max", s->energy_max);
    put("energy_init", s->energy_init);
    put("p_min", s->p_min);
    put("p_max", s->p_max);
    if (s->energy_final) put("energy_final", *s->energy_final);
    if (s->final_energy_price) put("final_energy_price", *s->final_energy_price);
    put("cycle_cost", s->cycle_cost);
  }
  return p;
}

}  // namespace

std::string network_to_json(const Network& net, const std::string& power_unit) {
  json doc;
  doc["meta"] = {{"T", net.horizon()},
                 {"h", net.period_hours()},
                 {"S", net.num_scenarios()},
                 {"probabilities", net.probabilities()},
                 {"power_unit", power_unit}};
  json devices = json::array();
  for (DeviceId d = 0; d < net.num_devices(); ++d) {
    const Device& dev = net.device(d);
    if (dev.hidden) continue;
    json jd;
    jd["name"] = dev.name;
    jd["kind"] = device_kind_name(dev.spec);
    if (const auto* comp = std::get_if<Composite>(&dev.spec)) {
      json params;
      json parts = json::array();
      std::vector<DeviceId> ids = comp->parts;
      auto local_name = [&](DeviceId pid) {
        std::string full = net.device(pid).name;
        auto pos = full.rfind('.');
        return pos == std::string::npos ? full : full.substr(pos + 1);
      };
      for (DeviceId pid : ids) {
        json jp;
        jp["name"] = local_name(pid);
        jp["kind"] = device_kind_name(net.device(pid).spec);
        jp["params"] = spec_params_to_json(net.device(pid).spec);
        parts.push_back(jp);
      }
      params["parts"] = parts;
      json internal = json::array();
      for (const auto& n : net.nets()) {
        if (!n.hidden) continue;
        bool mine = !n.terminals.empty() &&
                    std::find(ids.begin(), ids.end(),
                              net.terminal(n.terminals[0]).device) != ids.end();
        if (!mine) continue;
        json members = json::array();
        for (int g : n.terminals) {
          const Terminal& t = net.terminal(g);
          int part_idx = static_cast<int>(
              std::find(ids.begin(), ids.end(), t.device) - ids.begin());
          members.push_back(local_name(ids[part_idx]) + "." +
                            std::to_string(t.local_index));
        }
        internal.push_back(members);
      }
      params["internal_nets"] = internal;
      json exposed = json::array();
      for (int g : comp->exposed_terminals) {
        const Terminal& t = net.terminal(g);
        exposed.push_back(local_name(t.device) + "." +
                          std::to_string(t.local_index));
      }
      params["exposed"] = exposed;
      jd["params"] = params;
    } else {
      jd["params"] = spec_params_to_json(dev.spec);
    }
    devices.push_back(jd);
  }
  doc["devices"] = devices;
  json nets = json::array();
  for (const auto& n : net.nets()) {
    if (n.hidden) continue;
    json jn;
    jn["name"] = n.name;
    json members = json::array();
    for (int g : n.terminals) {
      const Terminal& t = net.terminal(g);
      DeviceId owner = t.device;
      int local = t.local_index;
      if (net.device(owner).parent >= 0) {
        DeviceId parent = net.device(owner).parent;
        const auto& comp = std::get<Composite>(net.device(parent).spec);
        for (size_t i = 0; i < comp.exposed_terminals.size(); ++i)
          if (comp.exposed_terminals[i] == g) {
            owner = parent;
            local = static_cast<int>(i);
          }
      }
      members.push_back(net.device(owner).name + "." + std::to_string(local));
    }
    jn["members"] = members;
    nets.push_back(jn);
  }
  doc["nets"] = nets;
  return doc.dump(2) + "\n";
}

// ------------------------------------------------------------------ CSV dumps

namespace {
std::string fmt(double v, const char* f = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}
}  // namespace

void write_flows_csv(std::ostream& os, const Network& net, const Solution& sol) {
  os << "device,terminal,period,scenario,power_mw\n";
  for (int s = 0; s < sol.power.dim2(); ++s)
    for (int t = 0; t < sol.power.dim1(); ++t)
      for (int m = 0; m < sol.power.dim0(); ++m) {
        const Terminal& term = net.terminal(m);
        os << net.device(term.device).name << ',' << term.local_index << ','
           << t << ',' << s << ',' << fmt(sol.power(m, t, s)) << '\n';
      }
}

void write_prices_csv(std::ostream& os, const Network& net, const Solution& sol) {
  os << "net,period,scenario,price_per_mw\n";
  for (int s = 0; s < sol.price.dim2(); ++s)
    for (int t = 0; t < sol.price.dim1(); ++t)
      for (int n = 0; n < sol.price.dim0(); ++n)
        os << net.net(n).name << ',' << t << ',' << s << ','
           << fmt(sol.price(n, t, s)) << '\n';
}

void write_payments_csv(std::ostream& os, const Network& net,
                        const Solution& sol, const PaymentLedger& ledger) {
  os << "device,period,payment\n";
  const auto& pi = net.probabilities();
  for (DeviceId d = 0; d < net.num_devices(); ++d) {
    if (net.device(d).hidden) continue;
    for (int t = 0; t < sol.power.dim1(); ++t) {
      double pay = 0;
      for (int s = 0; s < sol.power.dim2(); ++s)
        pay += pi[s] * ledger.device_period[d](0, t, s);
      os << net.device(d).name << ',' << t << ',' << fmt(pay) << '\n';
    }
  }
}

void write_trace_csv(std::ostream& os, const Network& net,
                     const SimulationTrace& trace) {
  os << "period";
  for (const auto& t : net.terminals())
    if (!net.device(t.device).hidden || net.device(t.device).parent >= 0)
      os << ',' << net.device(t.device).name << '[' << t.local_index << ']';
  for (const auto& n : net.nets())
    if (!n.hidden) os << ",price:" << n.name;
  for (const auto& d : net.devices())
    if (!d.hidden) os << ",pay:" << d.name;
  os << ",cost,iterations,status,softened,window\n";
  for (const auto& step : trace.steps) {
    os << step.period;
    for (size_t m = 0; m < step.executed.size(); ++m) {
      const auto& t = net.terminal(static_cast<int>(m));
      if (!net.device(t.device).hidden || net.device(t.device).parent >= 0)
        os << ',' << fmt(step.executed[m]);
    }
    for (int n = 0; n < net.num_nets(); ++n)
      if (!net.net(n).hidden) os << ',' << fmt(step.price[n]);
    for (int d = 0; d < net.num_devices(); ++d)
      if (!net.device(d).hidden) os << ',' << fmt(step.payment[d]);
    os << ',' << fmt(step.realized_cost) << ',' << step.report.iterations << ','
       << to_string(step.report.status) << ',' << (step.softened ? 1 : 0) << ','
       << step.window_length << '\n';
  }
}

// -------------------------------------------------------------------- summary

namespace {
void block(std::ostringstream& os, const std::string& head,
           const std::string& val_head,
           const std::vector<std::pair<std::string, std::string>>& rows) {
  auto line = [&](const std::string& a, const std::string& b) {
    std::string s = a;
    int pad = 31 - static_cast<int>(a.size()) - static_cast<int>(b.size());
    if (pad < 1) pad = 1;
    s.append(pad, ' ');
    s += b;
    os << s << '\n';
  };
  line(head, val_head);
  line(std::string(head.size(), '-'), std::string(val_head.size(), '-'));
  for (const auto& [k, v] : rows) line(k, v);
  os << '\n';
}
}  // namespace

std::string summary(const Network& net, const Solution& sol,
                    const PaymentLedger& ledger) {
  std::ostringstream os;
  std::vector<std::pair<std::string, std::string>> rows;
  for (int m = 0; m < net.num_terminals(); ++m) {
    const Terminal& t = net.terminal(m);
    DeviceId owner = t.device;
    int local = t.local_index;
    bool show = !net.device(owner).hidden;
    if (net.device(owner).parent >= 0) {
      DeviceId parent = net.device(owner).parent;
      const auto& comp = std::get<Composite>(net.device(parent).spec);
      for (size_t i = 0; i < comp.exposed_terminals.size(); ++i)
        if (comp.exposed_terminals[i] == m) {
          owner = parent;
          local = static_cast<int>(i);
          show = true;
        }
    }
    if (!show) continue;
    rows.emplace_back(net.device(owner).name + "[" + std::to_string(local) + "]",
                      fmt(sol.power(m, 0, 0), "%.2f"));
  }
  block(os, "Terminal", "Power", rows);

  rows.clear();
  for (int n = 0; n < net.num_nets(); ++n) {
    if (net.net(n).hidden) continue;
    rows.emplace_back(net.net(n).name, fmt(sol.price(n, 0, 0), "%.4f"));
  }
  block(os, "Net", "Price", rows);

  rows.clear();
  for (DeviceId d = 0; d < net.num_devices(); ++d) {
    if (net.device(d).hidden) continue;
    rows.emplace_back(net.device(d).name, fmt(ledger.device_total[d], "%.2f"));
  }
  block(os, "Device", "Payment", rows);
  return os.str();
}

// -------------------------------------------------------- forecast model file

std::string pipeline_to_json(const forecast::Pipeline& p) {
  json doc;
  doc["version"] = 1;
  doc["baseline"] = {{"periods", p.baseline.periods},
                     {"beta0", p.baseline.beta0},
                     {"sin", p.baseline.sin_coef},
                     {"cos", p.baseline.cos_coef}};
  std::vector<double> flat(p.ar.gamma.size());
  Eigen::Map<Eigen::MatrixXd>(flat.data(), p.ar.gamma.rows(), p.ar.gamma.cols()) =
      p.ar.gamma;
  doc["ar"] = {{"lags", p.ar.lags},
               {"horizon", p.ar.horizon},
               {"ridge", p.ar.ridge},
               {"gamma", flat}};
  if (p.error) {
    std::vector<double> mu(p.error->mu.data(),
                           p.error->mu.data() + p.error->mu.size());
    std::vector<double> sig(p.error->sigma.size());
    Eigen::Map<Eigen::MatrixXd>(sig.data(), p.error->sigma.rows(),
                                p.error->sigma.cols()) = p.error->sigma;
    doc["error"] = {{"mu", mu},
                    {"sigma", sig},
                    {"samples", p.error->samples},
                    {"zero_mean", p.error->zero_mean}};
  }
  if (p.clip.lo > -kInf || p.clip.hi < kInf)
    doc["clip"] = {p.clip.lo == -kInf ? json("-inf") : json(p.clip.lo),
                   p.clip.hi == kInf ? json("inf") : json(p.clip.hi)};
  return doc.dump(2) + "\n";
}

forecast::Pipeline pipeline_from_json(const std::string& text) {
  json doc = json::parse(text);
  if (doc.value("version", 0) != 1)
    throw Error("unsupported forecast model file version");
  forecast::Pipeline p;
  p.baseline.periods = doc["baseline"]["periods"].get<std::vector<double>>();
  p.baseline.beta0 = doc["baseline"]["beta0"].get<double>();
  p.baseline.sin_coef = doc["baseline"]["sin"].get<std::vector<double>>();
  p.baseline.cos_coef = doc["baseline"]["cos"].get<std::vector<double>>();
  p.ar.lags = doc["ar"]["lags"].get<int>();
  p.ar.horizon = doc["ar"]["horizon"].get<int>();
  p.ar.ridge = doc["ar"]["ridge"].get<double>();
  auto flat = doc["ar"]["gamma"].get<std::vector<double>>();
  p.ar.gamma = Eigen::Map<Eigen::MatrixXd>(flat.data(), p.ar.horizon - 1, p.ar.lags);
  if (doc.contains("error")) {
    forecast::ErrorModel e;
    auto mu = doc["error"]["mu"].get<std::vector<double>>();
    e.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), mu.size());
    auto sig = doc["error"]["sigma"].get<std::vector<double>>();
    int h = static_cast<int>(mu.size());
    e.sigma = Eigen::Map<Eigen::MatrixXd>(sig.data(), h, h);
    e.samples = doc["error"]["samples"].get<int>();
    e.zero_mean = doc["error"]["zero_mean"].get<bool>();
    p.error = e;
  }
  if (doc.contains("clip")) {
    auto get = [](const json& v, double dflt) {
      if (v.is_string())
        return v.get<std::string>() == "inf" ? kInf : -kInf;
      (void)dflt;
      return v.get<double>();
    };
    p.clip.lo = get(doc["clip"][0], -kInf);
    p.clip.hi = get(doc["clip"][1], kInf);
  }
  return p;
}

}  // namespace gridflow::io
