#include "gridflow/devices.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridflow {

namespace {

template <class... Ts>
struct overload : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overload(Ts...) -> overload<Ts...>;

void check_schedule(std::vector<std::string>& out, const Schedule& s, int T,
                    int S, const char* field) {
  if (!s.conforms(T, S)) {
    std::ostringstream msg;
    msg << field << ": schedule shape " << s.periods << "x" << s.scenarios
        << " does not conform to T=" << T << ", S=" << S;
    out.push_back(msg.str());
  }
  for (double v : s.values)
    if (!std::isfinite(v)) {
      out.push_back(std::string(field) + ": non-finite entry");
      break;
    }
}

void check_box(std::vector<std::string>& out, double lo, double hi,
               const char* lo_name, const char* hi_name) {
  if (lo > hi) {
    std::ostringstream msg;
    msg << lo_name << " (" << lo << ") exceeds " << hi_name << " (" << hi << ")";
    out.push_back(msg.str());
  }
}

}  // namespace

const char* device_kind_name(const DeviceSpec& spec) {
  return std::visit(
      overload{[](const GenericGenerator&) { return "generic_generator"; },
               [](const FixedGenerator&) { return "fixed_generator"; },
               [](const RenewableGenerator&) { return "renewable_generator"; },
               [](const FixedLoad&) { return "fixed_load"; },
               [](const CurtailableLoad&) { return "curtailable_load"; },
               [](const DeferrableLoad&) { return "deferrable_load"; },
               [](const ThermalLoad&) { return "thermal_load"; },
               [](const GridTie&) { return "grid_tie"; },
               [](const PowerDissipator&) { return "power_dissipator"; },
               [](const LosslessLine&) { return "lossless_line"; },
               [](const LossyLine&) { return "lossy_line"; },
               [](const Converter&) { return "converter"; },
               [](const IdealStorage&) { return "ideal_storage"; },
               [](const Composite&) { return "composite"; }},
      spec);
}

int terminal_count(const DeviceSpec& spec) {
  return std::visit(
      overload{[](const LosslessLine&) { return 2; },
               [](const LossyLine&) { return 2; },
               [](const Converter&) { return 2; },
               [](const Composite& c) {
                 return static_cast<int>(c.exposed_terminals.size());
               },
               [](const auto&) { return 1; }},
      spec);
}

std::vector<std::string> validate_spec(const DeviceSpec& spec, int T, int S) {
  std::vector<std::string> out;
  std::visit(
      overload{
          [&](const GenericGenerator& g) {
            if (g.alpha < 0) out.push_back("alpha must be >= 0 for convexity");
            check_box(out, g.p_min, g.p_max, "p_min", "p_max");
            if (g.p_min < 0) out.push_back("p_min must be >= 0");
            if (g.ramp_up && *g.ramp_up < 0) out.push_back("ramp_up must be >= 0");
            if (g.ramp_down && *g.ramp_down < 0)
              out.push_back("ramp_down must be >= 0");
            if (g.smoothing != SmoothingKind::None && g.smoothing_weight < 0)
              out.push_back("smoothing_weight must be >= 0");
          },
          [&](const FixedGenerator& g) {
            check_schedule(out, g.p_fix, T, S, "p_fix");
          },
          [&](const RenewableGenerator& g) {
            check_schedule(out, g.p_avail, T, S, "p_avail");
            for (double v : g.p_avail.values)
              if (v < 0) {
                out.push_back("p_avail must be >= 0");
                break;
              }
          },
          [&](const FixedLoad& l) { check_schedule(out, l.p_fix, T, S, "p_fix"); },
          [&](const CurtailableLoad& l) {
            check_box(out, l.p_min, l.p_des, "p_min", "p_des");
            if (l.lambda_curt < 0) out.push_back("lambda_curt must be >= 0");
          },
          [&](const DeferrableLoad& l) {
            if (l.energy < 0) out.push_back("energy must be >= 0");
            if (l.start < 0 || l.start >= T)
              out.push_back("start period outside horizon");
            if (l.end < l.start || l.end >= T)
              out.push_back("end period outside [start, T)");
            if (l.p_max < 0) out.push_back("p_max must be >= 0");
            if (l.energy_min > l.energy)
              out.push_back("energy_min exceeds energy");
          },
          [&](const ThermalLoad& l) {
            if (l.heat_capacity <= 0) out.push_back("heat_capacity must be > 0");
            if (l.conductivity <= 0) out.push_back("conductivity must be > 0");
            if (l.cop == 0) out.push_back("cop must be nonzero");
            check_box(out, l.temp_min, l.temp_max, "temp_min", "temp_max");
            if (l.p_max < 0) out.push_back("p_max must be >= 0");
            check_schedule(out, l.ambient, T, S, "ambient");
          },
          [&](const GridTie& g) {
            if (!(g.price_buy >= g.price_sell && g.price_sell >= 0))
              out.push_back("arbitrage-free prices violated: require "
                            "price_buy >= price_sell >= 0");
            if (g.max_buy < 0) out.push_back("max_buy must be >= 0");
            if (g.max_sell < 0) out.push_back("max_sell must be >= 0");
          },
          [&](const PowerDissipator&) {},
          [&](const LosslessLine& l) {
            check_box(out, l.p_min, l.p_max, "p_min", "p_max");
            if (l.flow_cost < 0) out.push_back("flow_cost must be >= 0");
          },
          [&](const LossyLine& l) {
            if (l.loss <= 0) out.push_back("loss must be > 0");
            if (l.p_max <= 0 || !std::isfinite(l.p_max))
              out.push_back("p_max must be positive and finite");
            if (l.cuts < 2) out.push_back("cuts must be >= 2");
          },
          [&](const Converter& c) {
            if (!(c.eff_fwd > 0 && c.eff_fwd < 1))
              out.push_back("eff_fwd must lie in (0,1)");
            if (!(c.eff_rev > 0 && c.eff_rev < 1))
              out.push_back("eff_rev must lie in (0,1)");
            check_box(out, c.p_min, c.p_max, "p_min", "p_max");
          },
          [&](const IdealStorage& s) {
            if (!(s.leakage > 0 && s.leakage <= 1))
              out.push_back("leakage must lie in (0, 1]");
            check_box(out, s.energy_min, s.energy_max, "energy_min", "energy_max");
            if (s.energy_init < s.energy_min - 1e-12 ||
                s.energy_init > s.energy_max + 1e-12)
              out.push_back("energy_init outside [energy_min, energy_max]");
            check_box(out, s.p_min, s.p_max, "p_min", "p_max");
            if (s.cycle_cost < 0) out.push_back("cycle_cost must be >= 0");
            if (s.energy_final &&
                (*s.energy_final < s.energy_min || *s.energy_final > s.energy_max))
              out.push_back("energy_final outside [energy_min, energy_max]");
          },
          [&](const Composite&) {}},
      spec);
  return out;
}

namespace {

double box_violation(double x, double lo, double hi) {
  double v = 0;
  if (x < lo) v = lo - x;
  if (x > hi) v = std::max(v, x - hi);
  return v;
}

}  // namespace

double evaluate_cost(const DeviceSpec& spec, const Eigen::MatrixXd& power,
                     int scenario, int T, double h, double tol) {
  if (power.rows() != terminal_count(spec) || power.cols() != T)
    throw Error("power matrix shape mismatch for device evaluation");
  const int s = scenario;
  double worst = 0;  // max constraint violation
  double cost = 0;
  std::visit(
      overload{
          [&](const GenericGenerator& g) {
            for (int t = 0; t < T; ++t) {
              double u = -power(0, t);  // generated power
              worst = std::max(worst, box_violation(u, g.p_min, g.p_max));
              cost += g.alpha * u * u + g.beta * u + g.gamma;
            }
            for (int t = 1; t < T; ++t) {
              double dp = power(0, t) - power(0, t - 1);
              if (g.ramp_up) worst = std::max(worst, dp - *g.ramp_up);
              if (g.ramp_down) worst = std::max(worst, -dp - *g.ramp_down);
              if (g.smoothing == SmoothingKind::Quadratic)
                cost += g.smoothing_weight * dp * dp;
              else if (g.smoothing == SmoothingKind::L1)
                cost += g.smoothing_weight * std::abs(dp);
            }
          },
          [&](const FixedGenerator& g) {
            for (int t = 0; t < T; ++t)
              worst = std::max(worst,
                               std::abs(-power(0, t) - g.p_fix.at(t, s)));
          },
          [&](const RenewableGenerator& g) {
            for (int t = 0; t < T; ++t)
              worst = std::max(
                  worst, box_violation(-power(0, t), 0.0, g.p_avail.at(t, s)));
          },
          [&](const FixedLoad& l) {
            for (int t = 0; t < T; ++t)
              worst = std::max(worst, std::abs(power(0, t) - l.p_fix.at(t, s)));
          },
          [&](const CurtailableLoad& l) {
            for (int t = 0; t < T; ++t) {
              worst = std::max(worst,
                               box_violation(power(0, t), l.p_min, l.p_des));
              cost += l.lambda_curt * (l.p_des - power(0, t));
            }
          },
          [&](const DeferrableLoad& l) {
            double e = 0;
            for (int t = 0; t < T; ++t) {
              double p = power(0, t);
              if (t >= l.start && t <= l.end) {
                worst = std::max(worst, box_violation(p, 0.0, l.p_max));
                e += h * p;
              } else {
                worst = std::max(worst, std::abs(p));
              }
            }
            double lo = l.energy_min >= 0 ? l.energy_min : l.energy;
            worst = std::max(worst, box_violation(e, lo, l.energy));
          },
          [&](const ThermalLoad& l) {
            double theta = l.temp_init;
            for (int t = 0; t < T; ++t) {
              double p = power(0, t);
              worst = std::max(worst, box_violation(p, 0.0, l.p_max));
              theta += (l.conductivity / l.heat_capacity) *
                           (l.ambient.at(t, s) - theta) -
                       (l.cop / l.heat_capacity) * p;
              worst = std::max(worst,
                               box_violation(theta, l.temp_min, l.temp_max));
            }
          },
          [&](const GridTie& g) {
            for (int t = 0; t < T; ++t) {
              double p = power(0, t);
              worst = std::max(worst,
                               box_violation(p, -g.max_buy, g.max_sell));
              cost += std::max(-g.price_buy * p, -g.price_sell * p);
            }
          },
          [&](const PowerDissipator&) {
            for (int t = 0; t < T; ++t)
              worst = std::max(worst, box_violation(power(0, t), 0.0, kInf));
          },
          [&](const LosslessLine& l) {
            for (int t = 0; t < T; ++t) {
              worst = std::max(worst, std::abs(power(0, t) + power(1, t)));
              worst = std::max(worst,
                               box_violation(power(0, t), l.p_min, l.p_max));
              cost += l.flow_cost * power(0, t) * power(0, t);
            }
          },
          [&](const LossyLine& l) {
            // Same polyhedral set the compiler emits: cap, flow box, and the
            // tangent-cut lower envelope of the loss parabola.
            double spacing = l.p_max / (l.cuts - 1);
            for (int t = 0; t < T; ++t) {
              double y = power(0, t) + power(1, t);
              double d = (power(0, t) - power(1, t)) / 2;
              worst = std::max(worst, std::abs(d) - l.p_max);
              worst = std::max(worst, y - l.loss * l.p_max * l.p_max);
              for (int k = -(l.cuts - 1); k <= l.cuts - 1; ++k) {
                double dk = k * spacing;
                worst = std::max(worst, l.loss * (2 * dk * d - dk * dk) - y);
              }
            }
          },
          [&](const Converter& c) {
            for (int t = 0; t < T; ++t) {
              double p1 = power(0, t), p2 = power(1, t);
              worst = std::max(worst, -(c.eff_fwd * p1 + p2));
              worst = std::max(worst, -((1.0 / c.eff_rev) * p1 + p2));
              worst = std::max(worst, box_violation(p1, c.p_min, c.p_max));
            }
          },
          [&](const IdealStorage& st) {
            double e = st.energy_init;
            for (int t = 0; t < T; ++t) {
              double p = power(0, t);
              worst = std::max(worst, box_violation(p, st.p_min, st.p_max));
              e = (1.0 - st.leakage) * e + h * p;
              worst = std::max(worst,
                               box_violation(e, st.energy_min, st.energy_max));
              cost += st.cycle_cost * std::abs(p);
            }
            if (st.energy_final)
              worst = std::max(worst, std::abs(e - *st.energy_final));
            if (st.final_energy_price) cost += *st.final_energy_price * e;
          },
          [&](const Composite&) {
            throw Error("composite cost is evaluated per part");
          }},
      spec);
  if (worst > tol) return kInf;
  return cost;
}

std::vector<double> lossy_line_relaxation_gap(const LossyLine& line,
                                              const Eigen::MatrixXd& power) {
  std::vector<double> gap(power.cols());
  for (int t = 0; t < power.cols(); ++t) {
    double y = power(0, t) + power(1, t);
    double d = (power(0, t) - power(1, t)) / 2;
    gap[t] = y - line.loss * d * d;
  }
  return gap;
}

}  // namespace gridflow
