#ifndef GRIDFLOW_COMMON_HPP
#define GRIDFLOW_COMMON_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) {
      if (!s.empty()) s += "; ";
      s += e;
    }
    return s;
  }
  std::vector<std::string> issues_;
};

// Dense 3-d array indexed (i, t, s); i is the fastest-varying index so the
// terminal block of the compiled problem shares the same layout.
class Array3 {
public:
  Array3() = default;
  Array3(int d0, int d1, int d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2),
        v_(static_cast<size_t>(d0) * d1 * d2, fill) {}

  double& operator()(int i, int t, int s) { return v_[idx(i, t, s)]; }
  double operator()(int i, int t, int s) const { return v_[idx(i, t, s)]; }

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  size_t size() const { return v_.size(); }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

private:
  size_t idx(int i, int t, int s) const {
    return (static_cast<size_t>(s) * d1_ + t) * d0_ + i;
  }
  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> v_;
};

// A per-period (and optionally per-scenario) parameter. Stored sizes may be 1
// for broadcast across periods and/or scenarios.
struct Schedule {
  std::vector<double> values{0.0};
  int periods = 1;    // 1 or T
  int scenarios = 1;  // 1 or S

  Schedule() = default;
  Schedule(double constant) : values{constant} {}
  static Schedule of(std::vector<double> per_period) {
    Schedule s;
    s.periods = static_cast<int>(per_period.size());
    s.values = std::move(per_period);
    return s;
  }
  // column-major: values[s * periods + t]
  static Schedule of(std::vector<double> flat, int periods, int scenarios) {
    Schedule s;
    s.periods = periods;
    s.scenarios = scenarios;
    s.values = std::move(flat);
    return s;
  }

  double at(int t, int s) const {
    int ti = periods == 1 ? 0 : t;
    int si = scenarios == 1 ? 0 : s;
    return values[static_cast<size_t>(si) * periods + ti];
  }
  bool conforms(int T, int S) const {
    return (periods == 1 || periods == T) && (scenarios == 1 || scenarios == S) &&
           values.size() == static_cast<size_t>(periods) * scenarios;
  }
};

}  // namespace gridflow

#endif
