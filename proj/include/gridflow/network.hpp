#ifndef GRIDFLOW_NETWORK_HPP
#define GRIDFLOW_NETWORK_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "gridflow/devices.hpp"

namespace gridflow {

using NetId = int;

struct TerminalRef {
  DeviceId device = -1;
  int local = 0;
};

struct Terminal {
  int global_index = -1;
  DeviceId device = -1;
  int local_index = 0;
  std::optional<NetId> net;
};

struct Net {
  std::string name;
  std::vector<int> terminals;  // global indices
  bool hidden = false;         // internal net of a composite
};

struct Device {
  std::string name;
  DeviceSpec spec;
  std::vector<int> terminals;  // global indices, local order
  bool hidden = false;         // part of a composite
  DeviceId parent = -1;
};

// Devices + terminals + nets over a horizon of T periods and S scenarios.
// Mutating builder while wiring; immutable once compiled/solved.
class Network {
public:
  explicit Network(int horizon = 1, double period_hours = 1.0,
                   int scenarios = 1, std::vector<double> probabilities = {});

  DeviceId add_device(std::string name, DeviceSpec spec);
  DeviceId add_composite(std::string name,
                         std::vector<std::pair<std::string, DeviceSpec>> parts,
                         std::vector<std::vector<TerminalRef>> internal_nets,
                         std::vector<TerminalRef> exposed);

  NetId add_net(std::string name = "");
  void connect(NetId net, const std::vector<TerminalRef>& terminals);
  // Convenience: create a net and wire the given terminals to it.
  NetId connect_new(std::string name, const std::vector<TerminalRef>& terminals);

  int terminal_index(TerminalRef ref) const;  // resolves composite aliases

  int num_devices() const { return static_cast<int>(devices_.size()); }
  int num_terminals() const { return static_cast<int>(terminals_.size()); }
  int num_nets() const { return static_cast<int>(nets_.size()); }
  int horizon() const { return horizon_; }
  double period_hours() const { return period_hours_; }
  int num_scenarios() const { return scenarios_; }
  const std::vector<double>& probabilities() const { return probabilities_; }

  const Device& device(DeviceId d) const { return devices_.at(d); }
  Device& device(DeviceId d) { return devices_.at(d); }
  const Net& net(NetId n) const { return nets_.at(n); }
  const Terminal& terminal(int m) const { return terminals_.at(m); }
  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<Net>& nets() const { return nets_; }
  const std::vector<Terminal>& terminals() const { return terminals_; }

  DeviceId find_device(const std::string& name) const;
  NetId find_net(const std::string& name) const;

  bool fully_wired() const;
  std::vector<std::string> unwired_report() const;
  // Parameter/shape/topology errors; throws nothing.
  std::vector<std::string> validate() const;
  // Non-fatal advisories (e.g. single-terminal nets).
  std::vector<std::string> warnings() const;

  Eigen::SparseMatrix<double> adjacency() const;            // N x M
  Eigen::SparseMatrix<double> selection(DeviceId d) const;  // M_d x M

  // Mutators used by the MPC engine when building window problems.
  void set_horizon(int T) { horizon_ = T; }
  void set_scenarios(int S, std::vector<double> probabilities);

private:
  std::vector<Device> devices_;
  std::vector<Terminal> terminals_;
  std::vector<Net> nets_;
  int horizon_;
  double period_hours_;
  int scenarios_;
  std::vector<double> probabilities_;
};

// Prebuilt composite: ideal storage behind a lossy transmission line.
DeviceId add_lossy_battery(Network& net, const std::string& name,
                           const IdealStorage& storage, const LossyLine& line);

}  // namespace gridflow

#endif
