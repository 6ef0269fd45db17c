#include "gridflow/network.hpp"

#include <algorithm>
#include <cmath>

namespace gridflow {

Network::Network(int horizon, double period_hours, int scenarios,
                 std::vector<double> probabilities)
    : horizon_(horizon), period_hours_(period_hours), scenarios_(scenarios),
      probabilities_(std::move(probabilities)) {
  if (horizon_ < 1) throw Error("horizon must be >= 1");
  if (scenarios_ < 1) throw Error("scenario count must be >= 1");
  if (period_hours_ <= 0) throw Error("period length must be positive");
  if (probabilities_.empty())
    probabilities_.assign(scenarios_, 1.0 / scenarios_);
  if (static_cast<int>(probabilities_.size()) != scenarios_)
    throw Error("probability vector length must equal scenario count");
  double sum = 0;
  for (double p : probabilities_) {
    if (p < 0) throw Error("scenario probabilities must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error("scenario probabilities must sum to 1");
}

DeviceId Network::add_device(std::string name, DeviceSpec spec) {
  auto issues = validate_spec(spec, horizon_, scenarios_);
  if (!issues.empty()) {
    for (auto& e : issues) e = name + ": " + e;
    throw ValidationError(std::move(issues));
  }
  DeviceId id = static_cast<DeviceId>(devices_.size());
  Device dev;
  dev.name = std::move(name);
  dev.spec = std::move(spec);
  int count = terminal_count(dev.spec);
  for (int i = 0; i < count; ++i) {
    Terminal t;
    t.global_index = static_cast<int>(terminals_.size());
    t.device = id;
    t.local_index = i;
    dev.terminals.push_back(t.global_index);
    terminals_.push_back(t);
  }
  devices_.push_back(std::move(dev));
  return id;
}

DeviceId Network::add_composite(
    std::string name, std::vector<std::pair<std::string, DeviceSpec>> parts,
    std::vector<std::vector<TerminalRef>> internal_nets,
    std::vector<TerminalRef> exposed) {
  if (parts.empty()) throw Error(name + ": composite needs at least one part");
  std::vector<DeviceId> part_ids;
  for (auto& [pname, pspec] : parts) {
    DeviceId pid = add_device(name + "." + pname, std::move(pspec));
    devices_[pid].hidden = true;
    part_ids.push_back(pid);
  }
  auto resolve = [&](TerminalRef ref) {
    if (ref.device < 0 || ref.device >= static_cast<int>(part_ids.size()))
      throw Error(name + ": composite terminal ref to unknown part");
    const Device& part = devices_[part_ids[ref.device]];
    if (ref.local < 0 || ref.local >= static_cast<int>(part.terminals.size()))
      throw Error(name + ": composite terminal ref out of range");
    return part.terminals[ref.local];
  };
  for (size_t k = 0; k < internal_nets.size(); ++k) {
    NetId nid = add_net(name + ".net" + std::to_string(k));
    nets_[nid].hidden = true;
    std::vector<TerminalRef> refs;
    for (auto ref : internal_nets[k])
      refs.push_back({part_ids[ref.device], ref.local});
    connect(nid, refs);
  }
  Composite comp;
  comp.parts = part_ids;
  for (auto ref : exposed) comp.exposed_terminals.push_back(resolve(ref));
  if (comp.exposed_terminals.empty())
    throw Error(name + ": composite must expose at least one terminal");
  for (int gid : comp.exposed_terminals)
    if (terminals_[gid].net)
      throw Error(name + ": exposed terminal is wired to an internal net");

  DeviceId id = static_cast<DeviceId>(devices_.size());
  Device dev;
  dev.name = std::move(name);
  dev.terminals = comp.exposed_terminals;  // aliases; parts own the terminals
  dev.spec = std::move(comp);
  devices_.push_back(std::move(dev));
  for (DeviceId pid : part_ids) devices_[pid].parent = id;
  return id;
}

NetId Network::add_net(std::string name) {
  NetId id = static_cast<NetId>(nets_.size());
  if (name.empty()) name = "net" + std::to_string(id);
  nets_.push_back(Net{std::move(name), {}, false});
  return id;
}

int Network::terminal_index(TerminalRef ref) const {
  const Device& dev = devices_.at(ref.device);
  if (ref.local < 0 || ref.local >= static_cast<int>(dev.terminals.size()))
    throw Error(dev.name + ": terminal index " + std::to_string(ref.local) +
                " out of range");
  return dev.terminals[ref.local];
}

void Network::connect(NetId net, const std::vector<TerminalRef>& refs) {
  Net& n = nets_.at(net);
  for (auto ref : refs) {
    int gid = terminal_index(ref);
    Terminal& term = terminals_[gid];
    if (term.net) {
      throw Error("terminal " + devices_[term.device].name + "[" +
                  std::to_string(term.local_index) + "] is already wired to " +
                  nets_[*term.net].name + "; cannot also join " + n.name);
    }
    term.net = net;
    n.terminals.push_back(gid);
  }
}

NetId Network::connect_new(std::string name, const std::vector<TerminalRef>& refs) {
  NetId id = add_net(std::move(name));
  connect(id, refs);
  return id;
}

DeviceId Network::find_device(const std::string& name) const {
  for (size_t i = 0; i < devices_.size(); ++i)
    if (devices_[i].name == name) return static_cast<DeviceId>(i);
  throw Error("no device named " + name);
}

NetId Network::find_net(const std::string& name) const {
  for (size_t i = 0; i < nets_.size(); ++i)
    if (nets_[i].name == name) return static_cast<NetId>(i);
  throw Error("no net named " + name);
}

bool Network::fully_wired() const {
  return std::all_of(terminals_.begin(), terminals_.end(),
                     [](const Terminal& t) { return t.net.has_value(); });
}

std::vector<std::string> Network::unwired_report() const {
  std::vector<std::string> out;
  for (const auto& t : terminals_)
    if (!t.net)
      out.push_back(devices_[t.device].name + "[" +
                    std::to_string(t.local_index) + "] is not wired to any net");
  return out;
}

std::vector<std::string> Network::validate() const {
  std::vector<std::string> issues = unwired_report();
  for (size_t d = 0; d < devices_.size(); ++d) {
    auto spec_issues = validate_spec(devices_[d].spec, horizon_, scenarios_);
    for (auto& e : spec_issues) issues.push_back(devices_[d].name + ": " + e);
  }
  for (const auto& n : nets_)
    if (n.terminals.empty())
      issues.push_back("net " + n.name + " has no member terminals");
  return issues;
}

std::vector<std::string> Network::warnings() const {
  std::vector<std::string> out;
  for (const auto& n : nets_)
    if (n.terminals.size() == 1)
      out.push_back("net " + n.name +
                    " has a single terminal; its power is forced to 0");
  return out;
}

Eigen::SparseMatrix<double> Network::adjacency() const {
  auto missing = unwired_report();
  if (!missing.empty()) throw ValidationError(std::move(missing));
  Eigen::SparseMatrix<double> A(num_nets(), num_terminals());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(terminals_.size());
  for (const auto& t : terminals_)
    trip.emplace_back(*t.net, t.global_index, 1.0);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::SparseMatrix<double> Network::selection(DeviceId d) const {
  const Device& dev = devices_.at(d);
  Eigen::SparseMatrix<double> B(static_cast<int>(dev.terminals.size()),
                                num_terminals());
  std::vector<Eigen::Triplet<double>> trip;
  for (size_t i = 0; i < dev.terminals.size(); ++i)
    trip.emplace_back(static_cast<int>(i), dev.terminals[i], 1.0);
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

void Network::set_scenarios(int S, std::vector<double> probabilities) {
  if (S < 1) throw Error("scenario count must be >= 1");
  scenarios_ = S;
  if (probabilities.empty())
    probabilities.assign(S, 1.0 / S);
  if (static_cast<int>(probabilities.size()) != S)
    throw Error("probability vector length must equal scenario count");
  probabilities_ = std::move(probabilities);
}

DeviceId add_lossy_battery(Network& net, const std::string& name,
                           const IdealStorage& storage, const LossyLine& line) {
  // Ideal storage behind a lossy transmission line; terminal 1 of the line is
  // the exposed side.
  return net.add_composite(
      name, {{"storage", storage}, {"line", line}},
      {{TerminalRef{0, 0}, TerminalRef{1, 1}}}, {TerminalRef{1, 0}});
}

}  // namespace gridflow
