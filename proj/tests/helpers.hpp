#ifndef GRIDFLOW_TEST_HELPERS_HPP
#define GRIDFLOW_TEST_HELPERS_HPP

#include <vector>

#include "gridflow/forecast.hpp"
#include "gridflow/network.hpp"
#include "gridflow/pricing.hpp"
#include "gridflow/problem.hpp"
#include "gridflow/solution.hpp"

namespace gft {

using namespace gridflow;

// Hand-rolled problem builder for solver-level tests.
struct RawProblem {
  int n = 0;
  std::vector<Eigen::Triplet<double>> Pt, Ct;
  std::vector<double> q, l, u;

  int var() { return n++; }
  void quad(int i, double w) { Pt.emplace_back(i, i, w); }
  void quad(int i, int j, double w) {
    Pt.emplace_back(i, j, w);
    Pt.emplace_back(j, i, w);
  }
  int row(double lo, double hi) {
    l.push_back(lo);
    u.push_back(hi);
    return static_cast<int>(l.size()) - 1;
  }
  void c(int r, int i, double v) { Ct.emplace_back(r, i, v); }

  CanonicalProblem build() const {
    CanonicalProblem p;
    p.n = n;
    p.m = static_cast<int>(l.size());
    p.P.resize(n, n);
    p.P.setFromTriplets(Pt.begin(), Pt.end());
    p.C.resize(p.m, n);
    p.C.setFromTriplets(Ct.begin(), Ct.end());
    p.q = Eigen::VectorXd::Zero(n);
    for (size_t i = 0; i < q.size(); ++i) p.q[i] = q[i];
    p.l = Eigen::Map<const Eigen::VectorXd>(l.data(), l.size());
    p.u = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
    p.col_tags.resize(n);
    p.row_tags.resize(p.m);
    p.M = 0;
    p.N = 0;
    return p;
  }
};

// generator + fixed load on one net; the smallest analytic fixture
inline Network two_device_network(double alpha = 0.02, double beta = 30,
                                  double load = 50) {
  Network net;
  GenericGenerator gen;
  gen.alpha = alpha;
  gen.beta = beta;
  gen.p_max = 1000;
  DeviceId g = net.add_device("gen", gen);
  DeviceId l = net.add_device("load", FixedLoad{Schedule(load)});
  net.connect_new("net0", {{g, 0}, {l, 0}});
  return net;
}

// The three-bus transmission example used throughout.
inline Network three_bus_network() {
  Network net;
  GenericGenerator g1;
  g1.alpha = 0.02;
  g1.beta = 30;
  g1.p_min = 0;
  g1.p_max = 1000;
  GenericGenerator g2;
  g2.alpha = 0.2;
  g2.beta = 0;
  g2.p_min = 0;
  g2.p_max = 100;
  DeviceId gen1 = net.add_device("gen1", g1);
  DeviceId load1 = net.add_device("load1", FixedLoad{Schedule(50.0)});
  DeviceId line1 = net.add_device("line1", LosslessLine::symmetric(50));
  DeviceId line2 = net.add_device("line2", LosslessLine::symmetric(10));
  DeviceId line3 = net.add_device("line3", LosslessLine::symmetric(50));
  DeviceId load2 = net.add_device("load2", FixedLoad{Schedule(100.0)});
  DeviceId gen2 = net.add_device("gen2", g2);
  net.connect_new("net1", {{gen1, 0}, {load1, 0}, {line1, 0}, {line2, 0}});
  net.connect_new("net2", {{line1, 1}, {line3, 0}, {load2, 0}});
  net.connect_new("net3", {{line2, 1}, {line3, 1}, {gen2, 0}});
  return net;
}

}  // namespace gft

#endif
