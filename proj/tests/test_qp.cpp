#include <doctest.h>

#include <cstring>

#include <Eigen/Dense>

#include "gridflow/qp.hpp"
#include "gridflow/solution.hpp"
#include "helpers.hpp"

using namespace gridflow;

TEST_SUITE("qp") {

TEST_CASE("min x^2 subject to x = 1") {
  gft::RawProblem rp;
  int x = rp.var();
  rp.quad(x, 2.0);  // (1/2) * 2 * x^2 = x^2
  rp.q.push_back(0.0);
  int r = rp.row(1.0, 1.0);
  rp.c(r, x, 1.0);
  auto prob = rp.build();
  auto res = solve_qp(prob);
  REQUIRE(res.report.status == SolveStatus::Optimal);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(res.report.objective == doctest::Approx(1.0).epsilon(1e-8));
  // stationarity Px + q + C'y = 0 pins the equality dual
  CHECK(res.y[0] == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(std::abs(2 * res.x[0] + res.y[0]) <= 1e-7);
}

TEST_CASE("box and linear term") {
  // min (x-3)^2 s.t. 0 <= x <= 2  ->  x = 2, dual 2 on the active upper side
  gft::RawProblem rp;
  int x = rp.var();
  rp.quad(x, 2.0);
  rp.q.push_back(-6.0);
  int r = rp.row(0.0, 2.0);
  rp.c(r, x, 1.0);
  auto res = solve_qp(rp.build());
  REQUIRE(res.report.status == SolveStatus::Optimal);
  CHECK(res.x[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(res.y[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("random equality QPs match a dense KKT solve") {
  forecast::Rng rng(12345);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 5 + static_cast<int>(rng.next_u32() % 46);  // <= 50
    int k = 1 + static_cast<int>(rng.next_u32() % (n / 2));
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = rng.normal() * 0.3;
    Eigen::MatrixXd Pd = A.transpose() * A + Eigen::MatrixXd::Identity(n, n) * 0.5;
    Eigen::MatrixXd Cd(k, n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) Cd(i, j) = rng.normal();
    Eigen::VectorXd q(n), b(k);
    for (int i = 0; i < n; ++i) q[i] = rng.normal();
    for (int i = 0; i < k; ++i) b[i] = rng.normal();

    gft::RawProblem rp;
    for (int i = 0; i < n; ++i) {
      rp.var();
      rp.q.push_back(q[i]);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        if (i == j)
          rp.quad(i, Pd(i, i));
        else
          rp.quad(i, j, Pd(i, j));
    for (int i = 0; i < k; ++i) {
      int r = rp.row(b[i], b[i]);
      for (int j = 0; j < n; ++j) rp.c(r, j, Cd(i, j));
    }
    auto res = solve_qp(rp.build());
    REQUIRE(res.report.status == SolveStatus::Optimal);

    Eigen::MatrixXd K(n + k, n + k);
    K.setZero();
    K.topLeftCorner(n, n) = Pd;
    K.topRightCorner(n, k) = Cd.transpose();
    K.bottomLeftCorner(k, n) = Cd;
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -q;
    rhs.tail(k) = b;
    Eigen::VectorXd sol = K.lu().solve(rhs);
    for (int i = 0; i < n; ++i)
      CHECK(res.x[i] == doctest::Approx(sol[i]).epsilon(1e-6).scale(1.0));
    for (int i = 0; i < k; ++i)
      CHECK(res.y[i] == doctest::Approx(sol[n + i]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("objective scaling leaves the argmin unchanged and scales duals") {
  auto make = [](double s) {
    gft::RawProblem rp;
    int x = rp.var();
    int y = rp.var();
    rp.quad(x, 2.0 * s);
    rp.quad(y, 4.0 * s);
    rp.quad(x, y, 0.5 * s);
    rp.q.push_back(-3.0 * s);
    rp.q.push_back(1.0 * s);
    int r = rp.row(1.0, 1.0);
    rp.c(r, x, 1.0);
    rp.c(r, y, 1.0);
    int r2 = rp.row(-0.2, kInf);
    rp.c(r2, y, 1.0);
    return rp.build();
  };
  auto a = solve_qp(make(1.0));
  auto b = solve_qp(make(100.0));
  REQUIRE(a.report.status == SolveStatus::Optimal);
  REQUIRE(b.report.status == SolveStatus::Optimal);
  CHECK(a.x[0] == doctest::Approx(b.x[0]).epsilon(1e-6));
  CHECK(a.x[1] == doctest::Approx(b.x[1]).epsilon(1e-6));
  CHECK(100.0 * a.y[0] == doctest::Approx(b.y[0]).epsilon(1e-5).scale(1.0));
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  auto net = gft::three_bus_network();
  auto prob = compile(net);
  auto r1 = solve_qp(prob);
  auto r2 = solve_qp(prob);
  REQUIRE(r1.x.size() == r2.x.size());
  CHECK(std::memcmp(r1.x.data(), r2.x.data(), sizeof(double) * r1.x.size()) == 0);
  CHECK(std::memcmp(r1.y.data(), r2.y.data(), sizeof(double) * r1.y.size()) == 0);
}

TEST_CASE("primal infeasibility is detected with a row certificate") {
  // fixed load exceeding total generation capacity
  Network net;
  GenericGenerator gen;
  gen.alpha = 0.1;
  gen.p_max = 10;
  auto g = net.add_device("small_gen", gen);
  auto l = net.add_device("big_load", FixedLoad{Schedule(50.0)});
  net.connect_new("net0", {{g, 0}, {l, 0}});
  auto prob = compile(net);
  auto res = solve_qp(prob);
  REQUIRE(res.report.status == SolveStatus::PrimalInfeasible);
  CHECK(res.report.worst_row >= 0);
  CHECK(!prob.describe_row(res.report.worst_row, net).empty());
}

TEST_CASE("dual infeasibility on an unbounded grid-tie cycle") {
  // buying cheap from one tie and selling dear to the other earns without limit
  Network net;
  auto cheap = net.add_device("cheap", GridTie{2.0, 1.0, kInf, kInf});
  auto dear = net.add_device("dear", GridTie{10.0, 8.0, kInf, kInf});
  net.connect_new("net0", {{cheap, 0}, {dear, 0}});
  auto res = solve_qp(compile(net));
  CHECK(res.report.status == SolveStatus::DualInfeasible);
}

TEST_CASE("KKT residual contract on an optimal report") {
  // non-degenerate fixture: polish should leave near-exact KKT residuals
  Network net(2, 1.0);
  GenericGenerator g;
  g.alpha = 0.05;
  g.beta = 3;
  g.p_max = 100;
  auto gen = net.add_device("gen", g);
  auto load = net.add_device("load", FixedLoad{Schedule::of({20.0, 35.0})});
  auto tie = net.add_device("tie", GridTie{50.0, 1.0, 5, 5});
  net.connect_new("bus", {{gen, 0}, {load, 0}, {tie, 0}});
  auto prob = compile(net);
  auto res = solve_qp(prob);
  REQUIRE(res.report.status == SolveStatus::Optimal);
  CHECK(res.report.primal_residual <= 1e-6);
  CHECK(res.report.dual_residual <= 1e-6);
  Eigen::VectorXd Cx = prob.C * res.x;
  for (int i = 0; i < prob.m; ++i) {
    CHECK(Cx[i] >= prob.l[i] - 1e-6);
    CHECK(Cx[i] <= prob.u[i] + 1e-6);
  }
  Eigen::VectorXd stat = prob.P * res.x + prob.q + prob.C.transpose() * res.y;
  CHECK(stat.cwiseAbs().maxCoeff() <= 1e-6);
  // slackness signs: positive duals only where the upper side is active,
  // negative only where the lower side is
  for (int i = 0; i < prob.m; ++i) {
    if (prob.l[i] == prob.u[i]) continue;
    if (res.y[i] > 1e-7) CHECK(Cx[i] >= prob.u[i] - 1e-5);
    if (res.y[i] < -1e-7) CHECK(Cx[i] <= prob.l[i] + 1e-5);
  }
  // the status contract also holds on the degenerate three-bus instance,
  // at the looser eps_abs + eps_rel * scale bound it reports against
  auto tb = gft::three_bus_network();
  auto tbp = compile(tb);
  auto tbr = solve_qp(tbp);
  REQUIRE(tbr.report.status == SolveStatus::Optimal);
  double scale = (tbp.C * tbr.x).cwiseAbs().maxCoeff();
  CHECK(tbr.report.primal_residual <= 1e-6 + 1e-6 * scale);
}

TEST_CASE("warm start reproduces the same optimum") {
  auto net = gft::two_device_network();
  auto prob = compile(net);
  auto cold = solve_qp(prob);
  auto warm = solve_qp(prob, {}, &cold.x, &cold.y);
  REQUIRE(warm.report.status == SolveStatus::Optimal);
  CHECK(warm.x[0] == doctest::Approx(cold.x[0]).epsilon(1e-9));
  CHECK(warm.report.iterations <= cold.report.iterations);
}

}  // TEST_SUITE
