#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "gridpass/errors.hpp"
#include "gridpass/ibr.hpp"
#include "gridpass/network.hpp"
#include "gridpass/passivity.hpp"

using namespace gridpass;

namespace {

NetworkTopology with_shunts(int n_nodes, std::vector<Branch> lines) {
  NetworkTopology t;
  t.n_nodes = n_nodes;
  t.branches = std::move(lines);
  for (int n = 1; n <= n_nodes; ++n) t.branches.push_back({0, n, BranchKind::IbrShunt, 0, 0, "ibr" + std::to_string(n)});
  return t;
}

Branch line(int from, int to, double r, double L = 1e-3) { return {from, to, BranchKind::RlLine, r, L, ""}; }

}  // namespace

TEST_CASE("incidence of two inverter nodes joined by one line") {
  const Incidence inc = build_incidence(with_shunts(2, {line(1, 2, 0.35)}));
  REQUIRE(inc.C0.rows() == 2);
  REQUIRE(inc.C0.cols() == 1);
  CHECK(inc.C0(0, 0) == 1);
  CHECK(inc.C0(1, 0) == -1);
  CHECK(inc.C_full.rightCols(2).isApprox(-Mat::Identity(2, 2)));
}

TEST_CASE("a single inverter has an empty reduced incidence") {
  const NetworkTopology t = with_shunts(1, {});
  const Incidence inc = build_incidence(t);
  CHECK(inc.C0.cols() == 0);
  CHECK(inc.C_full.isApprox(-Mat::Identity(1, 1)));
  CHECK_THROWS_AS(network_state_space(t), Error);
  try {
    network_passivity_index(t);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyNetwork);
  }
}

TEST_CASE("three-node incidence columns") {
  const Incidence inc = build_incidence(with_shunts(3, {line(1, 2, 0.3), line(2, 3, 0.3), line(1, 3, 0.3)}));
  for (int c = 0; c < inc.C0.cols(); ++c) {
    CHECK(inc.C0.col(c).sum() == 0);
    CHECK(inc.C0.col(c).cwiseAbs().sum() == 2);
  }
}

TEST_CASE("shunt branches must come last") {
  NetworkTopology t = with_shunts(2, {line(1, 2, 0.35)});
  std::rotate(t.branches.begin(), t.branches.begin() + 1, t.branches.end());
  CHECK_THROWS_AS(build_incidence(t), Error);
}

TEST_CASE("passivity index of simple networks") {
  const auto one = network_passivity_index(with_shunts(2, {line(1, 2, 0.35)}));
  CHECK(one.lambda_c_max == doctest::Approx(2));
  CHECK(one.sigma_net == doctest::Approx(0.175));

  const double r = 0.2;
  const auto parallel = network_passivity_index(with_shunts(2, {line(1, 2, r), line(1, 2, r)}));
  CHECK(parallel.sigma_net == doctest::Approx(r / 4));

  const auto base = network_passivity_index(with_shunts(3, {line(1, 2, 0.3), line(2, 3, 0.5)}));
  const auto scaled = network_passivity_index(with_shunts(3, {line(1, 2, 3.0), line(2, 3, 5.0)}));
  CHECK(scaled.sigma_net == doctest::Approx(10 * base.sigma_net).epsilon(1e-14));
}

TEST_CASE("branch coupling is skew and the Gram bound holds") {
  const NetworkTopology t = with_shunts(3, {line(1, 2, 0.3, 2e-3), line(2, 3, 0.5, 1e-3), line(1, 3, 0.4, 3e-3)});
  const NetworkStateSpace ss = network_state_space(t);
  CHECK((ss.W_mat + ss.W_mat.transpose()).cwiseAbs().maxCoeff() == 0);
  const auto idx = network_passivity_index(t);
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Vec x(ss.W_mat.rows());
    for (auto& v : x) v = g(rng);
    CHECK(std::abs(x.dot(ss.W_mat * x)) < 1e-9 * x.squaredNorm());
    CHECK((ss.C_out * x).squaredNorm() <= idx.lambda_c_max * x.squaredNorm() * (1 + 1e-12));
  }
  // D and Q subnetworks share the incidence
  const Incidence inc = build_incidence(t);
  CHECK(ss.C_out.topLeftCorner(3, 3).isApprox(inc.C0));
  CHECK(ss.C_out.bottomRightCorner(3, 3).isApprox(inc.C0));
}

TEST_CASE("single branch state space matches the rotating RL circuit") {
  const double r = 0.35, L = 2e-3;
  NetworkTopology t = with_shunts(2, {line(1, 2, r, L)});
  const NetworkStateSpace ss = network_state_space(t);
  const StateSpaceModel m = ss.as_state_space();
  REQUIRE(m.A.rows() == 2);
  const double w = t.omega_0;
  CHECK(m.A(0, 0) == doctest::Approx(-r / L));
  CHECK(m.A(0, 1) == doctest::Approx(w));
  CHECK(m.A(1, 0) == doctest::Approx(-w));

  // step of 10 V across the branch on the D axis; closed-form solution of the 2x2 system
  Vec u = Vec::Zero(4);
  u[0] = 10.0;
  const Vec b = m.B * u;
  const double a = r / L;
  const double E = b[0];
  const double den = a * a + w * w;
  const double tt = 3e-3;
  const double decay = std::exp(-a * tt);
  const double id_exact = E * (a - decay * (a * std::cos(w * tt) - w * std::sin(w * tt))) / den;
  const double iq_exact = -E * (w - decay * (w * std::cos(w * tt) + a * std::sin(w * tt))) / den;

  // matrix exponential through the eigen decomposition
  Eigen::ComplexEigenSolver<Mat> es(m.A);
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd ex(2);
  for (int k = 0; k < 2; ++k) ex[k] = (std::exp(es.eigenvalues()[k] * tt) - 1.0) / es.eigenvalues()[k];
  const Eigen::VectorXcd x = V * ex.asDiagonal() * V.inverse() * b.cast<std::complex<double>>();
  CHECK(x[0].real() == doctest::Approx(id_exact).epsilon(1e-10));
  CHECK(x[1].real() == doctest::Approx(iq_exact).epsilon(1e-10));
}

TEST_CASE("network output feedback passivity residual stays non-negative") {
  const NetworkTopology t = with_shunts(3, {line(1, 2, 0.3, 2e-3), line(2, 3, 0.5, 1e-3)});
  const NetworkStateSpace ss = network_state_space(t);
  const StateSpaceModel m = ss.as_state_space();
  const double sigma = network_passivity_index(t).sigma_net;
  const double dt = 1e-5;
  Vec x = Vec::Zero(m.A.rows());
  std::vector<Vec> us, ys;
  auto input = [](double tt) {
    Vec u(6);
    for (int k = 0; k < 6; ++k) u[k] = 50 * std::sin(2 * kPi * (20 + 17 * k) * tt + k);
    return u;
  };
  for (int s = 0; s <= 5000; ++s) {
    const double tt = s * dt;
    us.push_back(input(tt));
    ys.push_back(m.C * x);
    auto f = [&](const Vec& xx, double ts) { return Vec(m.A * xx + m.B * input(ts)); };
    const Vec k1 = f(x, tt), k2 = f(x + 0.5 * dt * k1, tt + dt / 2), k3 = f(x + 0.5 * dt * k2, tt + dt / 2),
              k4 = f(x + dt * k3, tt + dt);
    x += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const auto r = ofp_residual(us, ys, sigma, dt);
  CHECK(*std::min_element(r.begin(), r.end()) >= -1e-6);
}

TEST_CASE("topology validation") {
  NetworkTopology t = with_shunts(2, {line(1, 2, 0.0)});
  CHECK_THROWS_AS(t.validate(), Error);
  t = with_shunts(3, {line(1, 2, 0.3)});
  CHECK_NOTHROW(t.validate());  // node 3 reaches the neutral through its shunt
}
