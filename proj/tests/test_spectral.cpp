#include <doctest.h>

#include "dsand/error.hpp"
#include "dsand/sampling.hpp"
#include "dsand/spectral_odometer.hpp"
#include "oracles.hpp"

using namespace dsand;

namespace {

LatticeField gaussian_config(const TorusShape& shape, std::uint64_t seed) {
  return make_initial_config(sample_sigma(SigmaSpec{}, shape, seed));
}

}  // namespace

TEST_CASE("eta solves the Poisson equation and u has minimum zero") {
  const TorusShape shape(2, 8);
  for (const auto& op : {Operator::nearest_neighbour(shape), Operator::long_range(shape, 0.6)}) {
    const auto s = gaussian_config(shape, 3);
    const auto eta = eta_field(s, op);
    const auto lhs = op.apply(eta);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(-lhs[i] == doctest::Approx(s[i] - 1.0).epsilon(1e-10));
    CHECK(std::abs(eta.mean()) < 1e-13);
    const auto u = odometer_spectral(s, op);
    CHECK(u.min() == 0.0);
    // s + Delta u = 1 on the torus
    const auto lu = op.apply(u);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] + lu[i] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("obstacle formulation gives the same odometer exactly") {
  const TorusShape shape(2, 16);
  const auto op = Operator::nearest_neighbour(shape);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = gaussian_config(shape, seed);
    const auto gamma = obstacle_gamma(s, op);
    const auto eta = eta_field(s, op);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(gamma[i] == -eta[i]);
    const auto u = odometer_spectral(s, op);
    const auto v = torus_obstacle_odometer(s, op);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(u[i] - v[i]) <= 1e-12);
  }
}

TEST_CASE("translating s translates eta") {
  const TorusShape shape(2, 6);
  const auto op = Operator::nearest_neighbour(shape);
  const auto s = gaussian_config(shape, 7);
  LatticeField t(shape);
  for (std::size_t i = 0; i < s.size(); ++i) t[shape.shift(i, 1, 2)] = s[i];
  const auto a = eta_field(s, op);
  const auto b = eta_field(t, op);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(b[shape.shift(i, 1, 2)] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("mass mismatch is reported") {
  const TorusShape shape(1, 4);
  const auto op = Operator::nearest_neighbour(shape);
  try {
    eta_field(LatticeField(shape, 1.5), op);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MassMismatch);
  }
}

TEST_CASE("exact covariance equals G P G from dense linear algebra") {
  const int d = 2, n = 3;
  const TorusShape shape(d, n);
  const auto op = Operator::nearest_neighbour(shape);
  const auto G = oracle::green_dense(oracle::nn_matrix(d, n));
  const auto table = eta_covariance_exact(op);
  // eta = G (sigma - mean sigma), Cov = G P G^T = G G for unit white noise.
  for (std::size_t x = 0; x < shape.size(); ++x) {
    double c = 0.0;
    for (std::size_t k = 0; k < shape.size(); ++k) c += G[x][k] * G[0][k];
    CHECK(table.c[x] == doctest::Approx(c).epsilon(1e-10));
  }
}

TEST_CASE("correlated covariance uses the multiplier weights") {
  const TorusShape shape(1, 5);
  const auto op = Operator::long_range(shape, 1.0);
  const std::vector<double> khat{2.0, 1.0, 0.5, 0.5, 1.0};
  const auto table = eta_covariance_exact(op, &khat);
  // Dense: Cov(sigma) = C_sigma(x - y) with C_sigma = idft(khat); eta = G sigma.
  const auto G = oracle::green_dense(oracle::convolution_matrix(op.kernel()->p, 1, 5));
  std::vector<double> csig(5, 0.0);
  for (int x = 0; x < 5; ++x) {
    for (int w = 0; w < 5; ++w) csig[static_cast<std::size_t>(x)] += khat[static_cast<std::size_t>(w)] * std::cos(2 * oracle::pi * x * w / 5.0);
  }
  for (int x = 0; x < 5; ++x) {
    double c = 0.0;
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        c += G[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)] * csig[static_cast<std::size_t>(((a - b) % 5 + 5) % 5)] *
             G[0][static_cast<std::size_t>(b)];
      }
    }
    CHECK(table.c[static_cast<std::size_t>(x)] == doctest::Approx(c).epsilon(1e-10));
  }
}

TEST_CASE("axis covariance agrees with the full table") {
  for (auto [d, n] : {std::pair{1, 16}, std::pair{2, 8}, std::pair{3, 6}}) {
    const TorusShape shape(d, n);
    const auto op = Operator::nearest_neighbour(shape);
    const auto full = eta_covariance_exact(op);
    const auto axis = nn_covariance_axis(d, n);
    const auto generic = covariance_axis(op);
    std::vector<int> c(static_cast<std::size_t>(d), 0);
    for (int r = 0; r < n; ++r) {
      c[0] = r;
      CHECK(axis[static_cast<std::size_t>(r)] == doctest::Approx(full.c[shape.index(c)]).epsilon(1e-10));
      CHECK(generic[static_cast<std::size_t>(r)] == doctest::Approx(full.c[shape.index(c)]).epsilon(1e-10));
    }
  }
}
