#include <doctest.h>

#include <numeric>

#include "dsand/error.hpp"
#include "dsand/rng.hpp"
#include "dsand/sampling.hpp"
#include "dsand/spectral_odometer.hpp"
#include "dsand/toppling.hpp"

using namespace dsand;

namespace {

LatticeField gaussian_config(const TorusShape& shape, std::uint64_t seed) {
  return make_initial_config(sample_sigma(SigmaSpec{}, shape, seed));
}

double max_diff(const LatticeField& a, const LatticeField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("one parallel step conserves mass and moves only the excess") {
  const TorusShape shape(2, 4);
  LatticeField s(shape, 0.5);
  s[5] = 3.0;
  SandpileState st(s, Operator::nearest_neighbour(shape));
  const double moved = parallel_topple_step(st);
  CHECK(moved == doctest::Approx(2.0));
  CHECK(st.heights()[5] == doctest::Approx(1.0));
  CHECK(st.u[5] == doctest::Approx(2.0));
  CHECK(st.heights()[shape.shift(5, 0, 1)] == doctest::Approx(1.0));
  CHECK(st.heights().sum() == doctest::Approx(s.sum()).epsilon(1e-15));
}

TEST_CASE("stable configurations do not move") {
  const TorusShape shape(2, 6);
  SandpileState st(LatticeField(shape, 1.0), Operator::nearest_neighbour(shape));
  const auto r = stabilize(st);
  CHECK(r.status == StabilizationStatus::Stabilized);
  CHECK(r.steps == 0);
  CHECK(st.u.max() == 0.0);
}

TEST_CASE("toppling reproduces the spectral odometer") {
  for (int d : {1, 2}) {
    const TorusShape shape(d, 8);
    for (const auto& op : {Operator::nearest_neighbour(shape), Operator::long_range(shape, 1.0)}) {
      for (std::uint64_t seed : {1u, 2u}) {
        const auto s = gaussian_config(shape, seed);
        SandpileState st(s, op);
        const auto r = stabilize(st);
        REQUIRE(r.status == StabilizationStatus::Stabilized);
        const auto u = odometer_spectral(s, op);
        CHECK(max_diff(st.u, u) <= 1e-6 * (1.0 + u.max_abs()));
        CHECK(std::abs(r.final_mass - r.initial_mass) <= 1e-10 * r.initial_mass);
        const auto heights = st.heights();
        for (double v : heights.values()) CHECK(std::abs(v - 1.0) <= 1e-8 * shape.size());
      }
    }
  }
}

TEST_CASE("sequential orders give the same odometer") {
  const TorusShape shape(2, 6);
  const auto op = Operator::nearest_neighbour(shape);
  const auto s = gaussian_config(shape, 4);
  SandpileState par(s, op);
  stabilize(par);
  std::vector<std::size_t> order(shape.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  SandpileState seq(s, op);
  StabilizeOptions o;
  o.sequential_order = order;
  const auto r = stabilize(seq, o);
  REQUIRE(r.status == StabilizationStatus::Stabilized);
  CHECK(max_diff(par.u, seq.u) < 1e-6);
}

TEST_CASE("sequential pass validates its order") {
  const TorusShape shape(1, 4);
  SandpileState st(LatticeField(shape, 1.0), Operator::nearest_neighbour(shape));
  const std::vector<std::size_t> dup{0, 1, 1, 3};
  CHECK_THROWS_AS(sequential_topple_pass(st, dup), Error);
  const std::vector<std::size_t> short_{0, 1};
  CHECK_THROWS_AS(sequential_topple_pass(st, short_), Error);
}

TEST_CASE("mass above n^d explodes, the step limit is reported") {
  const TorusShape shape(2, 4);
  const auto op = Operator::nearest_neighbour(shape);
  SandpileState heavy(LatticeField(shape, 1.01), op);
  CHECK(stabilize(heavy).status == StabilizationStatus::Exploded);

  SandpileState slow(gaussian_config(shape, 1), op);
  StabilizeOptions o;
  o.max_steps = 3;
  const auto r = stabilize(slow, o);
  CHECK(r.status == StabilizationStatus::StepLimit);
  CHECK(r.steps == 3);
  CHECK(std::string(status_name(r.status)) == "step-limit");
}

TEST_CASE("snapshots are taken at the requested cadence") {
  const TorusShape shape(1, 8);
  SandpileState st(gaussian_config(shape, 2), Operator::nearest_neighbour(shape));
  StabilizeOptions o;
  o.snapshot_every = 10;
  std::vector<long> seen;
  o.on_snapshot = [&](const SandpileState& s) { seen.push_back(s.steps); };
  const auto r = stabilize(st, o);
  REQUIRE(!seen.empty());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == 10 * static_cast<long>(i + 1));
  CHECK(seen.back() <= r.steps);
}

TEST_CASE("density probe separates low and high density") {
  const auto op = Operator::nearest_neighbour(TorusShape(2, 8));
  const auto low = density_probe(0.5, op, 10, 1);
  CHECK(low.stabilized == 10);
  CHECK(low.fraction_stabilized == 1.0);
  const auto high = density_probe(1.5, op, 10, 1);
  CHECK(high.exploded == 10);
  const auto near = density_probe(0.99, op, 5, 2, 0.05);
  CHECK(near.stabilized == 5);
  CHECK(near.mean_odometer > 0.0);
}
