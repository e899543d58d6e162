#include <doctest.h>

#include <cmath>

#include "dsand/error.hpp"
#include "dsand/rng.hpp"
#include "dsand/sampling.hpp"
#include "oracles.hpp"

using namespace dsand;

TEST_CASE("streams are pure functions of key and counter") {
  rng::Stream a(42, 3), b(42, 3), c(42, 4);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  rng::Stream u(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    const int k = u.below(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("normal draws have unit variance") {
  rng::Stream s(9, 0);
  const int m = 200000;
  double sum = 0.0, sq = 0.0, q4 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = s.normal();
    sum += x;
    sq += x * x;
    q4 += x * x * x * x;
  }
  CHECK(std::abs(sum / m) < 5.0 / std::sqrt(m));
  CHECK(std::abs(sq / m - 1.0) < 5.0 * std::sqrt(2.0 / m));
  CHECK(std::abs(q4 / m - 3.0) < 5.0 * std::sqrt(96.0 / m));
}

TEST_CASE("stable draws have the symmetric stable characteristic function") {
  for (double alpha : {0.7, 1.0, 1.5}) {
    const double c = 0.8;
    rng::Stream s(5, static_cast<std::uint64_t>(alpha * 10));
    const int m = 100000;
    std::vector<double> xs(m);
    for (auto& x : xs) x = sample_stable(alpha, c, s);
    for (double t : {0.3, 1.0, 2.0}) {
      double re = 0.0;
      for (double x : xs) re += std::cos(t * x);
      re /= m;
      const double want = std::exp(-std::pow(c * t, alpha));
      CHECK(std::abs(re - want) < 5.0 / std::sqrt(2.0 * m));
    }
  }
}

TEST_CASE("Pareto tails follow the index") {
  SigmaSpec spec;
  spec.regime = SigmaRegime::Pareto;
  spec.pareto_index = 1.5;
  const TorusShape shape(1, 100000);
  const auto sigma = sample_sigma(spec, shape, 3);
  for (double x : {2.0, 5.0}) {
    double count = 0.0;
    for (double v : sigma.values()) count += std::abs(v) > x;
    const double p = std::pow(x, -1.5);
    CHECK(std::abs(count / shape.size() - p) < 5.0 * std::sqrt(p * (1 - p) / shape.size()));
  }
  spec.symmetrized = false;
  const auto shifted = sample_sigma(spec, shape, 3);
  double below = 0.0;
  for (double v : shifted.values()) below += v < 0.0;
  CHECK(std::abs(below / shape.size() - 0.5) < 5.0 * 0.5 / std::sqrt(shape.size()));
}

TEST_CASE("sampling is deterministic in the seed") {
  const TorusShape shape(2, 8);
  for (auto regime : {SigmaRegime::IidGaussian, SigmaRegime::CorrelatedGaussian, SigmaRegime::Stable,
                      SigmaRegime::Pareto, SigmaRegime::IidUniform}) {
    SigmaSpec spec;
    spec.regime = regime;
    spec.multiplier = MultiplierSpec::parse("power:1");
    const auto a = sample_sigma(spec, shape, 17);
    const auto b = sample_sigma(spec, shape, 17);
    const auto c = sample_sigma(spec, shape, 18);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a[i] == b[i];
      differ = differ || a[i] != c[i];
    }
    CHECK(same);
    CHECK(differ);
  }
}

TEST_CASE("initial configuration has mass exactly n^d up to rounding") {
  SigmaSpec spec;
  const auto s = make_initial_config(sample_sigma(spec, TorusShape(2, 16), 1));
  CHECK(std::abs(s.sum() - 256.0) < 1e-11);
}

TEST_CASE("correlated Gaussian field has spectral variance K^") {
  const TorusShape shape(1, 8);
  SigmaSpec spec;
  spec.regime = SigmaRegime::CorrelatedGaussian;
  spec.multiplier = MultiplierSpec::parse("cosine:0.5");
  const auto khat = multiplier_table(spec.multiplier, shape);
  const int m = 20000;
  std::vector<double> acc(shape.size(), 0.0), acc2(shape.size(), 0.0);
  for (int k = 0; k < m; ++k) {
    const auto sigma = sample_sigma(spec, shape, static_cast<std::uint64_t>(k));
    const auto F = oracle::naive_dft({sigma.values().begin(), sigma.values().end()}, 1, 8);
    for (std::size_t w = 0; w < F.size(); ++w) {
      acc[w] += std::norm(F[w]);
      acc2[w] += std::norm(F[w]) * std::norm(F[w]);
    }
  }
  for (std::size_t w = 0; w < shape.size(); ++w) {
    const double mean = acc[w] / m;
    const double se = std::sqrt((acc2[w] / m - mean * mean) / m);
    CHECK(std::abs(mean - khat[w]) < 5.0 * se);
  }
}

TEST_CASE("white multiplier gives per-site variance n^d") {
  const TorusShape shape(1, 4);
  SigmaSpec spec;
  spec.regime = SigmaRegime::CorrelatedGaussian;
  const int m = 40000;
  double sq = 0.0;
  for (int k = 0; k < m; ++k) sq += std::pow(sample_sigma(spec, shape, static_cast<std::uint64_t>(k))[0], 2);
  CHECK(std::abs(sq / m - 4.0) < 5.0 * 4.0 * std::sqrt(2.0 / m));
}

TEST_CASE("multiplier validation reports the first bad frequency") {
  const TorusShape shape(1, 6);
  auto table = multiplier_table(MultiplierSpec::parse("constant:2"), shape);
  CHECK_FALSE(validate_multiplier(std::span<const double>(table), shape).has_value());
  table[2] = -1.0;
  table[4] = -1.0;
  auto bad = validate_multiplier(std::span<const double>(table), shape);
  REQUIRE(bad.has_value());
  CHECK(bad->index == 2);
  CHECK(bad->frequency == std::vector<int>{2});

  table = multiplier_table(MultiplierSpec::parse("constant:1"), shape);
  table[1] = 3.0;  // no longer even
  CHECK(validate_multiplier(std::span<const double>(table), shape).has_value());

  std::vector<Complex> complex_table(shape.size(), Complex(1.0, 0.0));
  CHECK_FALSE(validate_multiplier(std::span<const Complex>(complex_table), shape).has_value());
  complex_table[3] = Complex(1.0, 0.1);
  CHECK(validate_multiplier(std::span<const Complex>(complex_table), shape).has_value());
}

TEST_CASE("a non-positive multiplier is rejected by the sampler") {
  SigmaSpec spec;
  spec.regime = SigmaRegime::CorrelatedGaussian;
  spec.multiplier = MultiplierSpec::parse("cosine:2");  // 1 + 2 cos(pi) < 0
  try {
    sample_sigma(spec, TorusShape(1, 4), 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpectrum);
  }
}

TEST_CASE("multiplier and regime text round trip") {
  for (const char* text : {"constant:1.5", "power:1", "cosine:0.25"}) {
    CHECK(MultiplierSpec::parse(text).to_string() == text);
  }
  CHECK_THROWS_AS(MultiplierSpec::parse("gauss:1"), Error);
  for (const char* name : {"iid-gaussian", "correlated-gaussian", "stable", "pareto", "iid-uniform"}) {
    CHECK(regime_name(parse_regime(name)) == name);
  }
  SigmaSpec spec;
  spec.regime = SigmaRegime::Stable;
  spec.alpha = 2.5;
  CHECK_THROWS_AS(validate_sigma(spec), Error);
}
