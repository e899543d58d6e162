#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsand/lattice.hpp"
#include "dsand/rng.hpp"

namespace dsand {

/// Spectral weight K^(w) of a stationary Gaussian field. Covariances are
/// idft(K^), so K^ == 1 is white noise of variance n^d per site.
struct MultiplierSpec {
  enum class Kind {
    Constant,       // K^(w) = value
    PowerLaw,       // K^(w) = |w|^{-exponent} with w centred, K^(0) = value
    CosineProfile,  // K^(w) = value + amplitude * (1/d) sum_i cos(2 pi w_i / n)
  };
  Kind kind = Kind::Constant;
  double value = 1.0;
  double exponent = 0.0;
  double amplitude = 0.0;

  /// "constant:1", "power:1" (K^(0) = 1), "cosine:0.5" (value 1).
  static MultiplierSpec parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const MultiplierSpec&) const = default;
};

std::vector<double> multiplier_table(const MultiplierSpec& spec, const TorusShape& shape);

struct MultiplierViolation {
  std::size_t index = 0;
  std::vector<int> frequency;
  std::string reason;
};

/// Bochner check: real, even, strictly positive. Reports the first violating
/// frequency in site order; never throws.
std::optional<MultiplierViolation> validate_multiplier(std::span<const Complex> khat, const TorusShape& shape);
std::optional<MultiplierViolation> validate_multiplier(std::span<const double> khat, const TorusShape& shape);

enum class SigmaRegime { IidGaussian, CorrelatedGaussian, Stable, Pareto, IidUniform };

struct SigmaSpec {
  SigmaRegime regime = SigmaRegime::IidGaussian;
  MultiplierSpec multiplier;
  /// Stable index in (0, 2] and scale c: characteristic function exp(-c^a |t|^a).
  double alpha = 1.0;
  double scale = 1.0;
  /// Pareto tail index a: P(|X| > x) = x^{-a} for x >= 1.
  double pareto_index = 1.5;
  /// Pareto draws get a random sign; otherwise they are shifted to median 0.
  bool symmetrized = true;

  bool operator==(const SigmaSpec&) const = default;
};

SigmaRegime parse_regime(const std::string& text);
std::string regime_name(SigmaRegime regime);
void validate_sigma(const SigmaSpec& spec);

/// Chambers-Mallows-Stuck draw of a symmetric alpha-stable variable.
double sample_stable(double alpha, double scale, rng::Stream& stream);

/// Deterministic in (spec, shape, seed); site x uses stream (seed, x).
LatticeField sample_sigma(const SigmaSpec& spec, const TorusShape& shape, std::uint64_t seed);

/// s = 1 + sigma - mean(sigma).
LatticeField make_initial_config(const LatticeField& sigma);

}  // namespace dsand
