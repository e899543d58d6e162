#include "dsand/sampling.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"

namespace dsand {
namespace {

constexpr double kPi = std::numbers::pi;

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::Format, "cannot parse " + what + " '" + s + "'");
}

std::optional<MultiplierViolation> violation(const TorusShape& shape, std::size_t i, std::string reason) {
  return MultiplierViolation{i, shape.coord(i), std::move(reason)};
}

}  // namespace

MultiplierSpec MultiplierSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail(ErrorCode::Format, "multiplier '" + text + "' must read kind:parameter");
  const auto kind = text.substr(0, colon);
  const double param = parse_number(text.substr(colon + 1), "multiplier parameter");
  MultiplierSpec m;
  if (kind == "constant") {
    m.kind = Kind::Constant;
    m.value = param;
  } else if (kind == "power") {
    m.kind = Kind::PowerLaw;
    m.exponent = param;
  } else if (kind == "cosine") {
    m.kind = Kind::CosineProfile;
    m.amplitude = param;
  } else {
    fail(ErrorCode::Format, "unknown multiplier kind '" + kind + "' (constant, power, cosine)");
  }
  return m;
}

std::string MultiplierSpec::to_string() const {
  switch (kind) {
    case Kind::Constant: return "constant:" + io::format_double(value);
    case Kind::PowerLaw: return "power:" + io::format_double(exponent);
    case Kind::CosineProfile: return "cosine:" + io::format_double(amplitude);
  }
  return {};
}

std::vector<double> multiplier_table(const MultiplierSpec& spec, const TorusShape& shape) {
  std::vector<double> out(shape.size());
  std::vector<int> w(static_cast<std::size_t>(shape.dim()));
  const double n = shape.side();
  for (std::size_t i = 0; i < out.size(); ++i) {
    shape.coord(i, w);
    switch (spec.kind) {
      case MultiplierSpec::Kind::Constant: out[i] = spec.value; break;
      case MultiplierSpec::Kind::PowerLaw: {
        double r2 = 0.0;
        for (int c : w) r2 += static_cast<double>(shape.centered(c)) * shape.centered(c);
        out[i] = i == 0 ? spec.value : std::pow(r2, -0.5 * spec.exponent);
        break;
      }
      case MultiplierSpec::Kind::CosineProfile: {
        double c = 0.0;
        for (int v : w) c += std::cos(2.0 * kPi * v / n);
        out[i] = spec.value + spec.amplitude * c / shape.dim();
        break;
      }
    }
  }
  // cos(2 pi (n - v)/n) and cos(2 pi v/n) may differ in the last bit.
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto j = shape.negate(i);
    if (j > i) out[j] = out[i];
  }
  return out;
}

std::optional<MultiplierViolation> validate_multiplier(std::span<const Complex> khat, const TorusShape& shape) {
  if (khat.size() != shape.size()) {
    return MultiplierViolation{0, {}, "table has " + std::to_string(khat.size()) + " entries, expected " +
                                          std::to_string(shape.size())};
  }
  for (std::size_t i = 0; i < khat.size(); ++i) {
    const auto v = khat[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return violation(shape, i, "not finite");
    if (v.imag() != 0.0) return violation(shape, i, "imaginary part is nonzero");
    if (!(v.real() > 0.0)) return violation(shape, i, "not strictly positive");
    if (khat[shape.negate(i)] != v) return violation(shape, i, "not even: K(w) != K(-w)");
  }
  return std::nullopt;
}

std::optional<MultiplierViolation> validate_multiplier(std::span<const double> khat, const TorusShape& shape) {
  std::vector<Complex> c(khat.begin(), khat.end());
  return validate_multiplier(c, shape);
}

SigmaRegime parse_regime(const std::string& text) {
  if (text == "iid-gaussian") return SigmaRegime::IidGaussian;
  if (text == "correlated-gaussian") return SigmaRegime::CorrelatedGaussian;
  if (text == "stable") return SigmaRegime::Stable;
  if (text == "pareto") return SigmaRegime::Pareto;
  if (text == "iid-uniform") return SigmaRegime::IidUniform;
  fail(ErrorCode::Format, "unknown sampler '" + text +
                              "' (iid-gaussian, correlated-gaussian, stable, pareto, iid-uniform)");
}

std::string regime_name(SigmaRegime regime) {
  switch (regime) {
    case SigmaRegime::IidGaussian: return "iid-gaussian";
    case SigmaRegime::CorrelatedGaussian: return "correlated-gaussian";
    case SigmaRegime::Stable: return "stable";
    case SigmaRegime::Pareto: return "pareto";
    case SigmaRegime::IidUniform: return "iid-uniform";
  }
  return {};
}

void validate_sigma(const SigmaSpec& spec) {
  if (spec.regime == SigmaRegime::Stable) {
    if (!(spec.alpha > 0.0 && spec.alpha <= 2.0)) fail(ErrorCode::Validation, "stable index must lie in (0, 2]");
    if (!(spec.scale > 0.0)) fail(ErrorCode::Validation, "stable scale must be positive");
  }
  if (spec.regime == SigmaRegime::Pareto && !(spec.pareto_index > 0.0)) {
    fail(ErrorCode::Validation, "Pareto index must be positive");
  }
}

double sample_stable(double alpha, double scale, rng::Stream& stream) {
  const double v = kPi * (stream.uniform() - 0.5);
  const double w = stream.exponential();
  double x;
  if (alpha == 1.0) {
    x = std::tan(v);
  } else {
    x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
        std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
  }
  return scale * x;
}

LatticeField sample_sigma(const SigmaSpec& spec, const TorusShape& shape, std::uint64_t seed) {
  validate_sigma(spec);
  LatticeField out(shape);
  auto values = out.values();
  switch (spec.regime) {
    case SigmaRegime::IidGaussian:
    case SigmaRegime::CorrelatedGaussian:
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = rng::Stream(seed, i).normal();
      break;
    case SigmaRegime::Stable:
      for (std::size_t i = 0; i < values.size(); ++i) {
        rng::Stream stream(seed, i);
        values[i] = sample_stable(spec.alpha, spec.scale, stream);
      }
      break;
    case SigmaRegime::Pareto: {
      const double median = std::pow(2.0, 1.0 / spec.pareto_index);
      for (std::size_t i = 0; i < values.size(); ++i) {
        rng::Stream stream(seed, i);
        const double x = std::pow(stream.uniform(), -1.0 / spec.pareto_index);
        values[i] = spec.symmetrized ? stream.sign() * x : x - median;
      }
      break;
    }
    case SigmaRegime::IidUniform:
      for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::sqrt(3.0) * (2.0 * rng::Stream(seed, i).uniform() - 1.0);
      }
      break;
  }
  if (spec.regime == SigmaRegime::CorrelatedGaussian) {
    const auto khat = multiplier_table(spec.multiplier, shape);
    if (auto bad = validate_multiplier(khat, shape)) {
      std::ostringstream msg;
      msg << "multiplier violates the Bochner condition at w = (";
      for (std::size_t a = 0; a < bad->frequency.size(); ++a) msg << (a ? "," : "") << bad->frequency[a];
      msg << "): " << bad->reason;
      fail(ErrorCode::InvalidSpectrum, msg.str());
    }
    // White noise has E|xi~(w)|^2 = n^d under the unnormalized transform;
    // scaling by sqrt(K/n^d) and inverting gives covariance idft(K).
    std::vector<double> gain(khat.size());
    const double n_sites = static_cast<double>(shape.size());
    for (std::size_t i = 0; i < gain.size(); ++i) gain[i] = std::sqrt(khat[i] / n_sites) * n_sites;
    auto colored = fft::apply_real_multiplier(shape, values, gain);
    std::copy(colored.begin(), colored.end(), values.begin());
  }
  return out;
}

LatticeField make_initial_config(const LatticeField& sigma) {
  const double mean = sigma.mean();
  LatticeField s(sigma.shape());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 + sigma[i] - mean;
  return s;
}

}  // namespace dsand
