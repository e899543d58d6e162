#include "dsand/field_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/parallel.hpp"
#include "dsand/rng.hpp"
#include "dsand/spectral_odometer.hpp"

namespace dsand {
namespace {

constexpr double kPi = std::numbers::pi;

double pair_with(std::span<const double> u, std::span<const double> cells) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * cells[i];
  return acc;
}

std::uint64_t sample_seed(std::uint64_t seed, int n, long sample) {
  return rng::derive(rng::derive(seed, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(sample));
}

// Modes of f expanded over +-k with their exact coefficients.
std::vector<std::pair<std::vector<int>, Complex>> support(const TestFunction& f) {
  std::vector<std::pair<std::vector<int>, Complex>> out;
  for (const auto& m : f.modes()) {
    auto minus = m.k;
    for (auto& c : minus) c = -c;
    out.emplace_back(m.k, f.coefficient(m.k));
    out.emplace_back(minus, f.coefficient(minus));
  }
  return out;
}

double norm2(std::span<const int> z) {
  double r = 0.0;
  for (int v : z) r += static_cast<double>(v) * v;
  return r;
}

}  // namespace

EstimateWithCI estimate_mean(const std::vector<double>& xs) {
  EstimateWithCI e;
  e.count = static_cast<long>(xs.size());
  if (xs.empty()) return e;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  e.estimate = mean;
  if (xs.size() > 1) e.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return e;
}

EstimateWithCI estimate_variance(const std::vector<double>& xs) {
  EstimateWithCI e;
  e.count = static_cast<long>(xs.size());
  if (xs.size() < 2) return e;
  const double m = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= m;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
  double total = 0.0;
  for (double v : sq) total += v;
  e.estimate = total / (m - 1.0);
  const auto spread = estimate_mean(sq);
  e.stderr_ = spread.stderr_ * m / (m - 1.0);
  return e;
}

double pair_field(const LatticeField& u, const TestFunction& f) {
  const auto cells = cell_integrals(f, u.shape());
  return pair_with(u.values(), cells);
}

ScalingKind parse_scaling_kind(const std::string& text) {
  if (text == "nn-ind") return ScalingKind::NnInd;
  if (text == "nn-cor") return ScalingKind::NnCor;
  if (text == "lr-ind") return ScalingKind::LrInd;
  if (text == "stable") return ScalingKind::Stable;
  fail(ErrorCode::Format, "unknown scaling mode '" + text + "' (nn-ind, nn-cor, lr-ind, stable)");
}

std::string scaling_kind_name(ScalingKind kind) {
  switch (kind) {
    case ScalingKind::NnInd: return "nn-ind";
    case ScalingKind::NnCor: return "nn-cor";
    case ScalingKind::LrInd: return "lr-ind";
    case ScalingKind::Stable: return "stable";
  }
  return {};
}

double scaling_constant(const ScalingMode& mode, const TorusShape& shape) {
  const double n = shape.side();
  const double d = shape.dim();
  switch (mode.kind) {
    case ScalingKind::NnInd: return 4.0 * kPi * kPi * std::pow(n, (d - 4.0) / 2.0);
    case ScalingKind::NnCor: return 4.0 * kPi * kPi * std::pow(n, -2.0);
    case ScalingKind::LrInd:
      require(mode.alpha > 0.0, "long-range scaling needs alpha > 0");
      if (mode.alpha < 2.0) return std::pow(n, (d - 2.0 * mode.alpha) / 2.0);
      if (mode.alpha == 2.0) return std::pow(n, (d - 4.0) / 2.0) * std::log(n);
      return std::pow(n, (d - 4.0) / 2.0);
    case ScalingKind::Stable:
      require(mode.alpha > 0.0 && mode.alpha <= 2.0, "stable scaling needs alpha in (0, 2]");
      return 4.0 * kPi * kPi * std::pow(n, d - d / mode.alpha - 2.0);
  }
  return 0.0;
}

double multiplier_value(const MultiplierSpec& spec, std::span<const int> z) {
  switch (spec.kind) {
    case MultiplierSpec::Kind::Constant: return spec.value;
    case MultiplierSpec::Kind::PowerLaw: {
      const double r2 = norm2(z);
      return r2 == 0.0 ? spec.value : std::pow(r2, -0.5 * spec.exponent);
    }
    case MultiplierSpec::Kind::CosineProfile:
      fail(ErrorCode::InvalidArgument, "the cosine profile depends on n and has no continuum limit");
  }
  return 0.0;
}

double limit_variance(const TestFunction& f, const MultiplierSpec& khat, double exponent) {
  double total = 0.0;
  for (const auto& [z, c] : support(f)) {
    total += multiplier_value(khat, z) * std::pow(norm2(z), -exponent) * std::norm(c);
  }
  return total;
}

double limit_exponent(const ScalingMode& mode) {
  switch (mode.kind) {
    case ScalingKind::NnInd:
    case ScalingKind::NnCor: return 2.0;
    case ScalingKind::LrInd: return std::min(2.0, mode.alpha);
    case ScalingKind::Stable: break;
  }
  fail(ErrorCode::Validation, "the stable mode has no variance target");
}

Operator operator_for(const ScalingMode& mode, const TorusShape& shape, const LongRangeOptions& lr) {
  if (mode.kind == ScalingKind::LrInd) return Operator::long_range(shape, mode.alpha, lr);
  return Operator::nearest_neighbour(shape);
}

MultiplierSpec multiplier_for(const ScalingMode& mode, const ExperimentOptions& options) {
  if (mode.kind != ScalingKind::NnCor) return MultiplierSpec{};
  if (options.multiplier) return *options.multiplier;
  MultiplierSpec m;
  m.kind = MultiplierSpec::Kind::PowerLaw;
  m.exponent = 4.0 * mode.delta;
  return m;
}

SigmaSpec sigma_for(const ScalingMode& mode, const ExperimentOptions& options) {
  SigmaSpec spec;
  switch (mode.kind) {
    case ScalingKind::NnInd:
    case ScalingKind::LrInd: spec.regime = SigmaRegime::IidGaussian; break;
    case ScalingKind::NnCor:
      spec.regime = SigmaRegime::CorrelatedGaussian;
      spec.multiplier = multiplier_for(mode, options);
      break;
    case ScalingKind::Stable:
      spec.regime = SigmaRegime::Stable;
      spec.alpha = mode.alpha;
      break;
  }
  return spec;
}

double exact_pairing_variance(const ScalingMode& mode, const TestFunction& f, const TorusShape& shape,
                              const ExperimentOptions& options) {
  const auto op = operator_for(mode, shape, options.long_range);
  const auto cells = cell_integrals(f, shape);
  const auto chat = dft(LatticeField(shape, cells));
  std::vector<double> weight(shape.size(), 1.0 / static_cast<double>(shape.size()));
  if (mode.kind == ScalingKind::NnCor) weight = multiplier_table(multiplier_for(mode, options), shape);
  const auto& lambda = op.eigenvalues().lambda;
  const double n_sites = static_cast<double>(shape.size());
  double total = 0.0;
  for (std::size_t i = 1; i < shape.size(); ++i) {
    total += std::norm(chat[i]) * weight[i] / (lambda[i] * lambda[i]);
  }
  return n_sites * n_sites * total;
}

VarianceExperiment run_variance_experiment(const ScalingMode& mode, const TestFunction& f,
                                           const std::vector<int>& sizes, int dim, int samples,
                                           std::uint64_t seed, const ExperimentOptions& options) {
  if (mode.kind == ScalingKind::Stable) {
    fail(ErrorCode::Validation,
         "the stable sampler has infinite variance; use the charfun experiment for stable limits");
  }
  require(samples >= 2, "variance experiment needs at least two samples");
  require(f.dim() == dim, "test function dimension differs from the experiment dimension");
  VarianceExperiment out;
  out.limit = limit_variance(f, multiplier_for(mode, options), limit_exponent(mode));
  {
    const TorusShape ref(dim, 8);
    const double a = scaling_constant(mode, ref);
    out.calibration = a * a * exact_pairing_variance(mode, f, ref, options) / out.limit;
  }
  const auto sigma_spec = sigma_for(mode, options);
  double lo = 0.0, hi = 0.0;
  for (int n : sizes) {
    const TorusShape shape(dim, n);
    const auto op = operator_for(mode, shape, options.long_range);
    const auto cells = cell_integrals(f, shape);
    const double a = scaling_constant(mode, shape);
    std::vector<double> xs(static_cast<std::size_t>(samples));
    parallel_for(xs.size(), [&](std::size_t k) {
      const auto sigma = sample_sigma(sigma_spec, shape, sample_seed(seed, n, static_cast<long>(k)));
      const auto eta = eta_field(make_initial_config(sigma), op);
      xs[k] = a * pair_with(eta.values(), cells);
    });
    VarianceRow row;
    row.n = n;
    row.a_n = a;
    row.variance = estimate_variance(xs);
    row.ratio = row.variance.estimate / out.limit;
    row.ratio_stderr = row.variance.stderr_ / out.limit;
    row.exact_ratio = a * a * exact_pairing_variance(mode, f, shape, options) / out.limit;
    lo = out.rows.empty() ? row.ratio : std::min(lo, row.ratio);
    hi = out.rows.empty() ? row.ratio : std::max(hi, row.ratio);
    out.rows.push_back(row);
  }
  out.spread = lo > 0.0 ? hi / lo - 1.0 : INFINITY;
  return out;
}

double charfun_grid_integral(const TestFunction& f, double alpha, int m) {
  require(m >= 1, "quadrature grid needs m >= 1");
  const int d = f.dim();
  const auto modes = support(f);
  std::vector<double> amp;
  for (const auto& [z, c] : modes) amp.push_back(1.0 / norm2(z));
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  double total = 0.0;
  long count = 0;
  for (;;) {
    double g = 0.0;
    for (std::size_t j = 0; j < modes.size(); ++j) {
      double phase = 0.0;
      for (int a = 0; a < d; ++a) {
        phase += modes[j].first[static_cast<std::size_t>(a)] * (idx[static_cast<std::size_t>(a)] + 0.5) / m;
      }
      // e^{-2 pi i z.x} c(z) summed over +-z is real.
      const Complex e = std::polar(1.0, -2.0 * kPi * phase);
      g += amp[j] * (e * modes[j].second).real();
    }
    total += std::pow(std::abs(g), alpha);
    ++count;
    int a = d - 1;
    while (a >= 0 && idx[static_cast<std::size_t>(a)] == m - 1) idx[static_cast<std::size_t>(a--)] = 0;
    if (a < 0) break;
    ++idx[static_cast<std::size_t>(a)];
  }
  return total / static_cast<double>(count);
}

double charfun_target_constant(const TestFunction& f, double alpha, int m) {
  return std::pow(2.0 * f.dim(), alpha) * charfun_grid_integral(f, alpha, m);
}

CharfunExperiment run_charfun_experiment(double alpha, const TestFunction& f, const TorusShape& shape, int samples,
                                         const std::vector<double>& ts, std::uint64_t seed, int grid) {
  require(alpha > 0.0 && alpha < 2.0, "the stable limit needs alpha in (0, 2)");
  require(samples >= 2, "charfun experiment needs at least two samples");
  require(f.dim() == shape.dim(), "test function dimension differs from the torus");
  const ScalingMode mode{ScalingKind::Stable, 0.0, alpha};
  const auto op = Operator::nearest_neighbour(shape);
  const auto cells = cell_integrals(f, shape);
  const double a = scaling_constant(mode, shape);
  SigmaSpec spec;
  spec.regime = SigmaRegime::Stable;
  spec.alpha = alpha;

  std::vector<double> xs(static_cast<std::size_t>(samples));
  parallel_for(xs.size(), [&](std::size_t k) {
    const auto sigma = sample_sigma(spec, shape, sample_seed(seed, shape.side(), static_cast<long>(k)));
    const auto eta = eta_field(make_initial_config(sigma), op);
    xs[k] = a * pair_with(eta.values(), cells);
  });

  // <a_n Xi_n, f> = sum_x sigma(x) a_n k(x) with k = G c, so the exact
  // finite-n exponent is sum_x |a_n k(x)|^alpha.
  double finite = 0.0;
  {
    LatticeField c(shape, cells);
    const double shift = c.mean();
    for (auto& v : c.values()) v -= shift;
    const auto k = op.solve_poisson(c);
    for (double v : k.values()) finite += std::pow(std::abs(a * v), alpha);
  }

  CharfunExperiment out;
  out.grid_integral = charfun_grid_integral(f, alpha, grid);
  out.target = std::pow(2.0 * shape.dim(), alpha) * out.grid_integral;
  double num = 0.0, den = 0.0;
  for (double t : ts) {
    std::vector<double> re(xs.size()), im(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      re[k] = std::cos(t * xs[k]);
      im[k] = std::sin(t * xs[k]);
    }
    const auto r = estimate_mean(re);
    const auto i = estimate_mean(im);
    CharfunRow row;
    row.t = t;
    row.empirical = Complex(r.estimate, i.estimate);
    const double modulus = std::abs(row.empirical);
    row.exponent = t == 0.0 ? 0.0 : -std::log(modulus);
    row.exponent_stderr = modulus > 0.0 ? std::hypot(r.stderr_, i.stderr_) / modulus : INFINITY;
    row.target = std::pow(std::abs(t), alpha) * out.target;
    row.finite_n = std::pow(std::abs(t), alpha) * finite;
    const double ta = std::pow(std::abs(t), alpha);
    num += row.exponent * ta;
    den += ta * ta;
    out.rows.push_back(row);
  }
  out.fitted = den > 0.0 ? num / den : 0.0;
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs at least two points");
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

LineFit eigenvalue_slope(const Operator& op, int wmax) {
  const auto& shape = op.shape();
  require(wmax >= 2 && wmax < shape.side(), "eigenvalue slope needs 2 <= wmax < n");
  std::vector<double> w, lam;
  std::vector<int> c(static_cast<std::size_t>(shape.dim()), 0);
  for (int k = 1; k <= wmax; ++k) {
    c[0] = k;
    w.push_back(k);
    lam.push_back(-op.eigenvalues().lambda[shape.index(c)]);
  }
  return fit_loglog(w, lam);
}

double mean_odometer_exponent(const ScalingMode& mode, int d) {
  const double g = mode.kind == ScalingKind::LrInd ? std::min(2.0, mode.alpha) : 2.0;
  return std::max(0.0, g - d / 2.0);
}

double phi_order(int d, double n) {
  if (d < 4) return std::pow(n, 2.0 - d / 2.0);
  if (d == 4) return std::log(n);
  return std::sqrt(std::log(n));
}

double big_phi_order(int d, double alpha, double n) {
  const double gamma = std::min(2.0, alpha);
  if (gamma > d / 2.0) return std::pow(n, gamma - d / 2.0);
  if (gamma == d / 2.0) return std::log(n);
  // remaining case gamma < d/2
  return std::sqrt(std::log(n));
}

double psi_order(int d, double n, double r) {
  switch (d) {
    case 1: return n * r * r;
    case 2: return r * r * std::log(n / r);
    case 3: return r;
    case 4: return std::log(1.0 + r);
    default: return 1.0;
  }
}

double big_psi_order(int d, double alpha, double n, double r) {
  const double half = d / 2.0;
  if (alpha > half + 1.0) return std::pow(n, 2.0 * alpha - d - 2.0) * r * r;
  if (alpha == half + 1.0) return std::log(n / r) * r * r;
  if (alpha > half) return std::pow(r, 2.0 * alpha - d);
  if (alpha == half) return std::log(r);
  return 1.0;
}

MeanOdometerCurve mean_odometer_curve(const ScalingMode& mode, int dim, const std::vector<int>& sizes, int samples,
                                      std::uint64_t seed, const LongRangeOptions& lr) {
  require(mode.kind == ScalingKind::NnInd || mode.kind == ScalingKind::LrInd,
          "mean-odometer curves use i.i.d. Gaussian sigma (nn-ind or lr-ind)");
  require(samples >= 2 && sizes.size() >= 2, "mean-odometer curve needs two sizes and two samples");
  MeanOdometerCurve out;
  std::vector<double> ns, means, orders;
  SigmaSpec spec;
  for (int n : sizes) {
    const TorusShape shape(dim, n);
    const auto op = operator_for(mode, shape, lr);
    std::vector<double> xs(static_cast<std::size_t>(samples));
    parallel_for(xs.size(), [&](std::size_t k) {
      const auto sigma = sample_sigma(spec, shape, sample_seed(seed, n, static_cast<long>(k)));
      const auto eta = eta_field(make_initial_config(sigma), op);
      xs[k] = -eta.min();
    });
    MeanOdometerRow row{n, estimate_mean(xs)};
    out.rows.push_back(row);
    ns.push_back(n);
    means.push_back(row.mean_u.estimate);
    orders.push_back(mode.kind == ScalingKind::NnInd ? phi_order(dim, n) : big_phi_order(dim, mode.alpha, n));
  }
  out.fit = fit_loglog(ns, means);
  out.target_slope = fit_loglog(ns, orders).slope;
  return out;
}

namespace {

std::vector<double> axis_covariance(const ScalingMode& mode, int dim, int n, const ExperimentOptions& options) {
  if (mode.kind == ScalingKind::NnInd) return nn_covariance_axis(dim, n);
  const TorusShape shape(dim, n);
  const auto op = operator_for(mode, shape, options.long_range);
  if (mode.kind == ScalingKind::NnCor) {
    const auto khat = multiplier_table(multiplier_for(mode, options), shape);
    return covariance_axis(op, &khat);
  }
  require(mode.kind == ScalingKind::LrInd, "covariance structure needs a Gaussian mode");
  return covariance_axis(op);
}

}  // namespace

VarianceStructure variance_structure_curve(const ScalingMode& mode, int dim, int n, const std::vector<int>& rs,
                                           const ExperimentOptions& options) {
  require(rs.size() >= 2, "variance structure needs at least two radii");
  for (int r : rs) require(r >= 1 && r < n, "radii must lie in [1, n)");
  const auto c = axis_covariance(mode, dim, n, options);
  VarianceStructure out;
  out.r = rs;
  std::vector<double> x, target;
  for (int r : rs) {
    out.value.push_back(2.0 * (c[0] - c[static_cast<std::size_t>(r)]));
    x.push_back(r);
    target.push_back(mode.kind == ScalingKind::LrInd ? big_psi_order(dim, mode.alpha, n, r) : psi_order(dim, n, r));
  }
  out.fit = fit_loglog(x, out.value);
  out.target_slope = fit_loglog(x, target).slope;
  return out;
}

DecaySlope covariance_decay_slope(const ScalingMode& mode, int dim, int n, const std::vector<int>& rs,
                                  const ExperimentOptions& options) {
  require(rs.size() >= 2, "decay slope needs at least two radii");
  for (int r : rs) require(r >= 1 && r < n, "radii must lie in [1, n)");
  DecaySlope out;
  double critical = 4.0;
  switch (mode.kind) {
    case ScalingKind::NnInd: out.target_slope = 4.0 - dim; break;
    case ScalingKind::NnCor:
      critical = 4.0 * (1.0 + mode.delta);
      out.target_slope = critical - dim;
      break;
    case ScalingKind::LrInd:
      critical = 2.0 * std::min(2.0, mode.alpha);
      out.target_slope = 2.0 * mode.alpha - dim;
      break;
    case ScalingKind::Stable: fail(ErrorCode::Validation, "covariance decay needs a Gaussian mode");
  }
  if (!(dim > critical)) {
    out.power_law = false;
    std::ostringstream note;
    note << "d = " << dim << " is not above the critical dimension " << critical
         << "; the kernel is a lattice sum and no power law is asserted";
    out.note = note.str();
    return out;
  }
  const auto c = axis_covariance(mode, dim, n, options);
  out.r = rs;
  std::vector<double> x;
  for (int r : rs) {
    out.covariance.push_back(c[static_cast<std::size_t>(r)]);
    x.push_back(r);
  }
  for (double v : out.covariance) {
    if (!(v > 0.0)) {
      out.fit.slope = NAN;
      out.note = "covariance is not positive on the requested radii";
      return out;
    }
  }
  out.fit = fit_loglog(x, out.covariance);
  return out;
}

HurstClass hurst_classify(double alpha, int d) {
  HurstClass h;
  h.hurst = alpha - d / 2.0;
  std::ostringstream text;
  text << "H = " << h.hurst << ": ";
  if (h.hurst < 0.0) {
    h.kind = HurstClass::Kind::Distribution;
    text << "random distribution (H < 0)";
  } else if (h.hurst == 0.0) {
    h.kind = HurstClass::Kind::Boundary;
    text << "boundary case H = 0";
  } else {
    h.kind = HurstClass::Kind::Function;
    const int k = static_cast<int>(std::ceil(h.hurst)) - 1;
    h.differentiability = k - 1;
    h.flagged = true;
    text << "function; H in (" << k << ", " << k + 1 << "] gives a (" << h.differentiability
         << ")-differentiable function (flagged: k-differentiable is the likely intent)";
  }
  h.text = text.str();
  return h;
}

}  // namespace dsand
