#include "dsand/operators.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_expint.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"

namespace dsand {
namespace {

constexpr double kPi = std::numbers::pi;

// Ratio between the Ewald splitting parameter and pi / n^2. Larger values
// shift work from the per-site real-space sum to the shared reciprocal sum.
constexpr double kEwaldSplit = 16.0;

double shell_count(int d, long k) {
  return std::pow(2.0 * k + 1.0, d) - std::pow(2.0 * k - 1.0, d);
}

double gamma_q(double a, double x) {
  gsl_sf_result r;
  if (gsl_sf_gamma_inc_Q_e(a, x, &r) != GSL_SUCCESS) return 0.0;
  return r.val;
}

// Upper incomplete gamma for a <= 0, by upward recurrence
// Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a from an accurate positive order.
// gsl_sf_gamma_inc loses ~1e-9 relative accuracy for small x and a < 0.
double gamma_upper(double a, double x) {
  if (a > 0.0) return gamma_q(a, x) * std::tgamma(a);
  int steps = static_cast<int>(std::floor(-a)) + 1;
  double top = a + steps;
  double g;
  if (top == 1.0 && a == std::floor(a)) {
    --steps;
    top = 0.0;
    g = gsl_sf_expint_E1(x);
  } else {
    g = gamma_q(top, x) * std::tgamma(top);
  }
  for (int k = steps; k > 0; --k) {
    const double b = a + k - 1;
    g = (g - std::pow(x, b) * std::exp(-x)) / b;
  }
  return g;
}

struct GslQuiet {
  gsl_error_handler_t* previous;
  GslQuiet() : previous(gsl_set_error_handler_off()) {}
  ~GslQuiet() { gsl_set_error_handler(previous); }
};

// Orbit representative under sign flips and coordinate permutations.
std::vector<int> orbit_key(const TorusShape& shape, std::span<const int> canonical) {
  std::vector<int> key(canonical.size());
  for (std::size_t a = 0; a < key.size(); ++a) key[a] = std::abs(shape.centered(canonical[a]));
  std::sort(key.begin(), key.end());
  return key;
}

template <class Fn>
std::vector<double> tabulate_by_orbit(const TorusShape& shape, Fn&& value_of) {
  std::map<std::vector<int>, double> cache;
  std::vector<double> out(shape.size());
  std::vector<int> c(static_cast<std::size_t>(shape.dim()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    shape.coord(i, c);
    auto key = orbit_key(shape, c);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, value_of(key)).first;
    out[i] = it->second;
  }
  return out;
}

KernelTable ewald_kernel(const TorusShape& shape, double alpha, double tolerance) {
  const GslQuiet quiet;
  const int d = shape.dim();
  const double n = shape.side();
  const double s = d + alpha;
  const double beta = kEwaldSplit * kPi / (n * n);
  const double gamma_half_s = std::tgamma(0.5 * s);
  const double recip_prefactor = std::pow(kPi, 0.5 * d) / (std::pow(n, d) * gamma_half_s);
  // Lower bound on the normalizer: the 2d nearest representatives of 0.
  const double norm_lb = 2.0 * d;
  const double budget = tolerance * norm_lb * 0.25;

  auto real_shell = [&](long k) {
    const double r = (k - 0.5) * n;
    return shell_count(d, k) * gamma_q(0.5 * s, beta * r * r) * std::pow(r, -s);
  };
  auto recip_shell = [&](long k) {
    const double c = kPi * kPi * k * k / (n * n);
    return shell_count(d, k) * recip_prefactor * std::pow(c, 0.5 * alpha) *
           gamma_upper(-0.5 * alpha, c / beta);
  };
  auto tail = [](auto&& shell, long from) {
    double t = 0.0;
    for (long k = from; k < from + 64; ++k) {
      const double v = shell(k);
      t += v;
      if (v < 1e-300 || v < 1e-18 * t) break;
    }
    return t;
  };

  long j_real = 1;
  while (tail(real_shell, j_real + 1) > budget && j_real < 32) ++j_real;
  long j_recip = 1;
  while (tail(recip_shell, j_recip + 1) > budget && j_recip < 4096) ++j_recip;
  const double entry_bound = tail(real_shell, j_real + 1) + tail(recip_shell, j_recip + 1);

  // Reciprocal-space part for all residues at once: sum_m A(m) e^{2 pi i m.x/n}.
  std::vector<Complex> recip(shape.size(), Complex{0.0, 0.0});
  {
    std::vector<int> m(static_cast<std::size_t>(d), static_cast<int>(-j_recip));
    for (;;) {
      double norm2 = 0.0;
      for (int v : m) norm2 += static_cast<double>(v) * v;
      if (norm2 > 0.0) {
        const double c = kPi * kPi * norm2 / (n * n);
        recip[shape.index(m)] += std::pow(c, 0.5 * alpha) * gamma_upper(-0.5 * alpha, c / beta);
      }
      int a = d - 1;
      while (a >= 0 && m[static_cast<std::size_t>(a)] == j_recip) {
        m[static_cast<std::size_t>(a)] = static_cast<int>(-j_recip);
        --a;
      }
      if (a < 0) break;
      ++m[static_cast<std::size_t>(a)];
    }
    fft::transform(shape, recip, +1);
  }
  const double zero_mode = 2.0 * std::pow(beta, 0.5 * alpha) / alpha;
  const double self_term = std::pow(beta, 0.5 * s) / (0.5 * s * gamma_half_s);

  auto raw = tabulate_by_orbit(shape, [&](const std::vector<int>& key) {
    // Real-space images of the representative x = key.
    double real = 0.0;
    std::vector<long> j(static_cast<std::size_t>(d), -j_real);
    for (;;) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double comp = key[static_cast<std::size_t>(a)] + j[static_cast<std::size_t>(a)] * n;
        r2 += comp * comp;
      }
      if (r2 > 0.0) real += gamma_q(0.5 * s, beta * r2) * std::pow(r2, -0.5 * s);
      int a = d - 1;
      while (a >= 0 && j[static_cast<std::size_t>(a)] == j_real) {
        j[static_cast<std::size_t>(a)] = -j_real;
        --a;
      }
      if (a < 0) break;
      ++j[static_cast<std::size_t>(a)];
    }
    std::vector<int> x(key.begin(), key.end());
    const double reciprocal = recip_prefactor * (zero_mode + recip[shape.index(x)].real());
    bool origin = std::all_of(key.begin(), key.end(), [](int v) { return v == 0; });
    return real + reciprocal - (origin ? self_term : 0.0);
  });

  KernelTable table{shape, alpha, std::move(raw), 0.0, static_cast<int>(std::max(j_real, j_recip))};
  double total = 0.0;
  for (double v : table.p) total += v;
  double pmax = 0.0;
  for (auto& v : table.p) {
    v /= total;
    pmax = std::max(pmax, v);
  }
  table.error_bound = entry_bound * (1.0 + static_cast<double>(shape.size()) * pmax) / total;
  return table;
}

KernelTable direct_kernel(const TorusShape& shape, double alpha, const LongRangeOptions& options) {
  const int d = shape.dim();
  const double s = d + alpha;
  // Omitted mass beyond |z|_inf > R is at most 2d 3^{d-1} R^{-alpha} / alpha and
  // each normalized entry moves by at most twice that over the normalizer (>= 2d).
  const double coeff = 2.0 * d * std::pow(3.0, d - 1) / alpha;
  const double needed = std::ceil(std::pow(2.0 * coeff / (2.0 * d * options.tolerance), 1.0 / alpha));
  if (!(needed <= static_cast<double>(options.radius_cap))) {
    std::ostringstream msg;
    msg << "direct long-range kernel with tolerance " << options.tolerance << " needs radius "
        << needed << ", above the cap " << options.radius_cap;
    fail(ErrorCode::RadiusCap, msg.str());
  }
  const long R = std::max(1L, static_cast<long>(needed));
  const double volume = std::pow(2.0 * R + 1.0, d);
  if (volume > 5e9) fail(ErrorCode::RadiusCap, "direct long-range kernel would sum more than 5e9 terms");

  std::vector<double> raw(shape.size(), 0.0);
  std::vector<int> z(static_cast<std::size_t>(d), static_cast<int>(-R));
  for (;;) {
    double r2 = 0.0;
    for (int v : z) r2 += static_cast<double>(v) * v;
    if (r2 > 0.0) raw[shape.index(z)] += std::pow(r2, -0.5 * s);
    int a = d - 1;
    while (a >= 0 && z[static_cast<std::size_t>(a)] == R) {
      z[static_cast<std::size_t>(a)] = static_cast<int>(-R);
      --a;
    }
    if (a < 0) break;
    ++z[static_cast<std::size_t>(a)];
  }
  double total = 0.0;
  for (double v : raw) total += v;
  for (auto& v : raw) v /= total;
  const double omitted = coeff * std::pow(static_cast<double>(R), -alpha);
  return KernelTable{shape, alpha, std::move(raw), 2.0 * omitted / total, static_cast<int>(R)};
}

void symmetrize_even(const TorusShape& shape, std::vector<double>& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto j = shape.negate(i);
    if (j > i) {
      const double v = 0.5 * (table[i] + table[j]);
      table[i] = v;
      table[j] = v;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

LatticeField nn_laplacian_apply(const LatticeField& f) {
  LatticeField out(f.shape());
  Operator::nearest_neighbour(f.shape()).apply_into(f.values(), out.values());
  return out;
}

EigenvalueTable nn_eigenvalues(const TorusShape& shape) {
  const int d = shape.dim();
  const int n = shape.side();
  std::vector<double> sin2(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    const double s = std::sin(kPi * w / n);
    sin2[static_cast<std::size_t>(w)] = s * s;
  }
  // Same stencil normalization as nn_laplacian_apply: lambda = -(2/d) sum sin^2.
  auto lambda = tabulate_by_orbit(shape, [&](const std::vector<int>& key) {
    double acc = 0.0;
    for (int c : key) acc += sin2[static_cast<std::size_t>(c)];
    return -(2.0 / d) * acc;
  });
  return EigenvalueTable{shape, std::move(lambda)};
}

KernelTable lr_kernel(const TorusShape& shape, double alpha, const LongRangeOptions& options) {
  require(alpha > 0.0 && std::isfinite(alpha), "long-range kernel needs alpha > 0");
  require(options.tolerance > 0.0, "kernel tolerance must be positive");
  return options.method == KernelMethod::Ewald ? ewald_kernel(shape, alpha, options.tolerance)
                                               : direct_kernel(shape, alpha, options);
}

EigenvalueTable lr_eigenvalues(const KernelTable& kernel) {
  std::vector<Complex> buf(kernel.p.begin(), kernel.p.end());
  buf[0] -= 1.0;
  fft::transform(kernel.shape, buf, -1);
  std::vector<double> lambda(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) lambda[i] = buf[i].real();
  symmetrize_even(kernel.shape, lambda);
  lambda[0] = 0.0;
  for (std::size_t i = 1; i < lambda.size(); ++i) {
    if (!(lambda[i] < 0.0)) {
      fail(ErrorCode::Internal, "long-range spectrum is not strictly negative off the zero mode");
    }
  }
  return EigenvalueTable{kernel.shape, std::move(lambda)};
}

LatticeField lr_apply(const LatticeField& f, const KernelTable& kernel) {
  require(f.shape() == kernel.shape, "kernel does not match field shape");
  return Operator::long_range(kernel).apply(f);
}

LatticeField multiplier_apply(const LatticeField& f, std::span<const double> m) {
  require(m.size() == f.size(), "multiplier table does not match field shape");
  std::vector<double> table(m.begin(), m.end());
  table[0] = 0.0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    require(std::isfinite(table[i]), "multiplier must be finite on nonzero frequencies");
  }
  return LatticeField(f.shape(), fft::apply_real_multiplier(f.shape(), f.values(), table));
}

// ---------------------------------------------------------------------------

struct Operator::Data {
  OperatorKind kind;
  double alpha = 0.0;
  EigenvalueTable eigen;
  std::vector<double> green;
  std::unique_ptr<KernelTable> kernel;
};

namespace {

std::vector<double> green_from(const EigenvalueTable& t) {
  std::vector<double> g(t.lambda.size(), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) g[i] = -1.0 / t.lambda[i];
  return g;
}

void check_spectrum(const EigenvalueTable& t) {
  require(t.lambda.size() == t.shape.size(), "eigenvalue table does not match shape");
  require(t.lambda[0] == 0.0, "eigenvalue table must vanish at w = 0");
  for (std::size_t i = 1; i < t.lambda.size(); ++i) {
    require(std::isfinite(t.lambda[i]) && t.lambda[i] < 0.0,
            "eigenvalues must be finite and negative off the zero mode");
    require(t.lambda[i] == t.lambda[t.shape.negate(i)], "eigenvalue table must be even");
  }
}

}  // namespace

Operator Operator::nearest_neighbour(const TorusShape& shape) {
  auto data = std::make_shared<Data>(Data{OperatorKind::NearestNeighbour, 0.0, nn_eigenvalues(shape), {}, nullptr});
  data->green = green_from(data->eigen);
  return Operator(std::move(data));
}

Operator Operator::long_range(const TorusShape& shape, double alpha, const LongRangeOptions& options) {
  return long_range(lr_kernel(shape, alpha, options));
}

Operator Operator::long_range(KernelTable kernel) {
  auto eigen = lr_eigenvalues(kernel);
  const double alpha = kernel.alpha;
  auto data = std::make_shared<Data>(Data{OperatorKind::LongRange, alpha, std::move(eigen), {},
                                          std::make_unique<KernelTable>(std::move(kernel))});
  data->green = green_from(data->eigen);
  return Operator(std::move(data));
}

Operator Operator::from_eigenvalues(EigenvalueTable table) {
  check_spectrum(table);
  auto data = std::make_shared<Data>(Data{OperatorKind::Multiplier, 0.0, std::move(table), {}, nullptr});
  data->green = green_from(data->eigen);
  return Operator(std::move(data));
}

OperatorKind Operator::kind() const noexcept { return data_->kind; }
const TorusShape& Operator::shape() const noexcept { return data_->eigen.shape; }
double Operator::alpha() const noexcept { return data_->alpha; }
const EigenvalueTable& Operator::eigenvalues() const noexcept { return data_->eigen; }
const KernelTable* Operator::kernel() const noexcept { return data_->kernel.get(); }
std::span<const double> Operator::green_multiplier() const noexcept { return data_->green; }

std::string Operator::describe() const {
  std::ostringstream out;
  switch (kind()) {
    case OperatorKind::NearestNeighbour: out << "nearest-neighbour"; break;
    case OperatorKind::LongRange: out << "long-range(alpha=" << alpha() << ")"; break;
    case OperatorKind::Multiplier: out << "multiplier"; break;
  }
  out << " on Z^" << shape().dim() << "_" << shape().side();
  return out.str();
}

void Operator::apply_into(std::span<const double> in, std::span<double> out) const {
  const auto& shape = this->shape();
  require(in.size() == shape.size() && out.size() == shape.size(), "field does not match operator shape");
  if (kind() != OperatorKind::NearestNeighbour) {
    auto r = fft::apply_real_multiplier(shape, in, data_->eigen.lambda);
    std::copy(r.begin(), r.end(), out.begin());
    return;
  }
  const int d = shape.dim();
  const auto n = static_cast<std::size_t>(shape.side());
  std::vector<std::size_t> stride(static_cast<std::size_t>(d));
  {
    std::size_t st = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride[static_cast<std::size_t>(a)] = st;
      st *= n;
    }
  }
  std::vector<std::size_t> c(static_cast<std::size_t>(d), 0);
  double pair[8];
  const double inv2d = 1.0 / (2.0 * d);
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (int a = 0; a < d; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const auto up = c[ua] + 1 == n ? i - (n - 1) * stride[ua] : i + stride[ua];
      const auto dn = c[ua] == 0 ? i + (n - 1) * stride[ua] : i - stride[ua];
      pair[a] = in[up] + in[dn];
    }
    // Sorted accumulation keeps the stencil exactly invariant under
    // coordinate permutations and reflections.
    std::sort(pair, pair + d);
    double acc = 0.0;
    for (int a = 0; a < d; ++a) acc += pair[a];
    out[i] = acc * inv2d - in[i];
    for (int a = d - 1; a >= 0; --a) {
      if (++c[static_cast<std::size_t>(a)] < n) break;
      c[static_cast<std::size_t>(a)] = 0;
    }
  }
}

LatticeField Operator::apply(const LatticeField& f) const {
  LatticeField out(f.shape());
  apply_into(f.values(), out.values());
  return out;
}

LatticeField Operator::solve_poisson(const LatticeField& charge) const {
  require(charge.shape() == shape(), "charge does not match operator shape");
  const double mass = charge.sum();
  if (std::abs(mass) > 1e-9 * static_cast<double>(charge.size())) {
    std::ostringstream msg;
    msg << "Poisson charge must have zero total mass; residual mass is " << mass;
    fail(ErrorCode::MassMismatch, msg.str());
  }
  return LatticeField(shape(), fft::apply_real_multiplier(shape(), charge.values(), data_->green));
}

LatticeField solve_poisson(const LatticeField& charge, const Operator& op) { return op.solve_poisson(charge); }

}  // namespace dsand
