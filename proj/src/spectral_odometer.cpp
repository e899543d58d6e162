#include "dsand/spectral_odometer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"

namespace dsand {
namespace {

LatticeField centred_charge(const LatticeField& s, double sign) {
  const double mass = s.sum();
  const double n_sites = static_cast<double>(s.size());
  if (std::abs(mass - n_sites) > 1e-9 * n_sites) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "total mass must equal n^d = " << n_sites << "; residual mass is " << mass - n_sites;
    fail(ErrorCode::MassMismatch, msg.str());
  }
  LatticeField charge(s.shape());
  for (std::size_t i = 0; i < s.size(); ++i) charge[i] = sign * (s[i] - 1.0);
  // Absorb rounding so the Poisson solve sees an exactly balanced charge.
  const double residual = charge.mean();
  for (auto& v : charge.values()) v -= residual;
  return charge;
}

}  // namespace

LatticeField eta_field(const LatticeField& s, const Operator& op) {
  return op.solve_poisson(centred_charge(s, +1.0));
}

LatticeField odometer_spectral(const LatticeField& s, const Operator& op) {
  auto u = eta_field(s, op);
  const double lo = u.min();
  for (auto& v : u.values()) v -= lo;
  return u;
}

LatticeField obstacle_gamma(const LatticeField& s, const Operator& op) {
  return op.solve_poisson(centred_charge(s, -1.0));
}

LatticeField torus_obstacle_odometer(const LatticeField& s, const Operator& op) {
  auto gamma = obstacle_gamma(s, op);
  // Constants are the only superharmonic functions on the torus, so the
  // least one above gamma is its maximum.
  const double v = gamma.max();
  for (auto& g : gamma.values()) g = v - g;
  return gamma;
}

CovarianceTable eta_covariance_exact(const Operator& op, const std::vector<double>* khat) {
  const auto& shape = op.shape();
  const auto& lambda = op.eigenvalues().lambda;
  std::vector<double> weight(shape.size(), 0.0);
  const double white = 1.0 / static_cast<double>(shape.size());
  if (khat) require(khat->size() == shape.size(), "multiplier does not match operator shape");
  for (std::size_t i = 1; i < weight.size(); ++i) {
    weight[i] = (khat ? (*khat)[i] : white) / (lambda[i] * lambda[i]);
  }
  std::vector<Complex> buf(weight.begin(), weight.end());
  fft::transform(shape, buf, +1);
  CovarianceTable table{shape, std::vector<double>(shape.size()), 1.0};
  for (std::size_t i = 0; i < buf.size(); ++i) table.c[i] = buf[i].real();
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto j = shape.negate(i);
    if (j > i) table.c[i] = table.c[j] = 0.5 * (table.c[i] + table.c[j]);
  }
  return table;
}

namespace {

std::vector<double> axis_from_marginal(const std::vector<double>& marginal, int n) {
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int w = 0; w < n; ++w) {
      acc += marginal[static_cast<std::size_t>(w)] * std::cos(2.0 * std::numbers::pi * ((static_cast<long>(r) * w) % n) / n);
    }
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> nn_covariance_axis(int d, int n) {
  const TorusShape check(d, n);
  (void)check;
  std::vector<double> sin2(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    const double s = std::sin(std::numbers::pi * w / n);
    sin2[static_cast<std::size_t>(w)] = s * s;
  }
  // marginal(w1) = (1/n^d) sum over w2..wd of lambda^{-2}, with
  // lambda = -(2/d) sum_i sin^2(pi w_i / n).
  const double scale = std::pow(static_cast<double>(n), -d) * (d / 2.0) * (d / 2.0);
  std::vector<double> marginal(static_cast<std::size_t>(n), 0.0);
  const int rest = d - 1;
  std::vector<int> w(static_cast<std::size_t>(std::max(rest, 0)), 0);
  for (int w1 = 0; w1 < n; ++w1) {
    std::fill(w.begin(), w.end(), 0);
    double acc = 0.0;
    for (;;) {
      double t = sin2[static_cast<std::size_t>(w1)];
      for (int v : w) t += sin2[static_cast<std::size_t>(v)];
      if (t > 0.0) acc += 1.0 / (t * t);
      int a = rest - 1;
      while (a >= 0 && w[static_cast<std::size_t>(a)] == n - 1) w[static_cast<std::size_t>(a--)] = 0;
      if (a < 0) break;
      ++w[static_cast<std::size_t>(a)];
    }
    marginal[static_cast<std::size_t>(w1)] = scale * acc;
  }
  return axis_from_marginal(marginal, n);
}

std::vector<double> covariance_axis(const Operator& op, const std::vector<double>* khat) {
  const auto& shape = op.shape();
  const int n = shape.side();
  const auto& lambda = op.eigenvalues().lambda;
  if (khat) require(khat->size() == shape.size(), "multiplier does not match operator shape");
  const double white = 1.0 / static_cast<double>(shape.size());
  std::vector<double> marginal(static_cast<std::size_t>(n), 0.0);
  const std::size_t block = shape.size() / static_cast<std::size_t>(n);
  for (std::size_t i = 1; i < shape.size(); ++i) {
    marginal[i / block] += (khat ? (*khat)[i] : white) / (lambda[i] * lambda[i]);
  }
  return axis_from_marginal(marginal, n);
}

std::string covariance_csv(const CovarianceTable& table) {
  return io::field_csv(LatticeField(table.shape, table.c));
}

}  // namespace dsand
