#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsand/lattice.hpp"
#include "dsand/operators.hpp"

namespace dsand {

/// Mean-zero eta with (-Delta*) eta = s - 1. Throws MassMismatch unless
/// sum s = n^d within 1e-9 n^d.
LatticeField eta_field(const LatticeField& s, const Operator& op);

/// eta - min eta: the stabilizing odometer, with minimum exactly 0.
LatticeField odometer_spectral(const LatticeField& s, const Operator& op);

/// gamma = -eta, the mean-zero obstacle with Delta* gamma = s - 1.
LatticeField obstacle_gamma(const LatticeField& s, const Operator& op);

/// v - gamma with v = max gamma, the least superharmonic majorant on the torus.
LatticeField torus_obstacle_odometer(const LatticeField& s, const Operator& op);

/// Stationary covariance C(x) = E[eta(x) eta(0)].
struct CovarianceTable {
  TorusShape shape;
  std::vector<double> c;
  /// Multiplicative constant applied to the spectral sum (1 with the
  /// normalizations used here; kept for reporting).
  double calibration = 1.0;
};

/// C(x) = sum_{w != 0} S(w) lambda(w)^{-2} e^{2 pi i x.w/n}, where S is the
/// spectral variance E|sigma^(w)|^2: 1/n^d for unit i.i.d. noise (no khat),
/// khat(w) for a correlated field with covariance idft(khat).
CovarianceTable eta_covariance_exact(const Operator& op, const std::vector<double>* khat = nullptr);

/// C(r e_1) for r = 0..n-1 under i.i.d. noise, from the marginal spectrum on
/// the first axis. Needs no n^d tables for the nearest-neighbour operator.
std::vector<double> nn_covariance_axis(int d, int n);
std::vector<double> covariance_axis(const Operator& op, const std::vector<double>* khat = nullptr);

/// CSV lines "x1,..,xd,value" over all offsets.
std::string covariance_csv(const CovarianceTable& table);

}  // namespace dsand
