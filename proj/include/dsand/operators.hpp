#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dsand/lattice.hpp"

namespace dsand {

enum class OperatorKind { NearestNeighbour, LongRange, Multiplier };

/// lambda(w) of a redistribution Laplacian, per frequency in site order.
/// lambda(0) = 0, lambda even, lambda(w) < 0 for w != 0.
struct EigenvalueTable {
  TorusShape shape;
  std::vector<double> lambda;
};

/// Transition probabilities p(x) of the long-range walk on Z^d_n.
struct KernelTable {
  TorusShape shape;
  double alpha = 0.0;
  std::vector<double> p;
  /// Bound on the absolute truncation error of every normalized entry.
  double error_bound = 0.0;
  /// Images / shells kept (Ewald) or cube radius (direct).
  int truncation = 0;
};

enum class KernelMethod {
  /// Ewald splitting of the periodized power sum: exponentially convergent.
  Ewald,
  /// Plain sum over representatives with |z|_inf <= R.
  Direct,
};

struct LongRangeOptions {
  double tolerance = 1e-10;
  KernelMethod method = KernelMethod::Ewald;
  /// Largest cube radius the direct method may use.
  long radius_cap = 20000;
};

/// Delta_g f(x) = (1/2d) sum_{|y-x|=1} (f(y) - f(x)).
LatticeField nn_laplacian_apply(const LatticeField& f);

/// lambda(w) = -(2/d) sum_i sin^2(pi w_i / n), the spectrum of Delta_g.
EigenvalueTable nn_eigenvalues(const TorusShape& shape);

/// p(x) proportional to sum_{z = x mod n, z != 0} |z|_2^{-(d+alpha)},
/// normalized to total mass one. Throws RadiusCap when the direct method
/// would need a radius beyond options.radius_cap.
KernelTable lr_kernel(const TorusShape& shape, double alpha, const LongRangeOptions& options = {});

/// (p * f) - f, evaluated spectrally.
LatticeField lr_apply(const LatticeField& f, const KernelTable& kernel);

/// Spectrum of lr_apply: the unnormalized transform of p - delta_0.
EigenvalueTable lr_eigenvalues(const KernelTable& kernel);

/// sum_{w != 0} m(w) f^(w) psi_w; the mean of f is dropped.
LatticeField multiplier_apply(const LatticeField& f, std::span<const double> m);

/// Immutable redistribution operator Delta^* together with its spectrum.
/// Copies share the underlying tables.
class Operator {
 public:
  static Operator nearest_neighbour(const TorusShape& shape);
  static Operator long_range(const TorusShape& shape, double alpha, const LongRangeOptions& options = {});
  static Operator long_range(KernelTable kernel);
  /// Generic Fourier multiplier operator with the given (negative) spectrum.
  static Operator from_eigenvalues(EigenvalueTable table);

  OperatorKind kind() const noexcept;
  const TorusShape& shape() const noexcept;
  double alpha() const noexcept;
  const EigenvalueTable& eigenvalues() const noexcept;
  /// Only long-range operators carry a kernel.
  const KernelTable* kernel() const noexcept;
  std::string describe() const;

  /// Delta^* f (averaging minus identity; negative semidefinite).
  LatticeField apply(const LatticeField& f) const;
  void apply_into(std::span<const double> in, std::span<double> out) const;

  /// Mean-zero h with (-Delta^*) h = charge. Throws MassMismatch when the
  /// charge does not sum to zero within 1e-9 n^d.
  LatticeField solve_poisson(const LatticeField& charge) const;

  /// 1 / (-lambda(w)), zero at w = 0.
  std::span<const double> green_multiplier() const noexcept;

 private:
  struct Data;
  explicit Operator(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

LatticeField solve_poisson(const LatticeField& charge, const Operator& op);

}  // namespace dsand
