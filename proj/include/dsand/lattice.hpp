#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

namespace dsand {

using Complex = std::complex<double>;

/// Geometry of the discrete torus Z^d_n. Sites are stored row-major over
/// canonical coordinates 0..n-1, first coordinate slowest.
class TorusShape {
 public:
  TorusShape(int dim, int side);

  int dim() const noexcept { return dim_; }
  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return size_; }

  std::size_t index(std::span<const int> coord) const;
  std::vector<int> coord(std::size_t index) const;
  void coord(std::size_t index, std::span<int> out) const;

  /// Canonical residue of an arbitrary integer coordinate.
  std::vector<int> wrap(std::span<const int> coord) const;

  /// Index of the site -x.
  std::size_t negate(std::size_t index) const;

  /// Index of x + e_axis * step (periodic).
  std::size_t shift(std::size_t index, int axis, int step) const;

  /// Symmetric representative of a canonical coordinate: values > n/2 map to
  /// value - n.
  int centered(int c) const noexcept { return c > side_ / 2 ? c - side_ : c; }

  bool operator==(const TorusShape&) const = default;

 private:
  int dim_;
  int side_;
  std::size_t size_;
  std::vector<std::size_t> stride_;
};

/// Componentwise residue of x modulo n.
std::vector<int> wrap_coord(std::span<const int> x, const TorusShape& shape);

/// Real-valued function on the torus.
class LatticeField {
 public:
  explicit LatticeField(TorusShape shape, double fill = 0.0);
  LatticeField(TorusShape shape, std::vector<double> values);

  const TorusShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double sum() const;
  double mean() const { return sum() / static_cast<double>(size()); }
  double min() const;
  double max() const;
  double max_abs() const;
  bool all_finite() const;

 private:
  TorusShape shape_;
  std::vector<double> values_;
};

/// Fourier coefficients f^(w) for w in Z^d_n, stored in the same order as the
/// lattice sites.
class SpectralField {
 public:
  explicit SpectralField(TorusShape shape);
  SpectralField(TorusShape shape, std::vector<Complex> coefficients);

  const TorusShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return coeff_.size(); }

  Complex operator[](std::size_t i) const { return coeff_[i]; }
  Complex& operator[](std::size_t i) { return coeff_[i]; }

  std::span<const Complex> coefficients() const noexcept { return coeff_; }
  std::span<Complex> coefficients() noexcept { return coeff_; }

  /// Largest |F(-w) - conj F(w)|.
  double hermitian_defect() const;

 private:
  TorusShape shape_;
  std::vector<Complex> coeff_;
};

/// f^(w) = n^{-d} sum_z f(z) exp(-2 pi i z.w / n).
SpectralField dft(const LatticeField& f);

/// Inverse of dft. Throws InvalidSpectrum when the coefficients are not
/// Hermitian (the result would not be real).
LatticeField idft(const SpectralField& F);

namespace fft {

/// FFTW planning is not thread-safe; every planner call holds this lock.
std::mutex& planner_mutex();

/// Unnormalized in-place transform over the torus:
/// out(w) = sum_z in(z) exp(sign * 2 pi i z.w / n).
void transform(const TorusShape& shape, std::span<Complex> data, int sign);

/// Multiply the spectrum of a real field by a real even table and return the
/// real part of the inverse transform. The zero mode is taken from table[0].
std::vector<double> apply_real_multiplier(const TorusShape& shape,
                                          std::span<const double> field,
                                          std::span<const double> table);

}  // namespace fft

}  // namespace dsand
