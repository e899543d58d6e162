#include "dsand/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "dsand/error.hpp"

namespace dsand {

TorusShape::TorusShape(int dim, int side) : dim_(dim), side_(side), size_(1) {
  require(dim >= 1, "torus dimension must be >= 1, got " + std::to_string(dim));
  require(side >= 2, "torus side must be >= 2, got " + std::to_string(side));
  stride_.assign(static_cast<std::size_t>(dim), 1);
  for (int a = dim - 1; a >= 0; --a) {
    stride_[static_cast<std::size_t>(a)] = size_;
    size_ *= static_cast<std::size_t>(side);
  }
}

std::size_t TorusShape::index(std::span<const int> coord) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    int c = coord[static_cast<std::size_t>(a)] % side_;
    if (c < 0) c += side_;
    idx += static_cast<std::size_t>(c) * stride_[static_cast<std::size_t>(a)];
  }
  return idx;
}

std::vector<int> TorusShape::coord(std::size_t index) const {
  std::vector<int> out(static_cast<std::size_t>(dim_));
  coord(index, out);
  return out;
}

void TorusShape::coord(std::size_t index, std::span<int> out) const {
  for (int a = 0; a < dim_; ++a) {
    const auto s = stride_[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(a)] = static_cast<int>(index / s);
    index %= s;
  }
}

std::vector<int> TorusShape::wrap(std::span<const int> coord) const {
  std::vector<int> out(coord.begin(), coord.end());
  for (auto& c : out) {
    c %= side_;
    if (c < 0) c += side_;
  }
  return out;
}

std::size_t TorusShape::negate(std::size_t index) const {
  std::size_t out = 0;
  for (int a = 0; a < dim_; ++a) {
    const auto s = stride_[static_cast<std::size_t>(a)];
    const auto c = index / s;
    index %= s;
    const auto nc = c == 0 ? 0 : static_cast<std::size_t>(side_) - c;
    out += nc * s;
  }
  return out;
}

std::size_t TorusShape::shift(std::size_t index, int axis, int step) const {
  const auto s = stride_[static_cast<std::size_t>(axis)];
  const auto n = static_cast<long long>(side_);
  const auto c = static_cast<long long>((index / s) % static_cast<std::size_t>(side_));
  long long nc = (c + step) % n;
  if (nc < 0) nc += n;
  return index - static_cast<std::size_t>(c) * s + static_cast<std::size_t>(nc) * s;
}

std::vector<int> wrap_coord(std::span<const int> x, const TorusShape& shape) {
  require(static_cast<int>(x.size()) == shape.dim(), "coordinate length does not match torus dimension");
  return shape.wrap(x);
}

// ---------------------------------------------------------------------------

LatticeField::LatticeField(TorusShape shape, double fill)
    : shape_(std::move(shape)), values_(shape_.size(), fill) {}

LatticeField::LatticeField(TorusShape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == shape_.size(),
          "field has " + std::to_string(values_.size()) + " values, torus has " +
              std::to_string(shape_.size()) + " sites");
}

double LatticeField::sum() const {
  // Neumaier summation: mass bookkeeping relies on tight sums.
  double s = 0.0, c = 0.0;
  for (double v : values_) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

double LatticeField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double LatticeField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double LatticeField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool LatticeField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(TorusShape shape)
    : shape_(std::move(shape)), coeff_(shape_.size()) {}

SpectralField::SpectralField(TorusShape shape, std::vector<Complex> coefficients)
    : shape_(std::move(shape)), coeff_(std::move(coefficients)) {
  require(coeff_.size() == shape_.size(), "spectral field size does not match torus");
}

double SpectralField::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < coeff_.size(); ++i) {
    worst = std::max(worst, std::abs(coeff_[shape_.negate(i)] - std::conj(coeff_[i])));
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace fft {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

// FFTW planning is not thread-safe; execution with new arrays is. Plans are
// created once per (d, n, sign) with FFTW_ESTIMATE so the chosen algorithm,
// and therefore every output bit, is independent of timing.
class PlanCache {
 public:
  fftw_plan get(const TorusShape& shape, int sign) {
    const auto key = std::make_tuple(shape.dim(), shape.side(), sign);
    std::lock_guard lock(planner_mutex());
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<int> dims(static_cast<std::size_t>(shape.dim()), shape.side());
    std::vector<Complex> scratch(shape.size());
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft(shape.dim(), dims.data(), p, p,
                                   sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) fail(ErrorCode::Internal, "FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void transform(const TorusShape& shape, std::span<Complex> data, int sign) {
  require(data.size() == shape.size(), "transform buffer does not match torus");
  fftw_plan plan = cache().get(shape, sign);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

std::vector<double> apply_real_multiplier(const TorusShape& shape,
                                          std::span<const double> field,
                                          std::span<const double> table) {
  require(field.size() == shape.size() && table.size() == shape.size(),
          "multiplier size does not match torus");
  std::vector<Complex> buf(field.begin(), field.end());
  transform(shape, buf, -1);
  const double inv = 1.0 / static_cast<double>(shape.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= table[i] * inv;
  transform(shape, buf, +1);
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace fft

SpectralField dft(const LatticeField& f) {
  std::vector<Complex> buf(f.values().begin(), f.values().end());
  fft::transform(f.shape(), buf, -1);
  const double inv = 1.0 / static_cast<double>(f.size());
  for (auto& c : buf) c *= inv;
  return SpectralField(f.shape(), std::move(buf));
}

LatticeField idft(const SpectralField& F) {
  double scale = 0.0;
  for (const auto& c : F.coefficients()) scale = std::max(scale, std::abs(c));
  const double defect = F.hermitian_defect();
  if (defect > 1e-12 * scale + 1e-300) {
    fail(ErrorCode::InvalidSpectrum,
         "spectrum is not Hermitian (defect " + std::to_string(defect) +
             "); inverse transform would not be real");
  }
  std::vector<Complex> buf(F.coefficients().begin(), F.coefficients().end());
  fft::transform(F.shape(), buf, +1);
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  return LatticeField(F.shape(), std::move(out));
}

}  // namespace dsand
