#include "dsand/test_function.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"

namespace dsand {
namespace {

bool canonical_sign(const std::vector<int>& k) {
  for (int c : k) {
    if (c != 0) return c > 0;
  }
  return true;
}

double sinc(double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Format, "cannot parse number '" + s + "'");
  }
}

}  // namespace

TestFunction::TestFunction(int dim, std::vector<TrigMode> modes) : dim_(dim) {
  require(dim >= 1, "test function dimension must be >= 1");
  for (auto& m : modes) {
    require(static_cast<int>(m.k.size()) == dim, "mode dimension mismatch");
    bool zero = true;
    for (int c : m.k) zero = zero && c == 0;
    require(!zero, "test functions are mean-zero: the k = 0 mode is not allowed");
    require(std::isfinite(m.cos_coeff) && std::isfinite(m.sin_coeff), "mode coefficients must be finite");
    if (!canonical_sign(m.k)) {
      for (auto& c : m.k) c = -c;
      m.sin_coeff = -m.sin_coeff;
    }
    bool merged = false;
    for (auto& existing : modes_) {
      if (existing.k == m.k) {
        existing.cos_coeff += m.cos_coeff;
        existing.sin_coeff += m.sin_coeff;
        merged = true;
        break;
      }
    }
    if (!merged) modes_.push_back(m);
  }
}

TestFunction TestFunction::cosine(std::vector<int> k, double amplitude) {
  const int dim = static_cast<int>(k.size());
  return TestFunction(dim, {TrigMode{std::move(k), amplitude, 0.0}});
}

TestFunction TestFunction::parse(int dim, const std::string& text) {
  std::vector<TrigMode> modes;
  for (const auto& item : split(text, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto parts = split(item, ':');
    if (parts.size() != 3) fail(ErrorCode::Format, "test-function mode '" + item + "' must read k1,..,kd:cos:sin");
    TrigMode m;
    for (const auto& c : split(parts[0], ',')) m.k.push_back(static_cast<int>(parse_double(c)));
    if (static_cast<int>(m.k.size()) != dim) {
      fail(ErrorCode::Format, "test-function mode '" + item + "' has wrong dimension");
    }
    m.cos_coeff = parse_double(parts[1]);
    m.sin_coeff = parse_double(parts[2]);
    modes.push_back(std::move(m));
  }
  if (modes.empty()) fail(ErrorCode::Format, "test function has no modes");
  return TestFunction(dim, std::move(modes));
}

std::string TestFunction::to_string() const {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (i) out << ';';
    for (std::size_t a = 0; a < modes_[i].k.size(); ++a) out << (a ? "," : "") << modes_[i].k[a];
    out << ':' << modes_[i].cos_coeff << ':' << modes_[i].sin_coeff;
  }
  return out.str();
}

double TestFunction::operator()(std::span<const double> x) const {
  double v = 0.0;
  for (const auto& m : modes_) {
    double phase = 0.0;
    for (int a = 0; a < dim_; ++a) phase += m.k[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
    phase *= 2.0 * std::numbers::pi;
    v += m.cos_coeff * std::cos(phase) + m.sin_coeff * std::sin(phase);
  }
  return v;
}

Complex TestFunction::coefficient(std::span<const int> z) const {
  // cos = (e^{+} + e^{-})/2, sin = (e^{+} - e^{-})/(2i); pairing with
  // exp(-2 pi i z.x) picks the e^{+} term when z = k and e^{-} when z = -k.
  Complex c{0.0, 0.0};
  for (const auto& m : modes_) {
    bool plus = true, minus = true;
    for (int a = 0; a < dim_; ++a) {
      plus = plus && z[static_cast<std::size_t>(a)] == m.k[static_cast<std::size_t>(a)];
      minus = minus && z[static_cast<std::size_t>(a)] == -m.k[static_cast<std::size_t>(a)];
    }
    if (plus) c += Complex(0.5 * m.cos_coeff, -0.5 * m.sin_coeff);
    if (minus) c += Complex(0.5 * m.cos_coeff, 0.5 * m.sin_coeff);
  }
  return c;
}

TestFunction TestFunction::scaled(double factor) const {
  auto modes = modes_;
  for (auto& m : modes) {
    m.cos_coeff *= factor;
    m.sin_coeff *= factor;
  }
  return TestFunction(dim_, std::move(modes));
}

double cell_integral(const TestFunction& f, std::span<const int> z, const TorusShape& shape) {
  require(f.dim() == shape.dim(), "test function and torus dimensions differ");
  const double h = 1.0 / shape.side();
  double total = 0.0;
  for (const auto& m : f.modes()) {
    double phase = 0.0;
    double weight = 1.0;
    for (int a = 0; a < shape.dim(); ++a) {
      const double k = m.k[static_cast<std::size_t>(a)];
      phase += k * z[static_cast<std::size_t>(a)] * h;
      weight *= h * sinc(std::numbers::pi * k * h);
    }
    phase *= 2.0 * std::numbers::pi;
    total += weight * (m.cos_coeff * std::cos(phase) + m.sin_coeff * std::sin(phase));
  }
  return total;
}

std::vector<double> cell_integrals(const TestFunction& f, const TorusShape& shape) {
  std::vector<double> out(shape.size());
  std::vector<int> z(static_cast<std::size_t>(shape.dim()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    shape.coord(i, z);
    out[i] = cell_integral(f, z, shape);
  }
  return out;
}

}  // namespace dsand
