#include "dsand/growth.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"
#include "dsand/lattice.hpp"
#include "dsand/rng.hpp"

namespace dsand {
namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void box_too_small(const std::string& what, int radius) {
  fail(ErrorCode::BoxTooSmall, what + " reached the boundary of the box of radius " + std::to_string(radius) +
                                   "; rerun with a larger box");
}

void check_box(long volume, int dim, int radius) {
  const double need = 2.0 * ball_radius(static_cast<double>(volume), dim);
  if (!(radius > need)) {
    std::ostringstream msg;
    msg << "box radius " << radius << " must exceed twice the predicted radius (" << need << ")";
    fail(ErrorCode::BoxTooSmall, msg.str());
  }
}

// Sum of the 2d neighbours, paired per axis and accumulated in sorted order
// so the result is exactly invariant under lattice symmetries.
template <class Get>
double symmetric_neighbour_sum(int d, Get&& pair_sum) {
  double pairs[8];
  for (int a = 0; a < d; ++a) pairs[a] = pair_sum(a);
  std::sort(pairs, pairs + d);
  double acc = 0.0;
  for (int a = 0; a < d; ++a) acc += pairs[a];
  return acc;
}

}  // namespace

Box::Box(int dim, int radius) : dim_(dim), radius_(radius) {
  require(dim >= 1 && dim <= 8, "box dimension must lie in 1..8");
  require(radius >= 1, "box radius must be at least 1");
  const double count = std::pow(2.0 * radius + 1.0, dim);
  require(count < 2e9, "box too large");
  size_ = static_cast<std::size_t>(count);
  stride_.assign(static_cast<std::size_t>(dim), 1);
  for (int a = dim - 2; a >= 0; --a) {
    stride_[static_cast<std::size_t>(a)] = stride_[static_cast<std::size_t>(a) + 1] * static_cast<std::size_t>(side());
  }
}

std::size_t Box::index(std::span<const int> x) const {
  std::size_t i = 0;
  for (int a = 0; a < dim_; ++a) {
    const int v = x[static_cast<std::size_t>(a)];
    require(std::abs(v) <= radius_, "point outside the box");
    i += static_cast<std::size_t>(v + radius_) * stride_[static_cast<std::size_t>(a)];
  }
  return i;
}

void Box::coord(std::size_t i, std::span<int> out) const {
  for (int a = 0; a < dim_; ++a) {
    const auto s = stride_[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(a)] = static_cast<int>(i / s) - radius_;
    i %= s;
  }
}

bool Box::on_boundary(std::size_t i) const {
  for (int a = 0; a < dim_; ++a) {
    const auto s = stride_[static_cast<std::size_t>(a)];
    const auto c = (i / s) % static_cast<std::size_t>(side());
    if (c == 0 || c + 1 == static_cast<std::size_t>(side())) return true;
  }
  return false;
}

double unit_ball_volume(int d) { return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }

double ball_radius(double volume, int d) { return std::pow(volume / unit_ball_volume(d), 1.0 / d); }

int default_box_radius(double volume, int d) {
  return static_cast<int>(std::floor(2.0 * ball_radius(volume, d))) + 2;
}

AggregateSet idla_aggregate(long particles, int dim, std::uint64_t seed, int box_radius) {
  require(particles >= 0, "particle count must be nonnegative");
  if (box_radius <= 0) box_radius = default_box_radius(static_cast<double>(std::max(particles, 1L)), dim);
  check_box(particles, dim, box_radius);
  AggregateSet agg{Box(dim, box_radius)};
  const auto& box = agg.box;
  for (long j = 0; j < particles; ++j) {
    rng::Stream walk(seed, static_cast<std::uint64_t>(j));
    std::size_t at = box.origin();
    while (agg.occupied[at]) {
      const int dir = walk.below(2 * dim);
      const auto step = box.stride(dir / 2);
      at = (dir % 2 == 0) ? at + step : at - step;
      if (box.on_boundary(at)) box_too_small("an iDLA walker", box_radius);
    }
    agg.occupied[at] = 1;
    agg.order.push_back(at);
  }
  return agg;
}

AggregateSet rotor_router_aggregate(long particles, int dim, const RotorOptions& options, int box_radius) {
  require(particles >= 0, "particle count must be nonnegative");
  std::vector<int> cycle = options.cycle;
  if (cycle.empty()) {
    for (int j = 0; j < 2 * dim; ++j) cycle.push_back(j);
  }
  {
    auto sorted = cycle;
    std::sort(sorted.begin(), sorted.end());
    bool ok = static_cast<int>(sorted.size()) == 2 * dim;
    for (int j = 0; ok && j < 2 * dim; ++j) ok = sorted[static_cast<std::size_t>(j)] == j;
    require(ok, "rotor cycle must be a permutation of the 2d directions");
  }
  const int period = 2 * dim;
  require(options.initial >= 0 && options.initial < period, "initial rotor position out of range");
  if (box_radius <= 0) box_radius = default_box_radius(static_cast<double>(std::max(particles, 1L)), dim);
  check_box(particles, dim, box_radius);
  AggregateSet agg{Box(dim, box_radius)};
  const auto& box = agg.box;
  std::vector<std::uint8_t> rotor(box.size(), static_cast<std::uint8_t>(options.initial));
  for (long j = 0; j < particles; ++j) {
    std::size_t at = box.origin();
    while (agg.occupied[at]) {
      auto& r = rotor[at];
      const int dir = cycle[r];
      r = static_cast<std::uint8_t>((r + 1) % period);
      const auto step = box.stride(dir / 2);
      at = (dir % 2 == 0) ? at + step : at - step;
      if (box.on_boundary(at)) box_too_small("a rotor-router particle", box_radius);
    }
    agg.occupied[at] = 1;
    agg.order.push_back(at);
  }
  return agg;
}

PointSourceResult point_source_sandpile(double mass, int dim, int box_radius, double tolerance, long max_steps) {
  require(mass >= 0.0 && std::isfinite(mass), "mass must be finite and nonnegative");
  if (box_radius <= 0) box_radius = default_box_radius(std::max(mass, 1.0), dim);
  check_box(static_cast<long>(std::ceil(mass)), dim, box_radius);
  const double tau = tolerance > 0.0 ? tolerance : 1e-10 * std::max(mass, 1.0);
  Box box(dim, box_radius);
  PointSourceResult out{box, std::vector<double>(box.size(), 0.0), std::vector<double>(box.size(), 0.0),
                        AggregateSet{box}, 0, 0.0};
  auto& s = out.heights;
  auto& u = out.odometer;
  s[box.origin()] = mass;
  std::vector<double> e(box.size(), 0.0);
  std::vector<int> x(static_cast<std::size_t>(dim));
  int reach = 0;  // sup-norm radius containing all mass
  const double inv2d = 1.0 / (2.0 * dim);

  // Visit every site with |x|_inf <= r.
  auto for_cube = [&](int r, auto&& fn) {
    std::fill(x.begin(), x.end(), -r);
    for (;;) {
      std::size_t i = 0;
      for (int a = 0; a < dim; ++a) i += static_cast<std::size_t>(x[static_cast<std::size_t>(a)] + box_radius) * box.stride(a);
      fn(i);
      int a = dim - 1;
      while (a >= 0 && x[static_cast<std::size_t>(a)] == r) x[static_cast<std::size_t>(a--)] = -r;
      if (a < 0) break;
      ++x[static_cast<std::size_t>(a)];
    }
  };

  for (;;) {
    double excess = 0.0;
    int active = -1;  // sup-norm radius of the toppling sites
    for_cube(reach, [&](std::size_t i) {
      e[i] = s[i] > 1.0 ? s[i] - 1.0 : 0.0;
      if (e[i] > 0.0) {
        excess += e[i];
        for (int v : x) active = std::max(active, std::abs(v));
      }
    });
    out.total_excess = excess;
    if (excess <= tau) break;
    if (out.steps >= max_steps) {
      fail(ErrorCode::NotConverged, "point-source sandpile did not stabilize within the step limit; excess " +
                                        io::format_double(excess));
    }
    const int next = active + 1;
    if (next >= box_radius) box_too_small("sandpile mass", box_radius);
    for_cube(next, [&](std::size_t i) {
      const double nb = symmetric_neighbour_sum(dim, [&](int a) {
        const auto st = box.stride(a);
        return e[i + st] + e[i - st];
      });
      s[i] += nb * inv2d - e[i];
      u[i] += e[i];
    });
    reach = std::max(reach, next);
    ++out.steps;
  }
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (u[i] > 0.0) {
      out.toppled.occupied[i] = 1;
      out.toppled.order.push_back(i);
    }
  }
  return out;
}

namespace {

struct Grid {
  int dim;
  int half;
  int side;
  std::size_t size;
  std::vector<std::size_t> stride;

  Grid(int d, int h) : dim(d), half(h), side(2 * h + 1) {
    size = 1;
    stride.assign(static_cast<std::size_t>(d), 1);
    for (int a = d - 1; a >= 0; --a) {
      stride[static_cast<std::size_t>(a)] = size;
      size *= static_cast<std::size_t>(side);
    }
  }
  void coord(std::size_t i, std::vector<int>& c) const {
    for (int a = 0; a < dim; ++a) {
      c[static_cast<std::size_t>(a)] = static_cast<int>((i / stride[static_cast<std::size_t>(a)]) % side) - half;
    }
  }
  std::size_t index(const std::vector<int>& c) const {
    std::size_t i = 0;
    for (int a = 0; a < dim; ++a) i += static_cast<std::size_t>(c[static_cast<std::size_t>(a)] + half) * stride[static_cast<std::size_t>(a)];
    return i;
  }
  bool boundary(const std::vector<int>& c) const {
    for (int v : c) {
      if (std::abs(v) == half) return true;
    }
    return false;
  }
};

// Fundamental solution scaled so that L_h (G * s) ~ -s for L_h = Delta / 2d.
double green(int d, double r) {
  const double area = d * unit_ball_volume(d);  // surface of the unit sphere
  if (d == 2) return 2.0 * d * (-std::log(r) / (2.0 * kPi));
  return 2.0 * d * std::pow(r, 2.0 - d) / ((d - 2.0) * area);
}

// Replaces every value by the average over its orbit under coordinate
// permutations and reflections, summed in sorted order.
void symmetrize(const Grid& g, std::vector<double>& f) {
  const int d = g.dim;
  std::vector<int> perm(static_cast<std::size_t>(d)), c(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
  std::vector<double> out(f.size()), vals;
  for (std::size_t i = 0; i < f.size(); ++i) {
    g.coord(i, c);
    vals.clear();
    for (int a = 0; a < d; ++a) perm[static_cast<std::size_t>(a)] = a;
    do {
      for (unsigned mask = 0; mask < (1u << d); ++mask) {
        for (int a = 0; a < d; ++a) {
          const int v = c[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
          y[static_cast<std::size_t>(a)] = (mask >> a) & 1u ? -v : v;
        }
        vals.push_back(f[g.index(y)]);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::sort(vals.begin(), vals.end());
    double acc = 0.0;
    for (double v : vals) acc += v;
    out[i] = acc / static_cast<double>(vals.size());
  }
  f.swap(out);
}

}  // namespace

ObstacleResult continuum_obstacle_solve(int dim, int half, double h, const std::vector<double>& source,
                                        long max_sweeps) {
  require(dim >= 2 && dim <= 4, "continuum obstacle solver supports d = 2..4");
  require(half >= 2 && h > 0.0, "obstacle grid needs half >= 2 and h > 0");
  const Grid g(dim, half);
  require(source.size() == g.size, "source density does not match the grid");
  std::vector<int> c(static_cast<std::size_t>(dim)), y(static_cast<std::size_t>(dim));
  const double hd = std::pow(h, dim);
  for (std::size_t i = 0; i < g.size; ++i) {
    require(std::isfinite(source[i]) && source[i] >= 0.0, "source density must be finite and nonnegative");
    g.coord(i, c);
    if (g.boundary(c)) require(source[i] == 0.0, "source must vanish on the box boundary");
  }

  ObstacleResult out;
  out.dim = dim;
  out.half = half;
  out.h = h;
  out.source = source;
  auto& gamma = out.gamma;
  gamma.assign(g.size, 0.0);

  // Far-field data on the boundary.
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < g.size; ++i) {
    if (source[i] != 0.0) support.push_back(i);
  }
  for (std::size_t i = 0; i < g.size; ++i) {
    g.coord(i, c);
    if (!g.boundary(c)) continue;
    double r2 = 0.0;
    for (int v : c) r2 += (v * h) * (v * h);
    double potential = 0.0;
    for (auto j : support) {
      g.coord(j, y);
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double diff = (c[static_cast<std::size_t>(a)] - y[static_cast<std::size_t>(a)]) * h;
        d2 += diff * diff;
      }
      potential += green(dim, std::sqrt(d2)) * source[j] * hd;
    }
    gamma[i] = -r2 - potential;
  }

  // Interior: L_h gamma = s - 1 with the boundary values above, via DST-I.
  const int m = 2 * half - 1;  // interior points per axis
  std::size_t interior = 1;
  for (int a = 0; a < dim; ++a) interior *= static_cast<std::size_t>(m);
  std::vector<double> rhs(interior);
  const double coef = 1.0 / (2.0 * dim * h * h);
  {
    std::vector<int> k(static_cast<std::size_t>(dim), 0);
    for (std::size_t q = 0; q < interior; ++q) {
      for (int a = 0; a < dim; ++a) c[static_cast<std::size_t>(a)] = k[static_cast<std::size_t>(a)] + 1 - half;
      const auto i = g.index(c);
      double b = source[i] - 1.0;
      for (int a = 0; a < dim; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        for (int step : {-1, 1}) {
          y = c;
          y[ua] += step;
          if (g.boundary(y)) b -= coef * gamma[g.index(y)];
        }
      }
      rhs[q] = b;
      int a = dim - 1;
      while (a >= 0 && k[static_cast<std::size_t>(a)] == m - 1) k[static_cast<std::size_t>(a--)] = 0;
      if (a >= 0) ++k[static_cast<std::size_t>(a)];
    }
  }
  {
    std::vector<int> dims(static_cast<std::size_t>(dim), m);
    std::vector<fftw_r2r_kind> kinds(static_cast<std::size_t>(dim), FFTW_RODFT00);
    fftw_plan plan;
    {
      std::lock_guard lock(fft::planner_mutex());
      plan = fftw_plan_r2r(dim, dims.data(), rhs.data(), rhs.data(), kinds.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::vector<double> s2(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      const double sn = std::sin(kPi * (j + 1) / (2.0 * (m + 1)));
      s2[static_cast<std::size_t>(j)] = sn * sn;
    }
    std::vector<int> k(static_cast<std::size_t>(dim), 0);
    const double norm = std::pow(2.0 * (m + 1), dim);
    for (std::size_t q = 0; q < interior; ++q) {
      double lam = 0.0;
      for (int v : k) lam += s2[static_cast<std::size_t>(v)];
      lam *= -2.0 / (dim * h * h);
      rhs[q] /= lam * norm;
      int a = dim - 1;
      while (a >= 0 && k[static_cast<std::size_t>(a)] == m - 1) k[static_cast<std::size_t>(a--)] = 0;
      if (a >= 0) ++k[static_cast<std::size_t>(a)];
    }
    fftw_execute(plan);
    {
      std::lock_guard lock(fft::planner_mutex());
      fftw_destroy_plan(plan);
    }
    std::fill(k.begin(), k.end(), 0);
    for (std::size_t q = 0; q < interior; ++q) {
      for (int a = 0; a < dim; ++a) c[static_cast<std::size_t>(a)] = k[static_cast<std::size_t>(a)] + 1 - half;
      gamma[g.index(c)] = rhs[q];
      int a = dim - 1;
      while (a >= 0 && k[static_cast<std::size_t>(a)] == m - 1) k[static_cast<std::size_t>(a--)] = 0;
      if (a >= 0) ++k[static_cast<std::size_t>(a)];
    }
  }
  symmetrize(g, gamma);

  // Least superharmonic majorant: v <- max(gamma, neighbour average),
  // red-black ordered so updates within a colour are independent.
  double gmax = -INFINITY, gabs = 0.0;
  for (double v : gamma) {
    gmax = std::max(gmax, v);
    gabs = std::max(gabs, std::abs(v));
  }
  auto& v = out.v;
  v.assign(g.size, gmax);
  std::vector<std::uint8_t> colour(g.size), inside(g.size);
  for (std::size_t i = 0; i < g.size; ++i) {
    g.coord(i, c);
    int parity = 0;
    for (int t : c) parity += t + half;
    colour[i] = static_cast<std::uint8_t>(parity & 1);
    inside[i] = !g.boundary(c);
    if (!inside[i]) v[i] = gamma[i];
  }
  out.tolerance = 1e-10 * gabs;
  const double inv2d = 1.0 / (2.0 * dim);
  for (;;) {
    double biggest = 0.0;
    for (int col = 0; col < 2; ++col) {
      for (std::size_t i = 0; i < g.size; ++i) {
        if (!inside[i] || colour[i] != col) continue;
        const double avg = symmetric_neighbour_sum(dim, [&](int a) {
                             const auto st = g.stride[static_cast<std::size_t>(a)];
                             return v[i + st] + v[i - st];
                           }) * inv2d;
        const double next = std::max(gamma[i], avg);
        biggest = std::max(biggest, v[i] - next);
        v[i] = next;
      }
    }
    ++out.sweeps;
    out.max_update = biggest;
    if (biggest < out.tolerance) break;
    if (out.sweeps >= max_sweeps) {
      fail(ErrorCode::NotConverged, "obstacle iteration did not converge; last update " + io::format_double(biggest));
    }
  }
  out.noncoincidence.assign(g.size, 0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.size; ++i) {
    if (v[i] > gamma[i] + 10.0 * out.tolerance) {
      out.noncoincidence[i] = 1;
      ++count;
    }
  }
  out.volume = static_cast<double>(count) * hd;
  return out;
}

ShapeMetrics shape_metrics(const AggregateSet& agg, double predicted_radius) {
  require(agg.volume() > 0, "shape metrics need a nonempty aggregate");
  require(predicted_radius > 0.0, "predicted radius must be positive");
  const auto& box = agg.box;
  std::vector<int> c(static_cast<std::size_t>(box.dim()));
  double out_r2 = 0.0, hole_r2 = INFINITY;
  for (std::size_t i = 0; i < box.size(); ++i) {
    box.coord(i, c);
    double r2 = 0.0;
    for (int v : c) r2 += static_cast<double>(v) * v;
    if (agg.occupied[i]) {
      out_r2 = std::max(out_r2, r2);
    } else {
      hole_r2 = std::min(hole_r2, r2);
    }
  }
  double in_r2 = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!agg.occupied[i]) continue;
    box.coord(i, c);
    double r2 = 0.0;
    for (int v : c) r2 += static_cast<double>(v) * v;
    if (r2 < hole_r2) in_r2 = std::max(in_r2, r2);
  }
  ShapeMetrics m;
  m.inradius = std::sqrt(in_r2);
  m.outradius = std::sqrt(out_r2);
  m.volume = agg.volume();
  m.deviation = (m.outradius - m.inradius) / predicted_radius;
  m.radius = 0.5 * (m.inradius + m.outradius);
  return m;
}

std::string aggregate_csv(const AggregateSet& agg) {
  std::string out;
  std::vector<int> c(static_cast<std::size_t>(agg.box.dim()));
  for (auto i : agg.order) {
    agg.box.coord(i, c);
    for (std::size_t a = 0; a < c.size(); ++a) {
      if (a) out += ',';
      out += std::to_string(c[a]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::uint8_t> aggregate_pgm(const AggregateSet& agg) {
  if (agg.box.dim() != 2) fail(ErrorCode::InvalidArgument, "aggregate bitmaps need d = 2");
  std::vector<std::uint8_t> pixels(agg.box.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = agg.occupied[i] ? 255 : 0;
  return io::encode_pgm(agg.box.side(), agg.box.side(), pixels);
}

std::string metrics_csv_header() { return "label,volume,inradius,outradius,radius,deviation\n"; }

std::string metrics_csv_row(const std::string& label, const ShapeMetrics& m) {
  return label + "," + std::to_string(m.volume) + "," + io::format_double(m.inradius) + "," +
         io::format_double(m.outradius) + "," + io::format_double(m.radius) + "," + io::format_double(m.deviation) +
         "\n";
}

}  // namespace dsand
