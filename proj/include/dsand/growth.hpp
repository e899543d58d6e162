#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dsand {

/// Cube {x in Z^d : |x|_inf <= radius}, stored row-major.
class Box {
 public:
  Box(int dim, int radius);

  int dim() const noexcept { return dim_; }
  int radius() const noexcept { return radius_; }
  int side() const noexcept { return 2 * radius_ + 1; }
  std::size_t size() const noexcept { return size_; }
  std::size_t origin() const noexcept { return size_ / 2; }

  std::size_t index(std::span<const int> x) const;
  void coord(std::size_t i, std::span<int> out) const;
  std::size_t stride(int axis) const noexcept { return stride_[static_cast<std::size_t>(axis)]; }
  bool on_boundary(std::size_t i) const;

 private:
  int dim_;
  int radius_;
  std::size_t size_;
  std::vector<std::size_t> stride_;
};

/// Volume of the Euclidean unit ball in R^d.
double unit_ball_volume(int d);
/// Radius of the ball of the given volume.
double ball_radius(double volume, int d);
/// Smallest admissible box radius: twice the predicted ball radius, plus one.
int default_box_radius(double volume, int d);

struct AggregateSet {
  Box box;
  std::vector<std::uint8_t> occupied;
  /// Occupied sites in order of occupation.
  std::vector<std::size_t> order;

  explicit AggregateSet(Box b) : box(std::move(b)), occupied(box.size(), 0) {}
  std::size_t volume() const noexcept { return order.size(); }
};

/// Internal DLA: particle j walks with stream (seed, j) until it steps onto
/// an unoccupied site. Throws BoxTooSmall if a walker reaches the box boundary
/// or the box radius is below 2 (N / omega_d)^{1/d}. radius 0 picks the default.
AggregateSet idla_aggregate(long particles, int dim, std::uint64_t seed, int box_radius = 0);

/// Direction j of the rotor cycle: axis j / 2, sign + for even j.
struct RotorOptions {
  /// Permutation of 0..2d-1; empty means (+e1, -e1, ..., +ed, -ed).
  std::vector<int> cycle;
  /// Position in the cycle every rotor starts at.
  int initial = 0;
};

/// Rotor-router: an occupied site sends the particle along its rotor's
/// current direction, then advances the rotor one step in the cycle.
AggregateSet rotor_router_aggregate(long particles, int dim, const RotorOptions& options = {}, int box_radius = 0);

struct PointSourceResult {
  Box box;
  std::vector<double> heights;
  std::vector<double> odometer;
  AggregateSet toppled;  // {u > 0}
  long steps = 0;
  double total_excess = 0.0;
};

/// Divisible sandpile from mass m at the origin with nearest-neighbour
/// parallel toppling until total excess <= tolerance (<= 0 means 1e-10 m).
PointSourceResult point_source_sandpile(double mass, int dim, int box_radius = 0, double tolerance = 0.0,
                                        long max_steps = 50'000'000);

struct ObstacleResult {
  int dim = 2;
  int half = 0;  // grid points h * i with |i|_inf <= half
  double h = 1.0;
  std::vector<double> source;
  std::vector<double> gamma;
  std::vector<double> v;
  std::vector<std::uint8_t> noncoincidence;
  long sweeps = 0;
  double max_update = 0.0;
  double tolerance = 0.0;
  /// |D| = h^d #{v > gamma + tol}.
  double volume = 0.0;
};

/// Source density given per grid point of the box [-half h, half h]^d.
/// gamma solves L_h gamma = s - 1 inside with far-field boundary data
/// -|x|^2 - sum_y G(x - y) s(y) h^d; v is the least superharmonic majorant
/// with v = gamma on the boundary, found by projected red-black Gauss-Seidel.
ObstacleResult continuum_obstacle_solve(int dim, int half, double h, const std::vector<double>& source,
                                        long max_sweeps = 5'000'000);

struct ShapeMetrics {
  double inradius = 0.0;
  double outradius = 0.0;
  std::size_t volume = 0;
  double deviation = 0.0;
  /// (inradius + outradius) / 2.
  double radius = 0.0;
};

ShapeMetrics shape_metrics(const AggregateSet& agg, double predicted_radius);

/// "x1,..,xd" per occupied site, in occupation order.
std::string aggregate_csv(const AggregateSet& agg);
/// d = 2 occupancy bitmap (occupied white) as binary PGM.
std::vector<std::uint8_t> aggregate_pgm(const AggregateSet& agg);
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& label, const ShapeMetrics& m);

}  // namespace dsand
