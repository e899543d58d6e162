#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "dsand/lattice.hpp"
#include "dsand/operators.hpp"

namespace dsand {

/// Heights s_t, emitted mass u_t and step counter under a fixed operator.
/// Heights are held as h = s - 1 so that rounding near stability is relative
/// to the excess rather than to 1.
struct SandpileState {
  LatticeField h;
  LatticeField u;
  long steps = 0;
  Operator op;

  SandpileState(const LatticeField& heights, Operator op);
  LatticeField heights() const;
};

/// One synchronous step: e = (s - 1)^+, s <- s + Delta* e, u <- u + e.
/// Returns the total excess sum e that was toppled.
double parallel_topple_step(SandpileState& state);

/// Topples sites one at a time in the given order, each with its current
/// excess. Under the long-range operator a site also sends p(0) e to itself.
double sequential_topple_pass(SandpileState& state, std::span<const std::size_t> order);

enum class StabilizationStatus { Stabilized, Exploded, StepLimit };

const char* status_name(StabilizationStatus status);

struct StabilizationReport {
  StabilizationStatus status = StabilizationStatus::StepLimit;
  long steps = 0;
  double max_excess = 0.0;
  double total_excess = 0.0;
  double initial_mass = 0.0;
  double final_mass = 0.0;
};

struct StabilizeOptions {
  /// Total excess at which the run counts as stabilized; <= 0 means kDefaultTolerance.
  double tolerance = 0.0;
  long max_steps = 10'000'000;
  /// Sequential passes in this order instead of parallel steps when nonempty.
  std::span<const std::size_t> sequential_order{};
  long snapshot_every = 0;
  std::function<void(const SandpileState&)> on_snapshot;
};

inline constexpr double kDefaultTolerance = 1e-10;

/// sum_x (s(x) - 1)^+ of a height field.
double total_excess(const LatticeField& s);

StabilizationReport stabilize(SandpileState& state, const StabilizeOptions& options = {});

struct DensityProbeResult {
  int trials = 0;
  int stabilized = 0;
  int exploded = 0;
  int step_limited = 0;
  double fraction_stabilized = 0.0;
  /// Mean of the average odometer over stabilized trials (0 when none).
  double mean_odometer = 0.0;
};

/// i.i.d. configurations s = rho + fluctuation * N(0,1), not centred.
/// With exact_mass the sample is recentred to mean rho first.
DensityProbeResult density_probe(double rho, const Operator& op, int trials, std::uint64_t seed,
                                 double fluctuation = 0.01, bool exact_mass = false,
                                 const StabilizeOptions& options = {});

}  // namespace dsand
