#include "dsand/toppling.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dsand/error.hpp"
#include "dsand/parallel.hpp"
#include "dsand/rng.hpp"

namespace dsand {

SandpileState::SandpileState(const LatticeField& heights, Operator op_)
    : h(heights.shape()), u(heights.shape()), op(std::move(op_)) {
  require(heights.shape() == op.shape(), "configuration and operator shapes differ");
  require(heights.all_finite(), "configuration must be finite");
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = heights[i] - 1.0;
}

LatticeField SandpileState::heights() const {
  LatticeField s(h.shape());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 + h[i];
  return s;
}

namespace {

double positive_part_sum(const LatticeField& h) {
  double t = 0.0;
  for (double v : h.values()) t += v > 0.0 ? v : 0.0;
  return t;
}

}  // namespace

double total_excess(const LatticeField& s) {
  double t = 0.0;
  for (double v : s.values()) t += v > 1.0 ? v - 1.0 : 0.0;
  return t;
}


double parallel_topple_step(SandpileState& state) {
  const auto n = state.h.size();
  std::vector<double> e(n), flow(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = state.h[i] > 0.0 ? state.h[i] : 0.0;
    total += e[i];
  }
  if (total == 0.0) return 0.0;
  state.op.apply_into(e, flow);
  for (std::size_t i = 0; i < n; ++i) {
    state.h[i] += flow[i];
    state.u[i] += e[i];
  }
  ++state.steps;
  return total;
}

double sequential_topple_pass(SandpileState& state, std::span<const std::size_t> order) {
  const auto& shape = state.h.shape();
  const auto n = shape.size();
  require(order.size() == n, "site order must be a permutation of all sites");
  {
    std::vector<char> seen(n, 0);
    for (auto i : order) {
      require(i < n && !seen[i], "site order must be a permutation of all sites");
      seen[i] = 1;
    }
  }
  const KernelTable* kernel = state.op.kernel();
  if (state.op.kind() == OperatorKind::Multiplier) {
    fail(ErrorCode::InvalidArgument, "sequential toppling needs a nearest-neighbour or long-range operator");
  }
  const int d = shape.dim();
  std::vector<int> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d));
  double total = 0.0;
  for (auto site : order) {
    const double e = state.h[site];
    if (!(e > 0.0)) continue;
    total += e;
    state.u[site] += e;
    state.h[site] = 0.0;
    if (!kernel) {
      const double share = e / (2.0 * d);
      for (int a = 0; a < d; ++a) {
        state.h[shape.shift(site, a, +1)] += share;
        state.h[shape.shift(site, a, -1)] += share;
      }
    } else {
      shape.coord(site, x);
      for (std::size_t j = 0; j < n; ++j) {
        shape.coord(j, y);
        for (int a = 0; a < d; ++a) {
          const auto ua = static_cast<std::size_t>(a);
          z[ua] = (y[ua] - x[ua] + shape.side()) % shape.side();
        }
        state.h[j] += e * kernel->p[shape.index(z)];
      }
    }
  }
  ++state.steps;
  return total;
}

const char* status_name(StabilizationStatus status) {
  switch (status) {
    case StabilizationStatus::Stabilized: return "stabilized";
    case StabilizationStatus::Exploded: return "exploded";
    case StabilizationStatus::StepLimit: return "step-limit";
  }
  return "unknown";
}

StabilizationReport stabilize(SandpileState& state, const StabilizeOptions& options) {
  require(options.max_steps >= 1, "step limit must be at least 1");
  const double tau = options.tolerance > 0.0 ? options.tolerance : kDefaultTolerance;
  StabilizationReport report;
  const double capacity = static_cast<double>(state.h.size());
  report.initial_mass = capacity + state.h.sum();
  auto finish = [&](StabilizationStatus status) {
    report.status = status;
    report.steps = state.steps;
    report.total_excess = positive_part_sum(state.h);
    report.max_excess = std::max(0.0, state.h.max());
    report.final_mass = capacity + state.h.sum();
    return report;
  };
  // More mass than sites can hold at height 1: conservation forbids stabilizing.
  if (state.h.sum() > tau) return finish(StabilizationStatus::Exploded);

  const long start = state.steps;
  while (positive_part_sum(state.h) > tau) {
    if (state.steps - start >= options.max_steps) return finish(StabilizationStatus::StepLimit);
    if (options.sequential_order.empty()) {
      parallel_topple_step(state);
    } else {
      sequential_topple_pass(state, options.sequential_order);
    }
    if (options.snapshot_every > 0 && options.on_snapshot && state.steps % options.snapshot_every == 0) {
      options.on_snapshot(state);
    }
  }
  return finish(StabilizationStatus::Stabilized);
}

DensityProbeResult density_probe(double rho, const Operator& op, int trials, std::uint64_t seed,
                                 double fluctuation, bool exact_mass, const StabilizeOptions& options) {
  require(trials >= 1, "density probe needs at least one trial");
  const auto& shape = op.shape();
  std::vector<StabilizationReport> reports(static_cast<std::size_t>(trials));
  std::vector<double> mean_u(static_cast<std::size_t>(trials), 0.0);
  parallel_for(reports.size(), [&](std::size_t t) {
    const auto trial_seed = rng::derive(seed, t);
    LatticeField s(shape);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = rho + fluctuation * rng::Stream(trial_seed, i).normal();
    if (exact_mass) {
      const double shift = rho - s.mean();
      for (auto& v : s.values()) v += shift;
    }
    SandpileState state(std::move(s), op);
    reports[t] = stabilize(state, options);
    mean_u[t] = state.u.mean();
  });
  DensityProbeResult out;
  out.trials = trials;
  double sum_u = 0.0;
  for (std::size_t t = 0; t < reports.size(); ++t) {
    switch (reports[t].status) {
      case StabilizationStatus::Stabilized:
        ++out.stabilized;
        sum_u += mean_u[t];
        break;
      case StabilizationStatus::Exploded: ++out.exploded; break;
      case StabilizationStatus::StepLimit: ++out.step_limited; break;
    }
  }
  out.fraction_stabilized = static_cast<double>(out.stabilized) / trials;
  out.mean_odometer = out.stabilized ? sum_u / out.stabilized : 0.0;
  return out;
}

}  // namespace dsand
