#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"
#include "dsand/field_stats.hpp"
#include "dsand/growth.hpp"
#include "dsand/manifest.hpp"
#include "dsand/parallel.hpp"
#include "dsand/rng.hpp"
#include "dsand/sampling.hpp"
#include "dsand/spectral_odometer.hpp"
#include "dsand/toppling.hpp"

namespace dsand {
namespace {

namespace fs = std::filesystem;
using io::format_double;

std::string fmt(double v) { return format_double(v); }

struct Context {
  const Manifest& m;
  fs::path dir;
  RunRecord& record;

  void text(const std::string& name, const std::string& body) {
    io::write_text(dir / name, body);
    record.outputs.push_back(name);
  }
  void bytes(const std::string& name, const std::vector<std::uint8_t>& body) {
    io::write_bytes(dir / name, body);
    record.outputs.push_back(name);
  }
  void field(const std::string& stem, const LatticeField& f) {
    if (m.get_bool("write_fields", true)) bytes(stem + ".dsf1", io::encode_dsf1(f));
    if (m.get_bool("heatmap", true) && f.shape().dim() == 2) bytes(stem + ".pgm", io::heatmap_pgm(f));
  }
  void criterion(const std::string& name, bool pass, const std::string& detail) {
    record.criteria.push_back({name, pass, detail});
  }

  int dim() const { return static_cast<int>(m.get_int("dim", 2)); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(m.get_int("seed", 1)); }
  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    for (long s : m.get_ints("seeds", {static_cast<long>(seed())})) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  std::vector<int> ints(const std::string& key, const std::vector<int>& fallback) const {
    std::vector<long> def(fallback.begin(), fallback.end());
    const auto v = m.get_ints(key, def);
    return {v.begin(), v.end()};
  }
};

LongRangeOptions long_range_options(const Manifest& m) {
  LongRangeOptions lr;
  lr.tolerance = m.get_double("kernel_tolerance", lr.tolerance);
  lr.method = m.get_string("kernel_method", "ewald") == "direct" ? KernelMethod::Direct : KernelMethod::Ewald;
  lr.radius_cap = m.get_int("radius_cap", lr.radius_cap);
  return lr;
}

Operator build_operator(const Manifest& m, const TorusShape& shape) {
  if (m.get_string("operator", "nn") == "lr") {
    return Operator::long_range(shape, m.get_double("alpha", 1.0), long_range_options(m));
  }
  return Operator::nearest_neighbour(shape);
}

SigmaSpec sigma_spec(const Manifest& m) {
  SigmaSpec s;
  s.regime = parse_regime(m.get_string("sampler", "iid-gaussian"));
  s.multiplier = MultiplierSpec::parse(m.get_string("multiplier", "constant:1"));
  s.alpha = m.get_double("stable_alpha", 1.0);
  s.scale = m.get_double("stable_scale", 1.0);
  s.pareto_index = m.get_double("pareto_index", 1.5);
  s.symmetrized = m.get_bool("pareto_symmetric", true);
  validate_sigma(s);
  return s;
}

ScalingMode scaling_mode(const Manifest& m) {
  ScalingMode mode;
  if (m.has("mode")) {
    mode.kind = parse_scaling_kind(m.get_string("mode", ""));
  } else if (m.get_string("operator", "nn") == "lr") {
    mode.kind = ScalingKind::LrInd;
  } else if (m.get_string("sampler", "") == "correlated-gaussian") {
    mode.kind = ScalingKind::NnCor;
  }
  mode.delta = m.get_double("delta", mode.delta);
  mode.alpha = m.get_double("alpha", 1.0);
  return mode;
}

ExperimentOptions experiment_options(const Manifest& m) {
  ExperimentOptions o;
  if (m.has("multiplier")) o.multiplier = MultiplierSpec::parse(m.get_string("multiplier", ""));
  o.long_range = long_range_options(m);
  return o;
}

TestFunction test_function(const Manifest& m, const std::string& key, int dim) {
  if (m.has(key)) return TestFunction::parse(dim, m.get_string(key, ""));
  std::vector<int> k(static_cast<std::size_t>(dim), 0);
  k[0] = 1;
  return TestFunction::cosine(k);
}

std::vector<std::size_t> random_order(std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::Stream stream(seed, 0x0dde5ULL);
  for (std::size_t i = size; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.below(static_cast<int>(i)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void run_topple(Context& ctx) {
  const auto& m = ctx.m;
  const TorusShape shape(ctx.dim(), static_cast<int>(m.get_int("n", 16)));
  const auto op = build_operator(m, shape);
  const auto spec = sigma_spec(m);
  const bool sequential = m.get_string("order", "parallel") == "sequential";
  const auto order = sequential ? random_order(shape.size(), static_cast<std::uint64_t>(m.get_int("order_seed", 1)))
                                : std::vector<std::size_t>{};
  const double agree_tol = m.get_double("agreement_tolerance", 1e-6);
  const long snapshot_every = m.get_int("snapshot_every", 0);

  std::string csv = "seed,status,steps,total_excess,max_excess,initial_mass,final_mass,max_u,height_error,spectral_error\n";
  bool all_stable = true, agree = true, heights = true, conserved = true;
  double worst_agree = 0.0, worst_height = 0.0, worst_drift = 0.0;
  for (auto seed : ctx.seeds()) {
    const auto s0 = make_initial_config(sample_sigma(spec, shape, seed));
    SandpileState state(s0, op);
    StabilizeOptions opts;
    opts.tolerance = m.get_double("tolerance", 0.0);
    opts.max_steps = m.get_int("max_steps", opts.max_steps);
    opts.sequential_order = order;
    const auto tag = "seed" + std::to_string(seed);
    if (snapshot_every > 0 && m.get_bool("write_fields", true)) {
      opts.snapshot_every = snapshot_every;
      opts.on_snapshot = [&](const SandpileState& st) {
        ctx.bytes("u_" + tag + "_step" + std::to_string(st.steps) + ".dsf1", io::encode_dsf1(st.u));
      };
    }
    const auto report = stabilize(state, opts);
    const bool ok = report.status == StabilizationStatus::Stabilized;
    all_stable = all_stable && ok;
    double height_error = 0.0, spectral_error = NAN;
    for (double v : state.h.values()) height_error = std::max(height_error, std::abs(v));
    if (ok) {
      const auto us = odometer_spectral(s0, op);
      double diff = 0.0;
      for (std::size_t i = 0; i < us.size(); ++i) diff = std::max(diff, std::abs(us[i] - state.u[i]));
      spectral_error = diff / (1.0 + state.u.max_abs());
      worst_agree = std::max(worst_agree, spectral_error);
      agree = agree && spectral_error <= agree_tol;
      worst_height = std::max(worst_height, height_error);
      heights = heights && height_error <= 1e-8 * static_cast<double>(shape.size());
    }
    const double drift = std::abs(report.final_mass - report.initial_mass) / std::abs(report.initial_mass);
    worst_drift = std::max(worst_drift, drift);
    conserved = conserved && drift <= 1e-10;
    csv += std::to_string(seed) + "," + status_name(report.status) + "," + std::to_string(report.steps) + "," +
           fmt(report.total_excess) + "," + fmt(report.max_excess) + "," + fmt(report.initial_mass) + "," +
           fmt(report.final_mass) + "," + fmt(state.u.max()) + "," + fmt(height_error) + "," + fmt(spectral_error) +
           "\n";
    ctx.field("u_" + tag, state.u);
  }
  ctx.text("topple.csv", csv);
  ctx.criterion("stabilized", all_stable, "every run reached the excess tolerance");
  if (all_stable) {
    ctx.criterion("spectral-agreement", agree, "max |u - u_spectral| / (1 + |u|) = " + fmt(worst_agree));
    ctx.criterion("final-heights", heights, "max |s - 1| = " + fmt(worst_height));
  }
  ctx.criterion("mass-conservation", conserved, "max relative drift = " + fmt(worst_drift));
}

void run_odometer(Context& ctx) {
  const auto& m = ctx.m;
  const TorusShape shape(ctx.dim(), static_cast<int>(m.get_int("n", 16)));
  const auto op = build_operator(m, shape);
  const auto spec = sigma_spec(m);
  const double tol = m.get_double("identity_tolerance", 1e-12);
  std::string csv = "seed,mean_u,max_u,identity_error\n";
  double worst = 0.0;
  for (auto seed : ctx.seeds()) {
    const auto s = make_initial_config(sample_sigma(spec, shape, seed));
    const auto u = odometer_spectral(s, op);
    const auto v = torus_obstacle_odometer(s, op);
    double diff = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) diff = std::max(diff, std::abs(u[i] - v[i]));
    worst = std::max(worst, diff);
    csv += std::to_string(seed) + "," + fmt(u.mean()) + "," + fmt(u.max()) + "," + fmt(diff) + "\n";
    ctx.field("u_seed" + std::to_string(seed), u);
  }
  ctx.text("odometer.csv", csv);
  ctx.criterion("obstacle-identity", worst <= tol, "max |u - (v - gamma)| = " + fmt(worst));
}

void run_variance(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const auto mode = scaling_mode(m);
  const auto options = experiment_options(m);
  const auto sizes = ctx.ints("sizes", {16, 32, 64});
  const int samples = static_cast<int>(m.get_int("samples", 2000));
  std::vector<std::pair<std::string, TestFunction>> fs{{"f1", test_function(m, "test_function", dim)}};
  if (m.has("test_function_2")) fs.emplace_back("f2", test_function(m, "test_function_2", dim));

  std::string csv = "function,n,a_n,variance,variance_stderr,ratio,ratio_stderr,exact_ratio\n";
  std::string summary = "function,limit,calibration,spread\n";
  std::vector<VarianceExperiment> results;
  for (const auto& [label, f] : fs) {
    auto ex = run_variance_experiment(mode, f, sizes, dim, samples, ctx.seed(), options);
    for (const auto& r : ex.rows) {
      csv += label + "," + std::to_string(r.n) + "," + fmt(r.a_n) + "," + fmt(r.variance.estimate) + "," +
             fmt(r.variance.stderr_) + "," + fmt(r.ratio) + "," + fmt(r.ratio_stderr) + "," + fmt(r.exact_ratio) + "\n";
    }
    summary += label + "," + fmt(ex.limit) + "," + fmt(ex.calibration) + "," + fmt(ex.spread) + "\n";
    results.push_back(std::move(ex));
  }
  ctx.text("variance.csv", csv);
  ctx.text("variance_summary.csv", summary);

  const double flat = m.get_double("flat_tolerance", 0.15);
  ctx.criterion("ratio-flat", results[0].spread <= flat,
                "max/min ratio - 1 = " + fmt(results[0].spread) + " (tolerance " + fmt(flat) + ")");
  if (results.size() == 2) {
    const double agree = m.get_double("agreement_tolerance", 0.10);
    const double gap = std::abs(results[0].rows.back().ratio / results[1].rows.back().ratio - 1.0);
    ctx.criterion("ratio-agreement", gap <= agree,
                  "|r(f1) / r(f2) - 1| = " + fmt(gap) + " at n = " + std::to_string(results[0].rows.back().n));
  }
  if (mode.kind == ScalingKind::LrInd) {
    const int n = sizes.back();
    const auto op = operator_for(mode, TorusShape(dim, n), options.long_range);
    const auto fit = eigenvalue_slope(op, std::max(2, n / 8));
    const double target = std::min(2.0, mode.alpha);
    const double tol = m.get_double("eigen_slope_tolerance", 0.15);
    ctx.criterion("lr-eigenvalue-slope", std::abs(fit.slope - target) <= tol,
                  "slope = " + fmt(fit.slope) + " target " + fmt(target));
  }
}

void run_charfun(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const TorusShape shape(dim, static_cast<int>(m.get_int("n", 64)));
  const double alpha = m.get_double("stable_alpha", 1.0);
  const auto f = test_function(m, "test_function", dim);
  const int samples = static_cast<int>(m.get_int("samples", 10000));
  const auto ts = m.get_doubles("t_values", {0.1, 0.2, 0.3, 0.4, 0.5});
  const int grid = static_cast<int>(m.get_int("grid", 256));

  const auto base = run_charfun_experiment(alpha, f, shape, samples, ts, ctx.seed(), grid);
  const auto twice = run_charfun_experiment(alpha, f.scaled(2.0), shape, samples, ts, rng::derive(ctx.seed(), 2), grid);

  std::string csv = "function,t,re,im,exponent,exponent_stderr,target,finite_n\n";
  for (const auto* ex : {&base, &twice}) {
    const std::string label = ex == &base ? "f" : "2f";
    for (const auto& r : ex->rows) {
      csv += label + "," + fmt(r.t) + "," + fmt(r.empirical.real()) + "," + fmt(r.empirical.imag()) + "," +
             fmt(r.exponent) + "," + fmt(r.exponent_stderr) + "," + fmt(r.target) + "," + fmt(r.finite_n) + "\n";
    }
  }
  ctx.text("charfun.csv", csv);
  ctx.text("charfun_summary.csv", "fitted,fitted_2f,target,grid_integral\n" + fmt(base.fitted) + "," +
                                      fmt(twice.fitted) + "," + fmt(base.target) + "," + fmt(base.grid_integral) + "\n");

  const double stol = m.get_double("scaling_tolerance", 0.10);
  std::vector<double> t, e;
  double num = 0.0, den = 0.0;
  for (const auto& r : base.rows) {
    if (r.t <= 0.0) continue;
    t.push_back(r.t);
    e.push_back(r.exponent);
    const double ta = std::pow(r.t, alpha);
    num += ta * r.exponent_stderr;
    den += ta * ta;
  }
  const double fit_se = den > 0.0 ? num / den : INFINITY;
  const double slope = e.size() >= 2 ? fit_loglog(t, e).slope : NAN;
  ctx.criterion("charfun-power", std::abs(slope / alpha - 1.0) <= stol,
                "d log|log CF| / d log t = " + fmt(slope) + " vs alpha " + fmt(alpha));
  const double ratio = twice.fitted / base.fitted;
  const double expected = std::pow(2.0, alpha);
  ctx.criterion("charfun-scaling", std::abs(ratio / expected - 1.0) <= stol,
                "C(2f) / C(f) = " + fmt(ratio) + " vs 2^alpha = " + fmt(expected));
  const double mtol = m.get_double("magnitude_tolerance", 0.15);
  const double gap = std::abs(base.fitted - base.target);
  ctx.criterion("charfun-magnitude", gap <= mtol * base.target + 3.0 * fit_se,
                "C(f) = " + fmt(base.fitted) + " +- " + fmt(fit_se) + " vs target " + fmt(base.target));
}

void run_mean_odometer(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const auto mode = scaling_mode(m);
  const auto sizes = ctx.ints("sizes", dim <= 2 ? std::vector<int>{16, 32, 64, 128, 256} : std::vector<int>{16, 32, 64});
  const int samples = static_cast<int>(m.get_int("samples", 500));
  const auto curve = mean_odometer_curve(mode, dim, sizes, samples, ctx.seed(), long_range_options(m));
  std::string csv = "n,mean_u,stderr\n";
  for (const auto& r : curve.rows) {
    csv += std::to_string(r.n) + "," + fmt(r.mean_u.estimate) + "," + fmt(r.mean_u.stderr_) + "\n";
  }
  ctx.text("mean_odometer.csv", csv);
  const double expected = m.get_double("expected_slope", mean_odometer_exponent(mode, dim));
  const double tol = m.get_double("slope_tolerance", mode.kind == ScalingKind::NnInd && dim <= 2 ? 0.15 : 0.10);
  ctx.text("mean_odometer_fit.csv", "slope,intercept,order_slope,expected\n" + fmt(curve.fit.slope) + "," +
                                        fmt(curve.fit.intercept) + "," + fmt(curve.target_slope) + "," +
                                        fmt(expected) + "\n");
  ctx.criterion("mean-odometer-slope", std::abs(curve.fit.slope - expected) <= tol,
                "slope = " + fmt(curve.fit.slope) + " expected " + fmt(expected) + " +- " + fmt(tol));
}

int default_structure_n(int dim) { return dim <= 2 ? 256 : dim == 3 ? 64 : 32; }

void run_variance_structure(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const auto mode = scaling_mode(m);
  const int n = static_cast<int>(m.get_int("n", default_structure_n(dim)));
  const auto curve = variance_structure_curve(mode, dim, n, ctx.ints("radii", {2, 3, 4, 5, 6, 7, 8}),
                                              experiment_options(m));
  std::string csv = "r,value\n";
  for (std::size_t i = 0; i < curve.r.size(); ++i) csv += std::to_string(curve.r[i]) + "," + fmt(curve.value[i]) + "\n";
  ctx.text("variance_structure.csv", csv);
  const double expected = m.get_double("expected_slope", curve.target_slope);
  const double tol = m.get_double("slope_tolerance", 0.2);
  ctx.criterion("structure-exponent", std::abs(curve.fit.slope - expected) <= tol,
                "slope = " + fmt(curve.fit.slope) + " tabulated " + fmt(expected));
}

void run_kernel_decay(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const auto mode = scaling_mode(m);
  const int n = static_cast<int>(m.get_int("n", 32));
  const auto decay = covariance_decay_slope(mode, dim, n, ctx.ints("radii", {2, 3, 4, 5, 6, 7, 8}),
                                            experiment_options(m));
  std::string csv = "r,covariance\n";
  for (std::size_t i = 0; i < decay.r.size(); ++i) {
    csv += std::to_string(decay.r[i]) + "," + fmt(decay.covariance[i]) + "\n";
  }
  ctx.text("kernel_decay.csv", csv);
  if (!decay.power_law) {
    ctx.criterion("decay-slope", true, "not applicable: " + decay.note);
    return;
  }
  const double expected = m.get_double("expected_slope", decay.target_slope);
  const double tol = m.get_double("slope_tolerance", 0.3);
  ctx.criterion("decay-slope", std::isfinite(decay.fit.slope) && std::abs(decay.fit.slope - expected) <= tol,
                "slope = " + fmt(decay.fit.slope) + " expected " + fmt(expected));
}

void write_aggregate(Context& ctx, const std::string& stem, const AggregateSet& agg) {
  if (ctx.m.get_bool("write_fields", true)) ctx.text(stem + ".csv", aggregate_csv(agg));
  if (ctx.m.get_bool("heatmap", true) && agg.box.dim() == 2) ctx.bytes(stem + ".pgm", aggregate_pgm(agg));
}

void run_idla(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const long particles = m.get_int("particles", 10000);
  const int box = static_cast<int>(m.get_int("box_radius", 0));
  const double predicted = ball_radius(static_cast<double>(particles), dim);
  const auto seeds = ctx.seeds();
  std::vector<ShapeMetrics> metrics(seeds.size());
  std::vector<std::optional<AggregateSet>> first(1);
  parallel_for(seeds.size(), [&](std::size_t i) {
    auto agg = idla_aggregate(particles, dim, seeds[i], box);
    metrics[i] = shape_metrics(agg, predicted);
    if (i == 0) first[0] = std::move(agg);
  });
  std::string csv = metrics_csv_header();
  double dev = 0.0, rad = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    csv += metrics_csv_row("seed" + std::to_string(seeds[i]), metrics[i]);
    dev += metrics[i].deviation;
    rad += metrics[i].radius;
  }
  dev /= static_cast<double>(seeds.size());
  rad /= static_cast<double>(seeds.size());
  ctx.text("metrics.csv", csv);
  write_aggregate(ctx, "aggregate_seed" + std::to_string(seeds[0]), *first[0]);
  const double dmax = m.get_double("deviation_max", 0.15);
  ctx.criterion("idla-deviation", dev <= dmax, "mean deviation = " + fmt(dev));
  const double rtol = m.get_double("radius_tolerance", 0.05);
  ctx.criterion("idla-radius", std::abs(rad / predicted - 1.0) <= rtol,
                "mean radius = " + fmt(rad) + " predicted " + fmt(predicted));
}

void run_rotor(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const long particles = m.get_int("particles", 10000);
  RotorOptions options;
  for (long v : m.get_ints("rotor_cycle", {})) options.cycle.push_back(static_cast<int>(v));
  options.initial = static_cast<int>(m.get_int("rotor_initial", 0));
  const auto agg = rotor_router_aggregate(particles, dim, options, static_cast<int>(m.get_int("box_radius", 0)));
  const auto metrics = shape_metrics(agg, ball_radius(static_cast<double>(particles), dim));
  ctx.text("metrics.csv", metrics_csv_header() + metrics_csv_row("rotor", metrics));
  write_aggregate(ctx, "aggregate", agg);
  const double dmax = m.get_double("deviation_max", 0.05);
  ctx.criterion("rotor-deviation", metrics.deviation <= dmax, "deviation = " + fmt(metrics.deviation));
}

void run_point_source(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const double mass = m.get_double("mass", 10000.0);
  const auto result = point_source_sandpile(mass, dim, static_cast<int>(m.get_int("box_radius", 0)),
                                            m.get_double("tolerance", 0.0), m.get_int("max_steps", 50'000'000));
  const auto metrics = shape_metrics(result.toppled, ball_radius(mass, dim));
  ctx.text("metrics.csv", metrics_csv_header() + metrics_csv_row("point-source", metrics));
  ctx.text("point_source.csv", "steps,total_excess,toppled\n" + std::to_string(result.steps) + "," +
                                   fmt(result.total_excess) + "," + std::to_string(result.toppled.volume()) + "\n");
  // The box is stored like a torus of side 2R + 1 with the origin at its centre.
  const TorusShape shape(dim, result.box.side());
  ctx.field("odometer", LatticeField(shape, result.odometer));
  const double dmax = m.get_double("deviation_max", 0.10);
  ctx.criterion("point-source-deviation", metrics.deviation <= dmax, "deviation = " + fmt(metrics.deviation));
}

void run_obstacle_shape(Context& ctx) {
  const auto& m = ctx.m;
  const int dim = ctx.dim();
  const double mass = m.get_double("mass", 1000.0);
  const double h = m.get_double("grid_h", 1.0);
  const double predicted = ball_radius(mass, dim);
  const int half = static_cast<int>(m.get_int("grid_half", static_cast<long>(std::ceil(2.0 * predicted / h)) + 2));
  const Box box(dim, half);
  std::vector<double> source(box.size(), 0.0);
  source[box.origin()] = mass / std::pow(h, dim);
  const auto result = continuum_obstacle_solve(dim, half, h, source, m.get_int("max_steps", 5'000'000));
  AggregateSet agg{box};
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (result.noncoincidence[i]) {
      agg.occupied[i] = 1;
      agg.order.push_back(i);
    }
  }
  const auto metrics = shape_metrics(agg, predicted / h);
  ctx.text("metrics.csv", metrics_csv_header() + metrics_csv_row("obstacle", metrics));
  ctx.text("obstacle.csv", "sweeps,max_update,volume,predicted_volume\n" + std::to_string(result.sweeps) + "," +
                               fmt(result.max_update) + "," + fmt(result.volume) + "," + fmt(mass) + "\n");
  std::vector<double> odo(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) odo[i] = result.v[i] - result.gamma[i];
  ctx.field("obstacle_odometer", LatticeField(TorusShape(dim, box.side()), odo));
  const double vtol = m.get_double("volume_tolerance", 0.05);
  ctx.criterion("obstacle-volume", std::abs(result.volume / mass - 1.0) <= vtol,
                "|D| = " + fmt(result.volume) + " vs mass " + fmt(mass));
  const double dmax = m.get_double("deviation_max", 0.10);
  ctx.criterion("obstacle-deviation", metrics.deviation <= dmax, "deviation = " + fmt(metrics.deviation));
}

void run_density_probe(Context& ctx) {
  const auto& m = ctx.m;
  const TorusShape shape(ctx.dim(), static_cast<int>(m.get_int("n", 16)));
  const auto op = build_operator(m, shape);
  const int trials = static_cast<int>(m.get_int("trials", 50));
  StabilizeOptions opts;
  opts.tolerance = m.get_double("tolerance", 0.0);
  opts.max_steps = m.get_int("max_steps", opts.max_steps);
  std::string csv = "rho,trials,stabilized,exploded,step_limited,fraction_stabilized,mean_odometer\n";
  for (double rho : m.get_doubles("rho", {0.5, 1.5})) {
    const auto r = density_probe(rho, op, trials, ctx.seed(), m.get_double("fluctuation", 0.01),
                                 m.get_bool("exact_mass", false), opts);
    csv += fmt(rho) + "," + std::to_string(r.trials) + "," + std::to_string(r.stabilized) + "," +
           std::to_string(r.exploded) + "," + std::to_string(r.step_limited) + "," + fmt(r.fraction_stabilized) +
           "," + fmt(r.mean_odometer) + "\n";
    const auto detail = std::to_string(r.stabilized) + " stabilized, " + std::to_string(r.exploded) + " exploded of " +
                        std::to_string(r.trials);
    if (rho < 1.0) ctx.criterion("density-" + fmt(rho) + "-stabilizes", r.stabilized == r.trials, detail);
    if (rho > 1.0) ctx.criterion("density-" + fmt(rho) + "-explodes", r.exploded == r.trials, detail);
  }
  ctx.text("density_probe.csv", csv);
}

}  // namespace

RunRecord run_manifest(const Manifest& manifest, const std::optional<std::filesystem::path>& output_dir) {
  validate_manifest(manifest);
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.manifest_hash = manifest.hash_hex();
  record.version = artifact_version();
  record.experiment = experiment_kind_name(manifest.experiment());

  fs::path dir;
  if (output_dir) {
    dir = *output_dir;
  } else {
    dir = manifest.get_string("output_dir", "dsand_out");
    if (dir.is_relative()) dir = manifest.base_dir / dir;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  io::write_text(dir / "manifest.txt", manifest.canonical());
  record.outputs.push_back("manifest.txt");

  Context ctx{manifest, dir, record};
  switch (manifest.experiment()) {
    case ExperimentKind::Topple: run_topple(ctx); break;
    case ExperimentKind::Odometer: run_odometer(ctx); break;
    case ExperimentKind::Variance: run_variance(ctx); break;
    case ExperimentKind::Charfun: run_charfun(ctx); break;
    case ExperimentKind::MeanOdometer: run_mean_odometer(ctx); break;
    case ExperimentKind::VarianceStructure: run_variance_structure(ctx); break;
    case ExperimentKind::KernelDecay: run_kernel_decay(ctx); break;
    case ExperimentKind::Idla: run_idla(ctx); break;
    case ExperimentKind::Rotor: run_rotor(ctx); break;
    case ExperimentKind::PointSource: run_point_source(ctx); break;
    case ExperimentKind::ObstacleShape: run_obstacle_shape(ctx); break;
    case ExperimentKind::DensityProbe: run_density_probe(ctx); break;
  }
  record.outputs.push_back("run_record.txt");
  io::write_text(dir / "run_record.txt", record.to_text());
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

}  // namespace dsand
