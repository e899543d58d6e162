// Acceptance run: one CRITERION line per criterion, nonzero exit on any
// unexpected failure. Criteria in kKnownRed are reported but do not fail the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsand/manifest.hpp"
#include "dsand/operators.hpp"
#include "dsand/parallel.hpp"
#include "dsand/rng.hpp"
#include "dsand/sampling.hpp"
#include "dsand/spectral_odometer.hpp"
#include "dsand/toppling.hpp"

using namespace dsand;
namespace fs = std::filesystem;

namespace {

const std::set<int> kKnownRed{11};

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path work_dir() { return fs::temp_directory_path() / "dsand_acceptance"; }

double max_abs_diff(const LatticeField& a, const LatticeField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

LatticeField gaussian_config(const TorusShape& shape, std::uint64_t seed) {
  return make_initial_config(sample_sigma(SigmaSpec{}, shape, seed));
}

// Heights and drift checks shared by the toppling criteria.
struct ConservationLog {
  int runs = 0;
  double worst_height = 0.0;  // max |s - 1| / n^d
  double worst_drift = 0.0;   // |final - initial| / initial
  void add(const SandpileState& st, const StabilizationReport& r) {
    ++runs;
    const auto s = st.heights();
    double h = 0.0;
    for (double v : s.values()) h = std::max(h, std::abs(v - 1.0));
    worst_height = std::max(worst_height, h / static_cast<double>(s.size()));
    worst_drift = std::max(worst_drift, std::abs(r.final_mass - r.initial_mass) / r.initial_mass);
  }
};

ConservationLog g_conservation;

Outcome toppling_equivalence() {
  const std::vector<int> dims{1, 2}, sizes{8, 16, 32};
  int count = 0, stabilized = 0;
  double worst = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) {
    const int combo = i % 12;
    const int d = dims[static_cast<std::size_t>(combo / 6)];
    const int n = sizes[static_cast<std::size_t>((combo / 2) % 3)];
    const TorusShape shape(d, n);
    const auto op = combo % 2 ? Operator::long_range(shape, 1.0) : Operator::nearest_neighbour(shape);
    const auto s = gaussian_config(shape, rng::derive(101, static_cast<std::uint64_t>(i)));
    SandpileState st(s, op);
    StabilizeOptions opts;
    opts.tolerance = 1e-10;
    const auto r = stabilize(st, opts);
    ++count;
    if (r.status == StabilizationStatus::Stabilized) ++stabilized;
    g_conservation.add(st, r);
    const auto u = odometer_spectral(s, op);
    worst = std::max(worst, max_abs_diff(st.u, u) / (1.0 + u.max_abs()));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = stabilized == count && worst <= 1e-6 && secs < 300.0;
  o.detail = std::to_string(stabilized) + "/" + std::to_string(count) + " stabilized to excess 1e-10; max relative difference " +
             fmt("%.3g", worst) + "; " + fmt("%.1f", secs) + " s";
  return o;
}

std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Stream stream(seed, 0xab);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[static_cast<std::size_t>(stream.below(static_cast<int>(i + 1)))]);
  return order;
}

Outcome abelian_invariance() {
  const TorusShape shape(2, 8);
  double worst = 0.0;
  bool all_stable = true;
  for (const auto& op : {Operator::nearest_neighbour(shape), Operator::long_range(shape, 1.0)}) {
    for (int seed = 1; seed <= 20; ++seed) {
      const auto s = gaussian_config(shape, rng::derive(202, static_cast<std::uint64_t>(seed)));
      SandpileState par(s, op);
      StabilizeOptions popts;
      popts.tolerance = 1e-10;
      const auto pr = stabilize(par, popts);
      all_stable = all_stable && pr.status == StabilizationStatus::Stabilized;
      g_conservation.add(par, pr);
      for (int k = 0; k < 3; ++k) {
        const auto order = random_order(shape.size(), rng::derive(static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(k)));
        SandpileState seq(s, op);
        StabilizeOptions sopts;
        sopts.tolerance = 1e-10;
        sopts.sequential_order = order;
        const auto sr = stabilize(seq, sopts);
        all_stable = all_stable && sr.status == StabilizationStatus::Stabilized;
        g_conservation.add(seq, sr);
        worst = std::max(worst, max_abs_diff(par.u, seq.u));
      }
    }
  }
  Outcome o;
  o.pass = all_stable && worst <= 1e-6;
  o.detail = "nn and lr, 20 seeds x 3 orders; max |u_parallel - u_sequential| = " + fmt("%.3g", worst);
  return o;
}

Outcome conservation() {
  Outcome o;
  o.pass = g_conservation.runs > 0 && g_conservation.worst_height <= 1e-8 && g_conservation.worst_drift <= 1e-10;
  o.detail = std::to_string(g_conservation.runs) + " runs; max |s - 1| / n^d = " + fmt("%.3g", g_conservation.worst_height) +
             "; max relative drift = " + fmt("%.3g", g_conservation.worst_drift);
  return o;
}

Outcome obstacle_identity() {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const TorusShape shape(i % 2 ? 2 : 1, i % 2 ? 16 : 64);
    const auto op = i % 4 < 2 ? Operator::nearest_neighbour(shape) : Operator::long_range(shape, 1.0);
    const auto s = gaussian_config(shape, rng::derive(404, static_cast<std::uint64_t>(i)));
    worst = std::max(worst, max_abs_diff(torus_obstacle_odometer(s, op), odometer_spectral(s, op)));
  }
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = "50 instances; max difference " + fmt("%.3g", worst);
  return o;
}

Outcome covariance_oracle() {
  const TorusShape shape(1, 4);
  const long samples = 200000;
  Outcome o{true, ""};
  for (const auto& op : {Operator::nearest_neighbour(shape), Operator::long_range(shape, 1.0)}) {
    const auto exact = eta_covariance_exact(op);
    const std::size_t n = shape.size();
    std::vector<std::vector<double>> draws(static_cast<std::size_t>(samples));
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
      const auto eta = eta_field(gaussian_config(shape, rng::derive(505, k)), op);
      draws[k].assign(eta.values().begin(), eta.values().end());
    });
    std::vector<double> mean(n, 0.0);
    for (const auto& e : draws) {
      for (std::size_t x = 0; x < n; ++x) mean[x] += e[x];
    }
    for (auto& m : mean) m /= static_cast<double>(samples);
    double worst_z = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& e : draws) {
          const double p = (e[x] - mean[x]) * (e[y] - mean[y]);
          s1 += p;
          s2 += p * p;
        }
        const double c = s1 / static_cast<double>(samples);
        const double var = s2 / static_cast<double>(samples) - c * c;
        const double se = std::sqrt(var / static_cast<double>(samples));
        const double target = exact.c[(y + n - x) % n];
        worst_z = std::max(worst_z, std::abs(c - target) / se);
      }
    }
    o.pass = o.pass && worst_z <= 5.0;
    o.detail += (o.detail.empty() ? "" : "; ") + std::string(op.kind() == OperatorKind::NearestNeighbour ? "nn" : "lr") +
                " max |z| = " + fmt("%.2f", worst_z);
  }
  o.detail += " over 16 entries, 2e5 samples";
  return o;
}

// Runs a shipped manifest with explicit criterion settings.
Outcome run_shipped(const std::string& name, const std::vector<std::pair<std::string, std::string>>& settings,
                    double time_limit = 0.0) {
  auto m = Manifest::load(fs::path(DSAND_MANIFEST_DIR) / (name + ".txt"));
  for (const auto& [k, v] : settings) m.set(k, v);
  const auto t0 = std::chrono::steady_clock::now();
  const auto record = run_manifest(m, work_dir() / name);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o{true, name + ":"};
  for (const auto& c : record.criteria) {
    o.pass = o.pass && c.pass;
    o.detail += " [" + c.name + (c.pass ? " PASS " : " FAIL ") + c.detail + "]";
  }
  if (time_limit > 0.0) {
    o.pass = o.pass && secs < time_limit;
    o.detail += " " + fmt("%.1f", secs) + " s";
  }
  return o;
}

Outcome combine(const std::vector<Outcome>& parts) {
  Outcome o{true, ""};
  for (const auto& p : parts) {
    o.pass = o.pass && p.pass;
    o.detail += (o.detail.empty() ? "" : " | ") + p.detail;
  }
  return o;
}

const std::vector<std::pair<std::string, std::string>> kVarianceTolerances{{"flat_tolerance", "0.15"},
                                                                         {"agreement_tolerance", "0.10"}};

Outcome variance_nn() { return run_shipped("variance_nn", kVarianceTolerances, 600.0); }
Outcome variance_cor() { return run_shipped("variance_cor", kVarianceTolerances); }

Outcome variance_lr() {
  auto s = kVarianceTolerances;
  s.emplace_back("eigen_slope_tolerance", "0.15");
  return run_shipped("variance_lr", s);
}

Outcome mean_odometer() {
  const auto t0 = std::chrono::steady_clock::now();
  auto o = combine({run_shipped("mean_odometer_d1", {{"expected_slope", "1.5"}, {"slope_tolerance", "0.15"}}),
                    run_shipped("mean_odometer_d2", {{"expected_slope", "1.0"}, {"slope_tolerance", "0.15"}}),
                    run_shipped("mean_odometer_d3", {{"expected_slope", "0.5"}, {"slope_tolerance", "0.1"}}),
                    run_shipped("mean_odometer_lr", {{"expected_slope", "0.5"}, {"slope_tolerance", "0.1"}})});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.pass = o.pass && secs < 1200.0;
  o.detail += " | total " + fmt("%.1f", secs) + " s";
  return o;
}

Outcome structure() {
  const std::vector<std::pair<std::string, std::string>> tol{{"slope_tolerance", "0.2"}};
  return combine({run_shipped("structure_d1", tol), run_shipped("structure_d2", tol), run_shipped("structure_d3", tol),
                  run_shipped("structure_lr", tol)});
}

Outcome kernel_decay() {
  const std::vector<std::pair<std::string, std::string>> tol{{"slope_tolerance", "0.3"}};
  return combine({run_shipped("decay_nn", tol), run_shipped("decay_lr", tol)});
}

Outcome stable_limit() {
  return run_shipped("charfun", {{"scaling_tolerance", "0.10"}, {"magnitude_tolerance", "0.15"}}, 900.0);
}

Outcome growth_shapes() {
  const auto t0 = std::chrono::steady_clock::now();
  auto o = combine({run_shipped("idla", {{"deviation_max", "0.15"}, {"radius_tolerance", "0.05"}}),
                    run_shipped("rotor", {{"deviation_max", "0.05"}}),
                    run_shipped("point_source", {{"deviation_max", "0.1"}})});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.pass = o.pass && secs < 900.0;
  o.detail += " | total " + fmt("%.1f", secs) + " s";
  return o;
}

Outcome dichotomy() { return run_shipped("density", {}); }

std::vector<std::pair<std::string, std::string>> read_tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files.emplace_back(fs::relative(entry.path(), root).string(),
                       std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> runs{
      {"topple", {{"snapshot_every", "50"}}},
      {"odometer", {}},
      {"variance_nn", {{"sizes", "16,32"}, {"samples", "200"}}},
      {"idla", {{"seeds", "1..4"}, {"particles", "2000"}}},
      {"density", {{"trials", "10"}}}};
  Outcome o{true, ""};
  int files = 0;
  for (const auto& [name, settings] : runs) {
    auto m = Manifest::load(fs::path(DSAND_MANIFEST_DIR) / (name + ".txt"));
    for (const auto& [k, v] : settings) m.set(k, v);
    const auto single = work_dir() / "determinism" / (name + "_single");
    const auto multi = work_dir() / "determinism" / (name + "_multi");
    fs::remove_all(single);
    fs::remove_all(multi);
    set_single_thread(true);
    run_manifest(m, single);
    set_single_thread(false);
    set_thread_count(8);
    run_manifest(m, multi);
    set_thread_count(0);
    const auto a = read_tree(single), b = read_tree(multi);
    files += static_cast<int>(a.size());
    if (a != b) {
      o.pass = false;
      o.detail += name + " differs; ";
    }
  }
  o.detail += std::to_string(files) + " files compared, 1 vs 8 threads";
  return o;
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"toppling-spectral-equivalence", toppling_equivalence},
      {"abelian-invariance", abelian_invariance},
      {"stabilization-conservation", conservation},
      {"obstacle-identity", obstacle_identity},
      {"covariance-oracle", covariance_oracle},
      {"gaussian-scaling-nn", variance_nn},
      {"gaussian-scaling-correlated", variance_cor},
      {"gaussian-scaling-long-range", variance_lr},
      {"mean-odometer-exponents", mean_odometer},
      {"variance-structure-exponents", structure},
      {"kernel-decay", kernel_decay},
      {"stable-limit", stable_limit},
      {"growth-shapes", growth_shapes},
      {"dichotomy-probe", dichotomy},
      {"thread-determinism", determinism}};

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool red = kKnownRed.count(number) > 0;
    std::printf("CRITERION %d %s %s%s %s\n", number, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                !o.pass && red ? " (known)" : "", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && !red) ++unexpected;
  }
  std::printf("%d unexpected failure(s)\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
