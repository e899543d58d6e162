#include "dsand/manifest.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"
#include "dsand/field_stats.hpp"
#include "dsand/sampling.hpp"
#include "dsand/test_function.hpp"

namespace dsand {
namespace {

enum class ValueType { Int, Double, Bool, String, Enum, IntList, DoubleList, Multiplier };

struct KeySpec {
  ValueType type;
  std::vector<std::string> choices;
};

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> keys = {
      {"experiment",
       {ValueType::Enum,
        {"topple", "odometer", "variance", "charfun", "mean-odometer", "variance-structure", "kernel-decay", "idla",
         "rotor", "point-source", "obstacle-shape", "density-probe"}}},
      {"dim", {ValueType::Int, {}}},
      {"n", {ValueType::Int, {}}},
      {"sizes", {ValueType::IntList, {}}},
      {"operator", {ValueType::Enum, {"nn", "lr"}}},
      {"alpha", {ValueType::Double, {}}},
      {"kernel_tolerance", {ValueType::Double, {}}},
      {"kernel_method", {ValueType::Enum, {"ewald", "direct"}}},
      {"radius_cap", {ValueType::Int, {}}},
      {"sampler", {ValueType::Enum, {"iid-gaussian", "correlated-gaussian", "stable", "pareto", "iid-uniform"}}},
      {"multiplier", {ValueType::Multiplier, {}}},
      {"stable_alpha", {ValueType::Double, {}}},
      {"stable_scale", {ValueType::Double, {}}},
      {"pareto_index", {ValueType::Double, {}}},
      {"pareto_symmetric", {ValueType::Bool, {}}},
      {"mode", {ValueType::Enum, {"nn-ind", "nn-cor", "lr-ind", "stable"}}},
      {"delta", {ValueType::Double, {}}},
      {"test_function", {ValueType::String, {}}},
      {"test_function_2", {ValueType::String, {}}},
      {"seed", {ValueType::Int, {}}},
      {"seeds", {ValueType::IntList, {}}},
      {"samples", {ValueType::Int, {}}},
      {"tolerance", {ValueType::Double, {}}},
      {"max_steps", {ValueType::Int, {}}},
      {"order", {ValueType::Enum, {"parallel", "sequential"}}},
      {"order_seed", {ValueType::Int, {}}},
      {"snapshot_every", {ValueType::Int, {}}},
      {"t_values", {ValueType::DoubleList, {}}},
      {"grid", {ValueType::Int, {}}},
      {"radii", {ValueType::IntList, {}}},
      {"particles", {ValueType::Int, {}}},
      {"mass", {ValueType::Double, {}}},
      {"box_radius", {ValueType::Int, {}}},
      {"rotor_cycle", {ValueType::IntList, {}}},
      {"rotor_initial", {ValueType::Int, {}}},
      {"grid_half", {ValueType::Int, {}}},
      {"grid_h", {ValueType::Double, {}}},
      {"rho", {ValueType::DoubleList, {}}},
      {"trials", {ValueType::Int, {}}},
      {"fluctuation", {ValueType::Double, {}}},
      {"exact_mass", {ValueType::Bool, {}}},
      {"output_dir", {ValueType::String, {}}},
      {"write_fields", {ValueType::Bool, {}}},
      {"heatmap", {ValueType::Bool, {}}},
      // criterion tolerances
      {"agreement_tolerance", {ValueType::Double, {}}},
      {"flat_tolerance", {ValueType::Double, {}}},
      {"slope_tolerance", {ValueType::Double, {}}},
      {"expected_slope", {ValueType::Double, {}}},
      {"eigen_slope_tolerance", {ValueType::Double, {}}},
      {"scaling_tolerance", {ValueType::Double, {}}},
      {"magnitude_tolerance", {ValueType::Double, {}}},
      {"deviation_max", {ValueType::Double, {}}},
      {"radius_tolerance", {ValueType::Double, {}}},
      {"volume_tolerance", {ValueType::Double, {}}},
      {"identity_tolerance", {ValueType::Double, {}}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

long to_long(const std::string& key, const std::string& text) {
  long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    fail(ErrorCode::Format, "key '" + key + "': '" + text + "' is not an integer");
  }
  return v;
}

double to_double(const std::string& key, const std::string& text) {
  if (text.empty()) fail(ErrorCode::Format, "key '" + key + "': empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(ErrorCode::Format, "key '" + key + "': '" + text + "' is not a finite number");
  }
  return v;
}

std::string normalize(const std::string& key, const KeySpec& spec, const std::string& raw) {
  switch (spec.type) {
    case ValueType::Int: return std::to_string(to_long(key, raw));
    case ValueType::Double: return io::format_double(to_double(key, raw));
    case ValueType::Bool:
      if (raw == "true" || raw == "yes" || raw == "1") return "true";
      if (raw == "false" || raw == "no" || raw == "0") return "false";
      fail(ErrorCode::Format, "key '" + key + "': '" + raw + "' is not a boolean");
    case ValueType::String:
      if (raw.empty()) fail(ErrorCode::Format, "key '" + key + "' has an empty value");
      return raw;
    case ValueType::Enum: {
      if (std::find(spec.choices.begin(), spec.choices.end(), raw) != spec.choices.end()) return raw;
      std::string allowed;
      for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
      fail(ErrorCode::Format, "key '" + key + "': '" + raw + "' is not one of " + allowed);
    }
    case ValueType::IntList: {
      std::string out;
      auto emit = [&](long v) { out += (out.empty() ? "" : ",") + std::to_string(v); };
      for (const auto& item : split(raw, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
          emit(to_long(key, item));
          continue;
        }
        const long a = to_long(key, trim(item.substr(0, dots)));
        const long b = to_long(key, trim(item.substr(dots + 2)));
        if (b < a || b - a > 100000) fail(ErrorCode::Format, "key '" + key + "': bad range '" + item + "'");
        for (long v = a; v <= b; ++v) emit(v);
      }
      if (out.empty()) fail(ErrorCode::Format, "key '" + key + "' has an empty list");
      return out;
    }
    case ValueType::DoubleList: {
      std::string out;
      for (const auto& item : split(raw, ',')) out += (out.empty() ? "" : ",") + io::format_double(to_double(key, item));
      if (out.empty()) fail(ErrorCode::Format, "key '" + key + "' has an empty list");
      return out;
    }
    case ValueType::Multiplier: return MultiplierSpec::parse(raw).to_string();
  }
  return raw;
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& text) {
  static const std::map<std::string, ExperimentKind> kinds = {
      {"topple", ExperimentKind::Topple},
      {"odometer", ExperimentKind::Odometer},
      {"variance", ExperimentKind::Variance},
      {"charfun", ExperimentKind::Charfun},
      {"mean-odometer", ExperimentKind::MeanOdometer},
      {"variance-structure", ExperimentKind::VarianceStructure},
      {"kernel-decay", ExperimentKind::KernelDecay},
      {"idla", ExperimentKind::Idla},
      {"rotor", ExperimentKind::Rotor},
      {"point-source", ExperimentKind::PointSource},
      {"obstacle-shape", ExperimentKind::ObstacleShape},
      {"density-probe", ExperimentKind::DensityProbe},
  };
  const auto it = kinds.find(text);
  if (it == kinds.end()) fail(ErrorCode::Format, "unknown experiment '" + text + "'");
  return it->second;
}

std::string experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Topple: return "topple";
    case ExperimentKind::Odometer: return "odometer";
    case ExperimentKind::Variance: return "variance";
    case ExperimentKind::Charfun: return "charfun";
    case ExperimentKind::MeanOdometer: return "mean-odometer";
    case ExperimentKind::VarianceStructure: return "variance-structure";
    case ExperimentKind::KernelDecay: return "kernel-decay";
    case ExperimentKind::Idla: return "idla";
    case ExperimentKind::Rotor: return "rotor";
    case ExperimentKind::PointSource: return "point-source";
    case ExperimentKind::ObstacleShape: return "obstacle-shape";
    case ExperimentKind::DensityProbe: return "density-probe";
  }
  return {};
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (m.entries_.count(key)) fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      m.set(key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!m.has("experiment")) fail(ErrorCode::Format, "manifest lacks the 'experiment' key");
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  auto m = parse(std::string(bytes.begin(), bytes.end()));
  m.base_dir = path.parent_path();
  return m;
}

void Manifest::set(const std::string& key, const std::string& value) {
  const auto it = schema().find(key);
  if (it == schema().end()) fail(ErrorCode::Format, "unknown key '" + key + "'");
  entries_[key] = normalize(key, it->second, trim(value));
}

std::string Manifest::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t Manifest::hash() const { return fnv1a64(canonical()); }

std::string Manifest::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

ExperimentKind Manifest::experiment() const { return parse_experiment_kind(get_string("experiment", "")); }

std::string Manifest::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

long Manifest::get_int(const std::string& key, long fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : to_long(key, it->second);
}

double Manifest::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : to_double(key, it->second);
}

bool Manifest::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second == "true";
}

std::vector<long> Manifest::get_ints(const std::string& key, const std::vector<long>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<long> out;
  for (const auto& s : split(it->second, ',')) out.push_back(to_long(key, s));
  return out;
}

std::vector<double> Manifest::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const auto& s : split(it->second, ',')) out.push_back(to_double(key, s));
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::Validation, what); }

void check_range(const Manifest& m, const std::string& key, long lo, long hi) {
  if (!m.has(key)) return;
  const long v = m.get_int(key, lo);
  if (v < lo || v > hi) {
    invalid("'" + key + "' = " + std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
            std::to_string(hi) + "]");
  }
}

void check_positive(const Manifest& m, const std::string& key) {
  if (m.has(key) && !(m.get_double(key, 1.0) > 0.0)) invalid("'" + key + "' must be positive");
}

}  // namespace

void validate_manifest(const Manifest& m) {
  const auto kind = m.experiment();
  const auto name = experiment_kind_name(kind);
  check_range(m, "dim", 1, 8);
  check_range(m, "n", 2, 1 << 20);
  for (long n : m.get_ints("sizes", {})) {
    if (n < 2) invalid("every entry of 'sizes' must be at least 2");
  }
  check_range(m, "samples", 1, 100000000);
  check_range(m, "trials", 1, 100000000);
  check_range(m, "grid", 2, 4096);
  check_range(m, "particles", 1, 100000000);
  check_range(m, "box_radius", 0, 100000);
  check_range(m, "snapshot_every", 0, 1L << 40);
  check_range(m, "max_steps", 1, 1L << 50);
  check_range(m, "grid_half", 2, 100000);
  for (const auto& k : {"alpha", "stable_scale", "pareto_index", "kernel_tolerance", "mass", "grid_h", "delta"}) {
    check_positive(m, k);
  }
  if (m.has("alpha") && m.get_double("alpha", 1.0) > 2.0) invalid("'alpha' must lie in (0, 2]");
  if (m.has("stable_alpha")) {
    const double a = m.get_double("stable_alpha", 1.0);
    if (!(a > 0.0 && a <= 2.0)) invalid("'stable_alpha' must lie in (0, 2]");
  }

  const auto op = m.get_string("operator", "nn");
  const auto sampler = m.get_string("sampler", "");
  const bool heavy = sampler == "stable" || sampler == "pareto";
  const auto mode = m.get_string("mode", "");

  if (kind == ExperimentKind::Variance) {
    if (mode == "stable" || heavy) {
      invalid("the variance experiment needs a Gaussian sampler; heavy-tailed (stable/pareto) sigma has no "
              "finite variance, use experiment = charfun");
    }
  }
  if (kind == ExperimentKind::Charfun) {
    if (!sampler.empty() && sampler != "stable") invalid("the charfun experiment samples stable sigma only");
    if (op == "lr") invalid("the charfun experiment uses the nearest-neighbour operator");
  }
  if (mode == "nn-cor" && op == "lr") {
    invalid("mode nn-cor (correlated Gaussian sigma) requires the nearest-neighbour operator");
  }
  if (mode == "lr-ind" && m.has("operator") && op != "lr") invalid("mode lr-ind requires operator = lr");
  if ((mode == "nn-ind" || mode == "nn-cor") && m.has("operator") && op != "nn") {
    invalid("mode " + mode + " requires operator = nn");
  }
  if (sampler == "correlated-gaussian" && op == "lr") {
    invalid("correlated Gaussian sigma is only supported with the nearest-neighbour operator");
  }
  if (mode == "nn-cor" && !sampler.empty() && sampler != "correlated-gaussian") {
    invalid("mode nn-cor needs sampler = correlated-gaussian");
  }
  if ((mode == "nn-ind" || mode == "lr-ind") && !sampler.empty() && sampler != "iid-gaussian") {
    invalid("mode " + mode + " needs sampler = iid-gaussian");
  }
  if (kind == ExperimentKind::MeanOdometer && (mode == "nn-cor" || mode == "stable")) {
    invalid("the mean-odometer experiment uses i.i.d. Gaussian sigma (nn-ind or lr-ind)");
  }
  if ((kind == ExperimentKind::VarianceStructure || kind == ExperimentKind::KernelDecay) && mode == "stable") {
    invalid(name + " needs a Gaussian mode");
  }

  const long dim = m.get_int("dim", 2);
  for (const auto& key : {"test_function", "test_function_2"}) {
    if (!m.has(key)) continue;
    try {
      TestFunction::parse(static_cast<int>(dim), m.get_string(key, ""));
    } catch (const Error& e) {
      invalid(std::string("'") + key + "': " + e.what());
    }
  }
  if (m.has("rotor_cycle")) {
    auto cycle = m.get_ints("rotor_cycle", {});
    std::sort(cycle.begin(), cycle.end());
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      if (cycle.size() != static_cast<std::size_t>(2 * dim) || cycle[i] != static_cast<long>(i)) {
        invalid("'rotor_cycle' must be a permutation of 0.." + std::to_string(2 * dim - 1));
      }
    }
  }
  if (kind == ExperimentKind::ObstacleShape && (dim < 2 || dim > 4)) invalid("obstacle-shape supports dim 2..4");
  if (kind == ExperimentKind::Charfun || kind == ExperimentKind::Variance) {
    if (m.has("t_values") && kind == ExperimentKind::Variance) invalid("'t_values' belongs to the charfun experiment");
  }
  if (kind == ExperimentKind::Variance || kind == ExperimentKind::MeanOdometer) {
    if (m.get_ints("sizes", {16, 32}).size() < 2) invalid(name + " needs at least two sizes");
  }
}

bool RunRecord::all_pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

std::string RunRecord::to_text() const {
  std::string out;
  out += "manifest_hash = " + manifest_hash + "\n";
  out += "version = " + version + "\n";
  out += "experiment = " + experiment + "\n";
  for (const auto& o : outputs) out += "output = " + o + "\n";
  for (const auto& c : criteria) {
    out += "CRITERION " + c.name + " " + (c.pass ? "PASS" : "FAIL");
    if (!c.detail.empty()) out += " " + c.detail;
    out += "\n";
  }
  out += std::string("RESULT ") + (all_pass() ? "PASS" : "FAIL") + "\n";
  return out;
}

const char* artifact_version() { return "1.0.0"; }

}  // namespace dsand
