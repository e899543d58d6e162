#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dsand {

enum class ExperimentKind {
  Topple,
  Odometer,
  Variance,
  Charfun,
  MeanOdometer,
  VarianceStructure,
  KernelDecay,
  Idla,
  Rotor,
  PointSource,
  ObstacleShape,
  DensityProbe,
};

ExperimentKind parse_experiment_kind(const std::string& text);
std::string experiment_kind_name(ExperimentKind kind);

/// Flat "key = value" document; '#' starts a comment. Values are validated
/// against a fixed schema and stored in normalized text form, so equal
/// manifests serialize to identical canonical text.
class Manifest {
 public:
  static Manifest parse(const std::string& text);
  static Manifest load(const std::filesystem::path& path);

  /// Sorted "key = value" lines of the explicitly given keys.
  std::string canonical() const;
  /// FNV-1a 64 of the canonical text.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  ExperimentKind experiment() const;
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long> get_ints(const std::string& key, const std::vector<long>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  /// Directory that relative output paths resolve against.
  std::filesystem::path base_dir;

  bool operator==(const Manifest& other) const { return entries_ == other.entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Cross-field checks (operator/sampler compatibility, required keys).
/// Throws Error(Validation) with a descriptive message.
void validate_manifest(const Manifest& manifest);

std::uint64_t fnv1a64(const std::string& bytes);

struct CriterionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunRecord {
  std::string manifest_hash;
  std::string version;
  std::string experiment;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::vector<CriterionResult> criteria;

  bool all_pass() const;
  /// 0 when every criterion passes, 2 otherwise.
  int exit_code() const { return all_pass() ? 0 : 2; }
  /// Record text without the wall time, so reruns are byte-identical.
  std::string to_text() const;
};

const char* artifact_version();

/// Runs the experiment and writes its outputs plus run_record.txt into the
/// output directory (manifest key output_dir, or the override).
RunRecord run_manifest(const Manifest& manifest, const std::optional<std::filesystem::path>& output_dir = {});

}  // namespace dsand
