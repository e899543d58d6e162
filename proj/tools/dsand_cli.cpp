#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "dsand/dsand.h"

namespace {

int report(dsand_status status) {
  std::fprintf(stderr, "error (%s): %s\n", dsand_status_name(status), dsand_last_error());
  return 1;
}

int cmd_run(const std::string& path, const std::string& out) {
  dsand_run* run = nullptr;
  const auto st = dsand_manifest_run(path.c_str(), out.empty() ? nullptr : out.c_str(), &run);
  if (st != DSAND_OK) return report(st);
  std::fputs(dsand_run_record(run), stdout);
  std::printf("wall_seconds = %.3f\n", dsand_run_wall_seconds(run));
  const int code = dsand_run_exit_code(run);
  dsand_run_free(run);
  return code;
}

int cmd_validate(const std::string& path) {
  char hash[17] = {0};
  const auto st = dsand_manifest_validate(path.c_str(), hash);
  if (st != DSAND_OK) return report(st);
  std::printf("valid manifest, hash %s\n", hash);
  return 0;
}

int cmd_heatmap(const std::string& in, const std::string& out) {
  dsand_field* f = nullptr;
  auto st = dsand_field_read(in.c_str(), &f);
  if (st == DSAND_OK) st = dsand_field_heatmap(f, out.c_str());
  dsand_field_free(f);
  return st == DSAND_OK ? 0 : report(st);
}

int cmd_info(const std::string& in) {
  dsand_field* f = nullptr;
  auto st = dsand_field_read(in.c_str(), &f);
  int dim = 0, n = 0;
  size_t size = 0;
  double lo = 0, hi = 0, mean = 0;
  if (st == DSAND_OK) st = dsand_field_info(f, &dim, &n, &size);
  if (st == DSAND_OK) st = dsand_field_stats(f, &lo, &hi, &mean);
  dsand_field_free(f);
  if (st != DSAND_OK) return report(st);
  std::printf("dim = %d\nn = %d\nsites = %zu\nmin = %.17g\nmax = %.17g\nmean = %.17g\n", dim, n, size, lo, hi, mean);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divisible sandpile experiments"};
  app.require_subcommand(1);
  bool single = false;
  int threads = 0;
  app.add_flag("--single-thread", single, "Run everything on one thread");
  app.add_option("--threads", threads, "Worker threads (default: DSAND_THREADS or all cores)")->check(CLI::NonNegativeNumber);

  std::string manifest, out, field, image;
  auto* run = app.add_subcommand("run", "Run an experiment manifest");
  run->add_option("manifest", manifest, "Manifest file")->required();
  run->add_option("-o,--output", out, "Output directory (overrides output_dir)");
  auto* validate = app.add_subcommand("validate", "Parse and validate a manifest");
  validate->add_option("manifest", manifest, "Manifest file")->required();
  auto* heatmap = app.add_subcommand("heatmap", "Render a d = 2 field as PGM");
  heatmap->add_option("field", field, "DSF1 field")->required();
  heatmap->add_option("image", image, "Output PGM")->required();
  auto* info = app.add_subcommand("info", "Describe a DSF1 field");
  info->add_option("field", field, "DSF1 field")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (threads > 0) dsand_set_threads(threads);
  dsand_set_single_thread(single ? 1 : 0);

  if (*run) return cmd_run(manifest, out);
  if (*validate) return cmd_validate(manifest);
  if (*heatmap) return cmd_heatmap(field, image);
  return cmd_info(field);
}
