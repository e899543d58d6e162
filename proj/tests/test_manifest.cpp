#include <doctest.h>

#include <filesystem>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"
#include "dsand/manifest.hpp"
#include "dsand/parallel.hpp"

using namespace dsand;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dsand_manifest_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  const auto b = io::read_bytes(p);
  return {b.begin(), b.end()};
}

int error_code(const std::string& text) {
  try {
    validate_manifest(Manifest::parse(text));
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return 0;
}

std::string error_text(const std::string& text) {
  try {
    validate_manifest(Manifest::parse(text));
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("FNV-1a test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("canonical form normalizes and round-trips") {
  const auto m = Manifest::parse(
      "# comment\n"
      "experiment = variance   # trailing\n"
      "  sizes = 16, 32,64\n"
      "samples=0200\n"
      "seeds = 1..3, 7\n"
      "delta = 0.250\n"
      "write_fields = yes\n"
      "multiplier = power:1.0\n");
  CHECK(m.get_ints("sizes", {}) == std::vector<long>{16, 32, 64});
  CHECK(m.get_ints("seeds", {}) == std::vector<long>{1, 2, 3, 7});
  CHECK(m.get_int("samples", 0) == 200);
  CHECK(m.get_bool("write_fields", false));
  CHECK(m.get_string("multiplier", "") == "power:1");
  const auto text = m.canonical();
  CHECK(text ==
        "delta = 0.25\nexperiment = variance\nmultiplier = power:1\nsamples = 200\nseeds = 1,2,3,7\n"
        "sizes = 16,32,64\nwrite_fields = true\n");
  const auto again = Manifest::parse(text);
  CHECK(again == m);
  CHECK(again.canonical() == text);
  CHECK(again.hash() == m.hash());
  CHECK(m.hash_hex().size() == 16);
  CHECK(m.get_double("alpha", 1.25) == 1.25);
}

TEST_CASE("manifest hash is a fixed function of the canonical text") {
  const auto m = Manifest::parse("experiment = topple\nn = 8\n");
  CHECK(m.hash() == fnv1a64("experiment = topple\nn = 8\n"));
  const auto reordered = Manifest::parse("n = 8\nexperiment = topple\n");
  CHECK(reordered.hash() == m.hash());
}

TEST_CASE("parse errors are descriptive") {
  CHECK_THROWS_WITH_AS(Manifest::parse("experiment = topple\nbogus = 1\n"), doctest::Contains("unknown key 'bogus'"),
                       Error);
  CHECK_THROWS_WITH_AS(Manifest::parse("experiment = topple\nn = 8\nn = 9\n"), doctest::Contains("duplicate"), Error);
  CHECK_THROWS_WITH_AS(Manifest::parse("experiment = topple\nn = eight\n"), doctest::Contains("not an integer"), Error);
  CHECK_THROWS_WITH_AS(Manifest::parse("experiment = sandcastle\n"), doctest::Contains("not one of"), Error);
  CHECK_THROWS_WITH_AS(Manifest::parse("n = 8\n"), doctest::Contains("experiment"), Error);
  CHECK_THROWS_WITH_AS(Manifest::parse("experiment = topple\nno equals sign\n"), doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(Manifest::parse("experiment = topple\nalpha = nan\n"), Error);
}

TEST_CASE("validation guards incompatible combinations") {
  CHECK(error_code("experiment = variance\nsampler = stable\n") == static_cast<int>(ErrorCode::Validation));
  CHECK(error_text("experiment = variance\nsampler = stable\n").find("charfun") != std::string::npos);
  CHECK(error_text("experiment = variance\nmode = stable\n").find("charfun") != std::string::npos);
  CHECK(error_text("experiment = variance\nmode = nn-cor\noperator = lr\n").find("nearest-neighbour") !=
        std::string::npos);
  CHECK(error_code("experiment = topple\nsampler = correlated-gaussian\noperator = lr\n") ==
        static_cast<int>(ErrorCode::Validation));
  CHECK(error_code("experiment = topple\ndim = 0\n") == static_cast<int>(ErrorCode::Validation));
  CHECK(error_code("experiment = topple\nalpha = 3\n") == static_cast<int>(ErrorCode::Validation));
  CHECK(error_code("experiment = rotor\nrotor_cycle = 0,1,2,2\n") == static_cast<int>(ErrorCode::Validation));
  CHECK(error_code("experiment = variance\ntest_function = 1,0,0:1:0\n") == static_cast<int>(ErrorCode::Validation));
  CHECK(error_code("experiment = topple\n") == 0);
  CHECK(error_code("experiment = variance\nmode = nn-cor\nsampler = correlated-gaussian\n") == 0);
}

TEST_CASE("a minimal topple run stabilizes and writes the odometer") {
  const auto dir = scratch("topple");
  const auto m = Manifest::parse("experiment = topple\ndim = 2\nn = 8\nsampler = iid-gaussian\nseed = 1\n");
  const auto rec = run_manifest(m, dir);
  CHECK(rec.exit_code() == 0);
  CHECK(fs::exists(dir / "u_seed1.dsf1"));
  CHECK(fs::exists(dir / "u_seed1.pgm"));
  CHECK(slurp(dir / "topple.csv").find("1,stabilized,") != std::string::npos);
  const auto u = io::read_dsf1(dir / "u_seed1.dsf1");
  CHECK(u.shape() == TorusShape(2, 8));
  CHECK(u.min() >= 0.0);
  const auto record = slurp(dir / "run_record.txt");
  CHECK(record.find("manifest_hash = " + m.hash_hex()) != std::string::npos);
  CHECK(record.find("CRITERION stabilized PASS") != std::string::npos);
  CHECK(record.find("wall") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("identical manifests give byte-identical outputs across thread counts") {
  const std::string text =
      "experiment = variance\ndim = 2\nsizes = 8,16\nsamples = 64\nseed = 3\n"
      "test_function_2 = 1,1:1:0\n";
  const auto a = scratch("det_a"), b = scratch("det_b");
  set_single_thread(true);
  const auto ra = run_manifest(Manifest::parse(text), a);
  set_single_thread(false);
  set_thread_count(4);
  const auto rb = run_manifest(Manifest::parse(text), b);
  set_thread_count(0);
  REQUIRE(ra.outputs == rb.outputs);
  for (const auto& name : ra.outputs) CHECK(slurp(a / name) == slurp(b / name));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a failed criterion gives exit code 2") {
  const auto dir = scratch("fail");
  const auto rec = run_manifest(Manifest::parse("experiment = rotor\nparticles = 300\ndeviation_max = 0\n"), dir);
  CHECK(rec.exit_code() == 2);
  CHECK(rec.to_text().find("CRITERION rotor-deviation FAIL") != std::string::npos);
  CHECK(rec.to_text().find("RESULT FAIL") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("relative output directories resolve against the manifest") {
  const auto dir = scratch("rel");
  fs::create_directories(dir);
  io::write_text(dir / "m.txt", "experiment = density-probe\nn = 4\ntrials = 3\noutput_dir = results\n");
  const auto m = Manifest::load(dir / "m.txt");
  const auto rec = run_manifest(m);
  CHECK(rec.exit_code() == 0);
  CHECK(fs::exists(dir / "results" / "density_probe.csv"));
  fs::remove_all(dir);
}

TEST_CASE("every experiment kind name parses back") {
  for (const char* name : {"topple", "odometer", "variance", "charfun", "mean-odometer", "variance-structure",
                           "kernel-decay", "idla", "rotor", "point-source", "obstacle-shape", "density-probe"}) {
    CHECK(experiment_kind_name(parse_experiment_kind(name)) == name);
  }
}
