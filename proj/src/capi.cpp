#include "dsand/dsand.h"

#include <cstring>
#include <new>
#include <string>

#include "dsand/error.hpp"
#include "dsand/field_io.hpp"
#include "dsand/manifest.hpp"
#include "dsand/operators.hpp"
#include "dsand/parallel.hpp"
#include "dsand/sampling.hpp"
#include "dsand/spectral_odometer.hpp"
#include "dsand/toppling.hpp"

struct dsand_field {
  dsand::LatticeField value;
};

struct dsand_operator {
  dsand::Operator value;
};

struct dsand_run {
  dsand::RunRecord record;
  std::string text;
};

namespace {

thread_local std::string last_error;

template <class F>
dsand_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DSAND_OK;
  } catch (const dsand::Error& e) {
    last_error = e.what();
    return static_cast<dsand_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return DSAND_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) dsand::fail(dsand::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* dsand_version(void) { return dsand::artifact_version(); }

const char* dsand_last_error(void) { return last_error.c_str(); }

const char* dsand_status_name(dsand_status status) {
  switch (status) {
    case DSAND_OK: return "ok";
    case DSAND_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DSAND_ERR_IO: return "i/o error";
    case DSAND_ERR_FORMAT: return "format error";
    case DSAND_ERR_INVALID_SPECTRUM: return "invalid spectrum";
    case DSAND_ERR_MASS_MISMATCH: return "mass mismatch";
    case DSAND_ERR_BOX_TOO_SMALL: return "box too small";
    case DSAND_ERR_NOT_CONVERGED: return "not converged";
    case DSAND_ERR_VALIDATION: return "validation error";
    case DSAND_ERR_RADIUS_CAP: return "radius cap exceeded";
    case DSAND_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

dsand_status dsand_set_threads(int threads) {
  return guarded([&] {
    dsand::require(threads >= 0, "thread count must be nonnegative");
    dsand::set_thread_count(threads);
  });
}

void dsand_set_single_thread(int serial) { dsand::set_single_thread(serial != 0); }

int dsand_thread_count(void) { return dsand::thread_count(); }

dsand_status dsand_field_create(int dim, int n, const double* values, dsand_field** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    dsand::TorusShape shape(dim, n);
    dsand::LatticeField f(shape);
    if (values) std::memcpy(f.values().data(), values, shape.size() * sizeof(double));
    *out = new dsand_field{std::move(f)};
  });
}

dsand_status dsand_field_read(const char* path, dsand_field** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new dsand_field{dsand::io::read_dsf1(path)};
  });
}

dsand_status dsand_field_write(const dsand_field* field, const char* path) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    dsand::io::write_dsf1(field->value, path);
  });
}

dsand_status dsand_field_info(const dsand_field* field, int* dim, int* n, size_t* size) {
  return guarded([&] {
    need(field, "field");
    if (dim) *dim = field->value.shape().dim();
    if (n) *n = field->value.shape().side();
    if (size) *size = field->value.size();
  });
}

dsand_status dsand_field_values(const dsand_field* field, const double** values) {
  return guarded([&] {
    need(field, "field");
    need(values, "values");
    *values = field->value.values().data();
  });
}

dsand_status dsand_field_stats(const dsand_field* field, double* min, double* max, double* mean) {
  return guarded([&] {
    need(field, "field");
    if (min) *min = field->value.min();
    if (max) *max = field->value.max();
    if (mean) *mean = field->value.mean();
  });
}

dsand_status dsand_field_heatmap(const dsand_field* field, const char* path) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    dsand::io::write_heatmap(field->value, path);
  });
}

void dsand_field_free(dsand_field* field) { delete field; }

dsand_status dsand_operator_nn(int dim, int n, dsand_operator** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    *out = new dsand_operator{dsand::Operator::nearest_neighbour(dsand::TorusShape(dim, n))};
  });
}

dsand_status dsand_operator_lr(int dim, int n, double alpha, double tolerance, dsand_operator** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    dsand::LongRangeOptions lr;
    if (tolerance > 0.0) lr.tolerance = tolerance;
    *out = new dsand_operator{dsand::Operator::long_range(dsand::TorusShape(dim, n), alpha, lr)};
  });
}

void dsand_operator_free(dsand_operator* op) { delete op; }

dsand_status dsand_sample_config(const char* sampler, int dim, int n, uint64_t seed, dsand_field** out) {
  return guarded([&] {
    need(sampler, "sampler");
    need(out, "out");
    *out = nullptr;
    dsand::SigmaSpec spec;
    spec.regime = dsand::parse_regime(sampler);
    dsand::validate_sigma(spec);
    const auto sigma = dsand::sample_sigma(spec, dsand::TorusShape(dim, n), seed);
    *out = new dsand_field{dsand::make_initial_config(sigma)};
  });
}

dsand_status dsand_odometer_spectral(const dsand_operator* op, const dsand_field* s, dsand_field** u) {
  return guarded([&] {
    need(op, "operator");
    need(s, "field");
    need(u, "out");
    *u = nullptr;
    *u = new dsand_field{dsand::odometer_spectral(s->value, op->value)};
  });
}

dsand_status dsand_stabilize(const dsand_operator* op, const dsand_field* s, double tolerance, long max_steps,
                             dsand_field** u_out, dsand_field** s_out, dsand_stabilization* result, long* steps) {
  return guarded([&] {
    need(op, "operator");
    need(s, "field");
    if (u_out) *u_out = nullptr;
    if (s_out) *s_out = nullptr;
    dsand::SandpileState state(s->value, op->value);
    dsand::StabilizeOptions options;
    options.tolerance = tolerance;
    if (max_steps > 0) options.max_steps = max_steps;
    const auto report = dsand::stabilize(state, options);
    if (result) *result = static_cast<dsand_stabilization>(static_cast<int>(report.status));
    if (steps) *steps = report.steps;
    if (u_out) *u_out = new dsand_field{state.u};
    if (s_out) *s_out = new dsand_field{state.heights()};
  });
}

dsand_status dsand_manifest_validate(const char* path, char hash[17]) {
  return guarded([&] {
    need(path, "path");
    const auto m = dsand::Manifest::load(path);
    dsand::validate_manifest(m);
    if (hash) std::memcpy(hash, m.hash_hex().c_str(), 17);
  });
}

dsand_status dsand_manifest_run(const char* path, const char* output_dir, dsand_run** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    const auto m = dsand::Manifest::load(path);
    std::optional<std::filesystem::path> dir;
    if (output_dir) dir = output_dir;
    auto record = dsand::run_manifest(m, dir);
    auto text = record.to_text();
    *out = new dsand_run{std::move(record), std::move(text)};
  });
}

const char* dsand_run_record(const dsand_run* run) { return run ? run->text.c_str() : ""; }

int dsand_run_exit_code(const dsand_run* run) { return run ? run->record.exit_code() : 1; }

double dsand_run_wall_seconds(const dsand_run* run) { return run ? run->record.wall_seconds : 0.0; }

void dsand_run_free(dsand_run* run) { delete run; }

}  // extern "C"
