// SPDX-License-Identifier: Apache-2.0
#include "vortexflux.h"

#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "vortexflux/error.hpp"
#include "vortexflux/io.hpp"
#include "vortexflux/version.hpp"

struct vf_config {
  vflux::ParsedConfig parsed;
  std::string resolved;
};

struct vf_trajectory {
  vflux::Trajectory traj;
  std::shared_ptr<const vflux::ExtensionResult> extension;  // null for loaded runs
  std::string started;
};

struct vf_report {
  vflux::InvariantReport report;
  std::string summary;
};

namespace {

thread_local std::string last_error;

vf_status fail(vf_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Maps library exceptions onto status codes.
template <class Fn>
vf_status guard(Fn&& fn) {
  try {
    return fn();
  } catch (const vflux::ConfigError& e) {
    return fail(VF_ERR_CONFIG, e.what());
  } catch (const vflux::DataError& e) {
    return fail(VF_ERR_DATA, e.what());
  } catch (const vflux::SolverError& e) {
    return fail(VF_ERR_SOLVER, e.what());
  } catch (const vflux::StepRefused& e) {
    return fail(VF_ERR_STEP_REFUSED, e.what());
  } catch (const vflux::PicardError& e) {
    return fail(VF_ERR_PICARD, e.what());
  } catch (const vflux::IoError& e) {
    return fail(VF_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(VF_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VF_ERR_INTERNAL, "unknown error");
  }
}

vf_status null_arg(const char* name) { return fail(VF_ERR_INVALID_ARGUMENT, std::string(name) + " is null"); }

vf_report* wrap(vflux::InvariantReport r) {
  auto* out = new vf_report{std::move(r), {}};
  out->summary = out->report.summary();
  return out;
}

}  // namespace

extern "C" {

const char* vf_version(void) { return vflux::kVersion; }

const char* vf_last_error(void) { return last_error.c_str(); }

const char* vf_status_name(vf_status status) {
  switch (status) {
    case VF_OK: return "ok";
    case VF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VF_ERR_CONFIG: return "configuration error";
    case VF_ERR_DATA: return "data error";
    case VF_ERR_SOLVER: return "solver error";
    case VF_ERR_STEP_REFUSED: return "step refused";
    case VF_ERR_PICARD: return "fixed-point iteration failed";
    case VF_ERR_IO: return "i/o error";
    case VF_ERR_RANGE: return "index out of range";
    case VF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

vf_status vf_config_load(const char* path, vf_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guard([&] {
    *out = new vf_config{vflux::parse_config(path), {}};
    return VF_OK;
  });
}

vf_status vf_config_parse(const char* text, const char* base_dir, vf_config** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guard([&] {
    *out = new vf_config{vflux::parse_config_text(text, base_dir ? base_dir : ".", "<text>"), {}};
    return VF_OK;
  });
}

vf_status vf_config_set_seed(vf_config* config, uint64_t seed) {
  if (!config) return null_arg("config");
  config->parsed.config.seed = seed;
  return VF_OK;
}

vf_status vf_config_hash(const vf_config* config, uint64_t* out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  return guard([&] {
    *out = vflux::config_hash(config->parsed);
    return VF_OK;
  });
}

vf_status vf_config_workers(const vf_config* config, size_t* out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = config->parsed.workers;
  return VF_OK;
}

vf_status vf_config_resolved(vf_config* config, const char** text) {
  if (!config) return null_arg("config");
  if (!text) return null_arg("text");
  return guard([&] {
    config->resolved = vflux::canonical_text(config->parsed);
    *text = config->resolved.c_str();
    return VF_OK;
  });
}

void vf_config_free(vf_config* config) { delete config; }

vf_status vf_run(const vf_config* config, vf_trajectory** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guard([&] {
    auto t = std::make_unique<vf_trajectory>();
    t->started = vflux::utc_now();
    t->extension = std::make_shared<const vflux::ExtensionResult>(vflux::make_extension(config->parsed.config));
    t->traj = vflux::run(config->parsed.config, *t->extension);
    *out = t.release();
    return VF_OK;
  });
}

vf_status vf_trajectory_load(const char* run_dir, vf_trajectory** out) {
  if (!run_dir) return null_arg("run_dir");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guard([&] {
    auto t = std::make_unique<vf_trajectory>();
    t->traj = vflux::load_trajectory(run_dir);
    t->started = vflux::utc_now();
    *out = t.release();
    return VF_OK;
  });
}

size_t vf_trajectory_snapshot_count(const vf_trajectory* traj) { return traj ? traj->traj.snapshots.size() : 0; }

size_t vf_trajectory_node_count(const vf_trajectory* traj) { return traj ? traj->traj.grid.size() : 0; }

vf_status vf_trajectory_snapshot(const vf_trajectory* traj, size_t index, double* t, const double** omega,
                                 const double** h) {
  if (!traj) return null_arg("traj");
  if (index >= traj->traj.snapshots.size()) return fail(VF_ERR_RANGE, "snapshot index out of range");
  const vflux::Snapshot& s = traj->traj.snapshots[index];
  if (t) *t = s.t;
  if (omega) *omega = s.omega.data();
  if (h) *h = s.h.data();
  return VF_OK;
}

void vf_trajectory_free(vf_trajectory* traj) { delete traj; }

vf_status vf_validate(const vf_config* config, const vf_trajectory* traj, vf_report** out) {
  if (!config) return null_arg("config");
  if (!traj) return null_arg("traj");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guard([&] {
    const vflux::SimConfig& cfg = config->parsed.config;
    std::shared_ptr<const vflux::ExtensionResult> ext = traj->extension;
    if (!ext) ext = std::make_shared<const vflux::ExtensionResult>(vflux::make_extension(cfg));
    *out = wrap(vflux::validate_trajectory(traj->traj, *ext, cfg));
    return VF_OK;
  });
}

vf_status vf_write_run(const vf_config* config, const vf_trajectory* traj, const vf_report* report, const char* dir) {
  if (!config) return null_arg("config");
  if (!traj) return null_arg("traj");
  if (!dir) return null_arg("dir");
  return guard([&] {
    std::map<std::string, std::string> meta;
    if (traj->extension) meta = vflux::extension_metadata(*traj->extension, config->parsed.config);
    meta["command"] = "run";
    vflux::write_run_directory(dir, config->parsed, traj->traj, report ? report->report : vflux::InvariantReport{},
                               traj->started, meta);
    return VF_OK;
  });
}

int vf_report_passed(const vf_report* report) { return report && report->report.passed() ? 1 : 0; }

size_t vf_report_size(const vf_report* report) { return report ? report->report.entries.size() : 0; }

vf_status vf_report_entry(const vf_report* report, size_t index, const char** name, vf_check_status* status,
                          double* value, double* tolerance) {
  if (!report) return null_arg("report");
  if (index >= report->report.entries.size()) return fail(VF_ERR_RANGE, "report index out of range");
  const vflux::ReportEntry& e = report->report.entries[index];
  if (name) *name = e.name.c_str();
  if (status) {
    switch (e.status) {
      case vflux::CheckStatus::Pass: *status = VF_CHECK_PASS; break;
      case vflux::CheckStatus::Fail: *status = VF_CHECK_FAIL; break;
      case vflux::CheckStatus::Info: *status = VF_CHECK_INFO; break;
    }
  }
  if (value) *value = e.value;
  if (tolerance) *tolerance = e.tolerance;
  return VF_OK;
}

vf_status vf_report_write_csv(const vf_report* report, const char* path) {
  if (!report) return null_arg("report");
  if (!path) return null_arg("path");
  return guard([&] {
    std::ofstream out(path);
    if (!out) throw vflux::IoError(std::string("cannot write ") + path);
    report->report.write_csv(out);
    return VF_OK;
  });
}

const char* vf_report_summary(const vf_report* report) { return report ? report->summary.c_str() : ""; }

void vf_report_free(vf_report* report) { delete report; }

vf_status vf_cmd_run(const vf_config* config, const char* out_dir, vf_report** report) {
  if (!config) return null_arg("config");
  if (!out_dir) return null_arg("out_dir");
  if (!report) return null_arg("report");
  *report = nullptr;
  return guard([&] {
    *report = wrap(vflux::cmd_run(config->parsed, out_dir).report);
    return VF_OK;
  });
}

vf_status vf_cmd_sweep(const vf_config* config, const char* out_dir, size_t workers, vf_report** report) {
  if (!config) return null_arg("config");
  if (!out_dir) return null_arg("out_dir");
  if (!report) return null_arg("report");
  *report = nullptr;
  return guard([&] {
    *report = wrap(vflux::cmd_sweep(config->parsed, out_dir, workers).report);
    return VF_OK;
  });
}

vf_status vf_cmd_extend(const vf_config* config, const char* out_dir, vf_report** report) {
  if (!config) return null_arg("config");
  if (!out_dir) return null_arg("out_dir");
  if (!report) return null_arg("report");
  *report = nullptr;
  return guard([&] {
    *report = wrap(vflux::cmd_extend(config->parsed, out_dir).report);
    return VF_OK;
  });
}

vf_status vf_cmd_validate(const vf_config* config, const char* run_dir, vf_report** report) {
  if (!run_dir) return null_arg("run_dir");
  if (!report) return null_arg("report");
  *report = nullptr;
  return guard([&] {
    *report = wrap(config ? vflux::cmd_validate(config->parsed, run_dir).report : vflux::cmd_validate(run_dir).report);
    return VF_OK;
  });
}

}  // extern "C"
