// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C interface.
#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "vortexflux.h"

namespace {

constexpr int kExitChecks = 1;
constexpr int kExitError = 2;

struct Options {
  std::string config;
  std::string out;
  std::string run_dir;
  bool strict = false;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
};

int report_error(vf_status s) {
  std::fprintf(stderr, "vortexflux: %s: %s\n", vf_status_name(s), vf_last_error());
  return kExitError;
}

// Prints the report and the failed checks; returns true when every check passed.
bool print_report(const vf_report* report) {
  std::fputs(vf_report_summary(report), stdout);
  const bool passed = vf_report_passed(report) != 0;
  if (!passed) {
    std::fputs("failed checks:", stderr);
    for (std::size_t i = 0; i < vf_report_size(report); ++i) {
      const char* name = nullptr;
      vf_check_status st = VF_CHECK_INFO;
      if (vf_report_entry(report, i, &name, &st, nullptr, nullptr) == VF_OK && st == VF_CHECK_FAIL)
        std::fprintf(stderr, " %s", name);
    }
    std::fputs("\n", stderr);
  }
  return passed;
}

int load(const Options& o, vf_config** cfg) {
  if (vf_status s = vf_config_load(o.config.c_str(), cfg); s != VF_OK) return report_error(s);
  if (o.seed) vf_config_set_seed(*cfg, *o.seed);
  return 0;
}

int finish(vf_status s, vf_report* report, bool strict, vf_config* cfg) {
  int code = 0;
  if (s != VF_OK) {
    code = report_error(s);
  } else {
    const bool passed = print_report(report);
    if (strict && !passed) code = kExitChecks;
  }
  vf_report_free(report);
  vf_config_free(cfg);
  return code;
}

int cmd_run(const Options& o) {
  vf_config* cfg = nullptr;
  if (int rc = load(o, &cfg)) return rc;
  vf_report* report = nullptr;
  const vf_status s = vf_cmd_run(cfg, o.out.c_str(), &report);
  return finish(s, report, o.strict, cfg);
}

int cmd_sweep(const Options& o) {
  vf_config* cfg = nullptr;
  if (int rc = load(o, &cfg)) return rc;
  std::size_t workers = 1;
  vf_config_workers(cfg, &workers);
  if (o.workers) workers = *o.workers;
  vf_report* report = nullptr;
  const vf_status s = vf_cmd_sweep(cfg, o.out.c_str(), workers, &report);
  return finish(s, report, o.strict, cfg);
}

int cmd_extend(const Options& o) {
  vf_config* cfg = nullptr;
  if (int rc = load(o, &cfg)) return rc;
  vf_report* report = nullptr;
  const vf_status s = vf_cmd_extend(cfg, o.out.c_str(), &report);
  return finish(s, report, o.strict, cfg);
}

int cmd_validate(const Options& o) {
  const std::string dir = !o.run_dir.empty() ? o.run_dir : o.out;
  if (dir.empty()) {
    std::fputs("vortexflux: validate needs a run directory (positional or --out)\n", stderr);
    return kExitError;
  }
  vf_config* cfg = nullptr;
  if (!o.config.empty())
    if (int rc = load(o, &cfg)) return rc;
  vf_report* report = nullptr;
  const vf_status s = vf_cmd_validate(cfg, dir.c_str(), &report);
  return finish(s, report, true, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field vortex density simulator"};
  app.set_version_flag("--version", std::string(vf_version()));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--seed", o.seed, "seed for the generated test functions");
  };

  auto* run = app.add_subcommand("run", "simulate one configuration and check the run");
  common(run, true);
  run->add_option("--out", o.out, "run directory")->required();
  run->add_flag("--strict", o.strict, "exit nonzero when a check fails");

  auto* sweep = app.add_subcommand("sweep", "epsilon family, Cauchy table and cut-off level search");
  common(sweep, true);
  sweep->add_option("--out", o.out, "sweep directory")->required();
  sweep->add_flag("--strict", o.strict, "exit nonzero when a check fails");
  sweep->add_option("--workers", o.workers, "concurrent member runs")->check(CLI::PositiveNumber);

  auto* extend = app.add_subcommand("extend", "build the extended boundary and initial data");
  common(extend, true);
  extend->add_option("--out", o.out, "output directory")->required();
  extend->add_flag("--strict", o.strict, "exit nonzero when a check fails");

  auto* validate = app.add_subcommand("validate", "re-check a stored run directory");
  common(validate, false);
  validate->add_option("run_dir", o.run_dir, "run directory");
  validate->add_option("--out", o.out, "run directory (alternative to the positional argument)");
  validate->add_flag("--strict", o.strict, "accepted for symmetry; validate always fails on a failed check");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(o);
  if (sweep->parsed()) return cmd_sweep(o);
  if (extend->parsed()) return cmd_extend(o);
  return cmd_validate(o);
}
