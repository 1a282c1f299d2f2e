/* SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the vortexflux library. Objects are opaque handles owned by
 * the caller and released with the matching *_free function. Every function
 * returning vf_status leaves a message for vf_last_error() on failure; the
 * message is per thread and valid until the next failing call on that thread.
 */
#ifndef VORTEXFLUX_H
#define VORTEXFLUX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VF_API __declspec(dllexport)
#else
#define VF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vf_status {
  VF_OK = 0,
  VF_ERR_INVALID_ARGUMENT = 1,
  VF_ERR_CONFIG = 2,
  VF_ERR_DATA = 3,
  VF_ERR_SOLVER = 4,
  VF_ERR_STEP_REFUSED = 5,
  VF_ERR_PICARD = 6,
  VF_ERR_IO = 7,
  VF_ERR_RANGE = 8,
  VF_ERR_INTERNAL = 9
} vf_status;

typedef enum vf_check_status { VF_CHECK_PASS = 0, VF_CHECK_FAIL = 1, VF_CHECK_INFO = 2 } vf_check_status;

typedef struct vf_config vf_config;
typedef struct vf_trajectory vf_trajectory;
typedef struct vf_report vf_report;

VF_API const char* vf_version(void);
VF_API const char* vf_last_error(void);
VF_API const char* vf_status_name(vf_status status);

/* Configuration */
VF_API vf_status vf_config_load(const char* path, vf_config** out);
VF_API vf_status vf_config_parse(const char* text, const char* base_dir, vf_config** out);
VF_API vf_status vf_config_set_seed(vf_config* config, uint64_t seed);
VF_API vf_status vf_config_hash(const vf_config* config, uint64_t* out);
VF_API vf_status vf_config_workers(const vf_config* config, size_t* out);
/* Canonical text; the pointer stays valid until the next call on this config or its release. */
VF_API vf_status vf_config_resolved(vf_config* config, const char** text);
VF_API void vf_config_free(vf_config* config);

/* Simulation */
VF_API vf_status vf_run(const vf_config* config, vf_trajectory** out);
VF_API vf_status vf_trajectory_load(const char* run_dir, vf_trajectory** out);
VF_API size_t vf_trajectory_snapshot_count(const vf_trajectory* traj);
VF_API size_t vf_trajectory_node_count(const vf_trajectory* traj);
/* Borrowed pointers into the trajectory; either output may be NULL. */
VF_API vf_status vf_trajectory_snapshot(const vf_trajectory* traj, size_t index, double* t, const double** omega,
                                        const double** h);
VF_API void vf_trajectory_free(vf_trajectory* traj);

/* Checks */
VF_API vf_status vf_validate(const vf_config* config, const vf_trajectory* traj, vf_report** out);
/* Full run directory: fields, steps, diagnostics (report may be NULL), resolved config, manifest. */
VF_API vf_status vf_write_run(const vf_config* config, const vf_trajectory* traj, const vf_report* report,
                              const char* dir);
VF_API int vf_report_passed(const vf_report* report);
VF_API size_t vf_report_size(const vf_report* report);
VF_API vf_status vf_report_entry(const vf_report* report, size_t index, const char** name, vf_check_status* status,
                                 double* value, double* tolerance);
VF_API vf_status vf_report_write_csv(const vf_report* report, const char* path);
/* Pointer owned by the report. */
VF_API const char* vf_report_summary(const vf_report* report);
VF_API void vf_report_free(vf_report* report);

/* Commands; each writes its artifacts under out_dir and returns the report. */
VF_API vf_status vf_cmd_run(const vf_config* config, const char* out_dir, vf_report** report);
VF_API vf_status vf_cmd_sweep(const vf_config* config, const char* out_dir, size_t workers, vf_report** report);
VF_API vf_status vf_cmd_extend(const vf_config* config, const char* out_dir, vf_report** report);
/* config may be NULL: the resolved configuration stored in run_dir is used. */
VF_API vf_status vf_cmd_validate(const vf_config* config, const char* run_dir, vf_report** report);

#ifdef __cplusplus
}
#endif

#endif /* VORTEXFLUX_H */
