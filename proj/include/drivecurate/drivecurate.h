/* drivecurate: C API for the driving-log view-canonicalization pipeline.
 *
 * All functions return dcur_status; DCUR_OK means success. On failure,
 * dcur_last_error() returns a thread-local human-readable message and the
 * status carries the machine-parseable category. Handles are opaque and
 * owned by the caller via the matching _destroy function; strings returned
 * through char** are owned by the caller via dcur_string_free.
 */

#ifndef DRIVECURATE_H
#define DRIVECURATE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dcur_status {
  DCUR_OK = 0,
  DCUR_ERR_INVALID_ARGUMENT = 1,
  DCUR_ERR_PARSE = 2,
  DCUR_ERR_MISSING_ASSET = 3,
  DCUR_ERR_INCONSISTENT_TRACK = 4,
  DCUR_ERR_POLE_DEGENERATE = 5,
  DCUR_ERR_COINCIDENT_CENTERS = 6,
  DCUR_ERR_NUMERICALLY_SINGULAR = 7,
  DCUR_ERR_SINGULAR_HOMOGRAPHY = 8,
  DCUR_ERR_DEGENERATE_BOX = 9,
  DCUR_ERR_EMPTY_FOREGROUND = 10,
  DCUR_ERR_SHAPE_MISMATCH = 11,
  DCUR_ERR_BATCH_TOO_SMALL = 12,
  DCUR_ERR_DIVERGED_LOSS = 13,
  DCUR_ERR_EMPTY_VALID_REGION = 14,
  DCUR_ERR_IO = 15,
  DCUR_ERR_VERSION_MISMATCH = 16,
  DCUR_ERR_NO_USABLE_FRAMES = 17,
  DCUR_ERR_INVALID_CONFIG = 18,
  DCUR_ERR_INTERNAL = 19
} dcur_status;

const char* dcur_status_name(dcur_status status);
const char* dcur_version_string(void);

/* Thread-local message describing the most recent failure on this thread. */
const char* dcur_last_error(void);

void dcur_string_free(char* s);

/* ------------------------------------------------------------------ */
/* run configuration                                                    */

typedef struct dcur_config dcur_config;

dcur_config* dcur_config_create(void); /* defaults */
void dcur_config_destroy(dcur_config* config);
dcur_status dcur_config_load_file(dcur_config* config, const char* path);
/* Dotted key, string-encoded value: e.g. ("train.steps", "500"). */
dcur_status dcur_config_set(dcur_config* config, const char* key,
                            const char* value);
dcur_status dcur_config_validate(const dcur_config* config);
dcur_status dcur_config_to_json(const dcur_config* config, char** json_out);

/* ------------------------------------------------------------------ */
/* manifest                                                             */

typedef struct dcur_manifest dcur_manifest;

dcur_status dcur_manifest_load(const char* path, dcur_manifest** out);
void dcur_manifest_destroy(dcur_manifest* manifest);
int dcur_manifest_object_count(const dcur_manifest* manifest);
int dcur_manifest_frame_count(const dcur_manifest* manifest);

/* ------------------------------------------------------------------ */
/* batch pipeline commands                                              */

dcur_status dcur_run_synth(const dcur_config* config, const char* out_dir);
dcur_status dcur_run_curate(const dcur_config* config,
                            const char* manifest_path, const char* out_dir);
dcur_status dcur_run_embed(const dcur_config* config, const char* dataset_dir,
                           const char* out_dir);
dcur_status dcur_run_train_toy(const dcur_config* config,
                               const char* dataset_dir, const char* out_dir);
/* report_out (optional) receives the rendered report table. */
dcur_status dcur_run_eval(const dcur_config* config, const char* dataset_dir,
                          const char* model_path, const char* out_dir,
                          char** report_out);
dcur_status dcur_inspect_sample(const char* dataset_dir, const char* object_id,
                                const char* frame_id, char** json_out);

/* ------------------------------------------------------------------ */
/* geometry helpers                                                     */
/* Rotations are row-major 3x3; camera poses are world-to-camera        */
/* (x_cam = R * x_world + t). The object box frame has x at the vehicle */
/* front and z up; azimuth is measured in that frame.                   */

dcur_status dcur_orbital_from_camera(const double rotation[9],
                                     const double translation[3],
                                     const double box_center[3],
                                     const double box_heading[9],
                                     double* elevation_rad, double* azimuth_rad,
                                     double* distance_m);

dcur_status dcur_orbital_to_camera(double elevation_rad, double azimuth_rad,
                                   double distance_m,
                                   const double box_center[3],
                                   const double box_heading[9],
                                   double rotation_out[9],
                                   double translation_out[3]);

/* intrinsics packed as (fx, fy, cx, cy, width, height) */
dcur_status dcur_rotational_homography(const double k_src[6],
                                       const double k_dst[6],
                                       const double rotation[9],
                                       double h_out[9]);

/* 0 = [0,30) deg, 1 = [30,60) deg, 2 = [60,180] deg */
int dcur_azimuth_bucket(double d_azimuth_rad);

/* ------------------------------------------------------------------ */
/* metrics on interleaved float images in [0,1]; valid may be NULL      */
/* (= every pixel valid), otherwise nonzero bytes mark valid pixels.    */

dcur_status dcur_psnr(const float* pred, const float* gt,
                      const unsigned char* valid, int width, int height,
                      int channels, double* out_db);
dcur_status dcur_ssim(const float* pred, const float* gt,
                      const unsigned char* valid, int width, int height,
                      int channels, double* out_score);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DRIVECURATE_H */
