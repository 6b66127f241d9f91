/*
 * Copyright (c) 2026, The fodswin authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the fodswin library. Every call returns an fsw_status; on
 * failure a message is available from fsw_last_error_message() on the same
 * thread until the next failing call. Objects are opaque handles released
 * with their matching *_free function (NULL is accepted). */

#ifndef FODSWIN_FODSWIN_H
#define FODSWIN_FODSWIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FSW_API __declspec(dllexport)
#else
#define FSW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsw_status {
  FSW_OK = 0,
  FSW_ERR_ARGUMENT = 1,
  FSW_ERR_FORMAT = 2,
  FSW_ERR_UNSUPPORTED = 3,
  FSW_ERR_IO = 4,
  FSW_ERR_NUMERICAL = 5,
  FSW_ERR_SAMPLING = 6,
  FSW_ERR_CONFIG = 7,
  FSW_ERR_EMPTY_SELECTION = 8,
  FSW_ERR_ALL_UNDEFINED = 9,
  FSW_ERR_INTERNAL = 10
} fsw_status;

FSW_API const char* fsw_version(void);
FSW_API const char* fsw_status_name(fsw_status status);
FSW_API const char* fsw_last_error_message(void);

/* ---- volumes ---------------------------------------------------------- */

typedef struct fsw_volume fsw_volume;

/* data is x fastest, channel slowest; NULL gives zeros. channels == 1 makes a
 * 3D volume. */
FSW_API fsw_status fsw_volume_create(const int dims[3], int channels, const float* data, fsw_volume** out);
FSW_API fsw_status fsw_volume_read(const char* path, fsw_volume** out);
FSW_API fsw_status fsw_volume_write(const fsw_volume* volume, const char* path);
/* dims[3] receives the channel count (1 for 3D volumes). */
FSW_API fsw_status fsw_volume_dims(const fsw_volume* volume, int dims[4]);
FSW_API const float* fsw_volume_data(const fsw_volume* volume);
FSW_API size_t fsw_volume_size(const fsw_volume* volume);
FSW_API void fsw_volume_free(fsw_volume* volume);

/* ---- datasets: degraded input, target and tissue fractions ------------ */

typedef struct fsw_dataset fsw_dataset;

typedef enum fsw_dataset_part {
  FSW_PART_INPUT = 0,
  FSW_PART_TARGET = 1,
  FSW_PART_WM = 2,
  FSW_PART_CGM = 3,
  FSW_PART_SGM = 4
} fsw_dataset_part;

typedef struct fsw_degrade_config {
  int truncate_lmax;
  double noise_sigma;
  double damping;
} fsw_degrade_config;

typedef struct fsw_phantom_config {
  int dims[3];
  uint64_t seed;
  uint64_t degrade_seed;
  double kernel_sharpness;
  double gm_amplitude;
  fsw_degrade_config degrade;
} fsw_phantom_config;

FSW_API fsw_degrade_config fsw_degrade_config_default(void);
FSW_API fsw_phantom_config fsw_phantom_config_default(void);

FSW_API fsw_status fsw_phantom_generate(const fsw_phantom_config* config, fsw_dataset** out);
/* Reads or writes input.nii, target.nii, wm.nii, cgm.nii and sgm.nii. */
FSW_API fsw_status fsw_dataset_load(const char* dir, fsw_dataset** out);
/* Reads only wm.nii, cgm.nii and sgm.nii; input and target stay empty. Enough
 * for region masks and reports. */
FSW_API fsw_status fsw_dataset_load_fractions(const char* dir, fsw_dataset** out);
FSW_API fsw_status fsw_dataset_save(const fsw_dataset* dataset, const char* dir);
/* Returns a copy of one part. */
FSW_API fsw_status fsw_dataset_part_get(const fsw_dataset* dataset, fsw_dataset_part part, fsw_volume** out);
FSW_API void fsw_dataset_free(fsw_dataset* dataset);

/* ---- model and training ----------------------------------------------- */

#define FSW_MAX_STAGES 4

typedef struct fsw_model_config {
  int patch[3];
  int channels;
  int embed_dim;
  int window[3];
  int num_stages;
  int depths[FSW_MAX_STAGES];
  int heads[FSW_MAX_STAGES];
  int shift;
  int mlp_ratio;
  int residual;
} fsw_model_config;

typedef struct fsw_train_config {
  double learning_rate;
  int batch_size;
  int max_epochs;
  int patches_per_epoch;
  int val_patches;
  double min_tissue_frac;
  uint64_t seed;
  int patience;
  int resample_each_epoch;
  int precision_bits; /* 32 or 64 */
  int augment_rotations;
  int threads;
  const char* checkpoint_path; /* best checkpoint written on improvement; NULL skips */
} fsw_train_config;

typedef struct fsw_epoch_record {
  int epoch;
  double train_mse;
  double val_mse;
  double seconds;
} fsw_epoch_record;

typedef void (*fsw_epoch_callback)(const fsw_epoch_record* record, int improved, void* user);

typedef struct fsw_checkpoint fsw_checkpoint;
typedef struct fsw_history fsw_history;

FSW_API fsw_model_config fsw_model_config_default(void);
FSW_API fsw_train_config fsw_train_config_default(void);
/* Checks the model constraints without building anything. */
FSW_API fsw_status fsw_model_config_validate(const fsw_model_config* config);
FSW_API fsw_status fsw_model_param_count(const fsw_model_config* config, size_t* out);

FSW_API fsw_status fsw_train(const fsw_dataset* const* train, size_t n_train, const fsw_dataset* const* val,
                             size_t n_val, const fsw_model_config* model, const fsw_train_config* config,
                             fsw_epoch_callback callback, void* user, fsw_checkpoint** best_out,
                             fsw_history** history_out);

FSW_API size_t fsw_history_count(const fsw_history* history);
FSW_API fsw_status fsw_history_get(const fsw_history* history, size_t index, fsw_epoch_record* out);
FSW_API int fsw_history_best_epoch(const fsw_history* history);
FSW_API double fsw_history_initial_mse(const fsw_history* history);
FSW_API fsw_status fsw_history_write_csv(const fsw_history* history, const char* path);
FSW_API void fsw_history_free(fsw_history* history);

FSW_API fsw_status fsw_checkpoint_load(const char* path, fsw_checkpoint** out);
FSW_API fsw_status fsw_checkpoint_save(const fsw_checkpoint* checkpoint, const char* path);
/* Residual model with a zeroed head: its forward pass returns the input. */
FSW_API fsw_status fsw_checkpoint_identity(const fsw_model_config* model, uint64_t seed, fsw_checkpoint** out);
FSW_API fsw_status fsw_checkpoint_model_config(const fsw_checkpoint* checkpoint, fsw_model_config* out);
/* NULL when the key is absent. Valid while the checkpoint lives. */
FSW_API const char* fsw_checkpoint_metadata(const fsw_checkpoint* checkpoint, const char* key);
FSW_API void fsw_checkpoint_free(fsw_checkpoint* checkpoint);

/* ---- inference -------------------------------------------------------- */

typedef enum fsw_blend { FSW_BLEND_UNIFORM = 0, FSW_BLEND_COSINE = 1 } fsw_blend;

typedef struct fsw_infer_options {
  double overlap;
  fsw_blend blend;
  int threads;
} fsw_infer_options;

FSW_API fsw_infer_options fsw_infer_options_default(void);
FSW_API fsw_status fsw_tile_count(const int dims[3], const int patch[3], double overlap, size_t* out);
/* mask may be NULL; otherwise a 3D volume whose non-zero voxels are predicted
 * and whose zero voxels keep the input values. */
FSW_API fsw_status fsw_super_resolve(const fsw_checkpoint* checkpoint, const fsw_volume* input,
                                     const fsw_volume* mask, const fsw_infer_options* options, fsw_volume** out,
                                     size_t* forward_passes);

/* ---- evaluation ------------------------------------------------------- */

typedef struct fsw_acc_map fsw_acc_map;
typedef struct fsw_report fsw_report;

typedef enum fsw_region { FSW_REGION_WM = 0, FSW_REGION_WM_CGM = 1, FSW_REGION_WM_SGM = 2 } fsw_region;
typedef enum fsw_axis { FSW_AXIS_X = 0, FSW_AXIS_Y = 1, FSW_AXIS_Z = 2 } fsw_axis;

typedef struct fsw_report_row {
  const char* method;
  const char* region;
  size_t n_voxels;
  size_t n_undefined;
  double min, max, mean, std, lower_quartile, upper_quartile; /* NaN when no values */
} fsw_report_row;

/* 3D mask volume with 1 inside the region. */
FSW_API fsw_status fsw_region_mask(const fsw_dataset* fractions, fsw_region region, fsw_volume** out);
/* mask may be NULL to select every voxel. */
FSW_API fsw_status fsw_acc_map_compute(const fsw_volume* a, const fsw_volume* b, const fsw_volume* mask,
                                       fsw_acc_map** out);
/* 3D float volume, NaN where the ACC is undefined or not selected. */
FSW_API fsw_status fsw_acc_map_to_volume(const fsw_acc_map* map, fsw_volume** out);
FSW_API fsw_status fsw_export_heatmap_slice(const fsw_acc_map* map, fsw_axis axis, int index, const char* stem);
FSW_API void fsw_acc_map_free(fsw_acc_map* map);

/* Rows for each (method, region) with the three standard regions. */
FSW_API fsw_status fsw_report_compute(const fsw_acc_map* const* maps, const char* const* names, size_t n,
                                      const fsw_dataset* fractions, fsw_report** out);
FSW_API size_t fsw_report_rows(const fsw_report* report);
FSW_API fsw_status fsw_report_row_get(const fsw_report* report, size_t index, fsw_report_row* out);
/* Valid while the report lives. */
FSW_API const char* fsw_report_csv(const fsw_report* report);
FSW_API const char* fsw_report_table(const fsw_report* report);
FSW_API void fsw_report_free(fsw_report* report);

/* Writes text to a file (used for CSV exports). */
FSW_API fsw_status fsw_write_text(const char* path, const char* text);

#ifdef __cplusplus
}
#endif

#endif /* FODSWIN_FODSWIN_H */
