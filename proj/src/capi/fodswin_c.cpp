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

#include "fodswin/fodswin.h"

#include <cmath>
#include <exception>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/nifti_io.hpp"
#include "core/phantom.hpp"
#include "model/checkpoint.hpp"
#include "model/swin_unet.hpp"
#include "pipeline/evaluation.hpp"
#include "pipeline/inference.hpp"
#include "pipeline/trainer.hpp"

using namespace fodswin;

struct fsw_volume {
  Volume v;
};

struct fsw_dataset {
  train::TrainingPair pair;
};

struct fsw_checkpoint {
  swin::Checkpoint ckpt;
};

struct fsw_history {
  train::TrainHistory h;
};

struct fsw_acc_map {
  sh::AccMap map;
};

struct fsw_report {
  eval::Report report;
  std::string csv;
  std::string table;
};

namespace {

thread_local std::string g_last_error;

fsw_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Argument: return FSW_ERR_ARGUMENT;
    case ErrorKind::Format: return FSW_ERR_FORMAT;
    case ErrorKind::Unsupported: return FSW_ERR_UNSUPPORTED;
    case ErrorKind::IO: return FSW_ERR_IO;
    case ErrorKind::Numerical: return FSW_ERR_NUMERICAL;
    case ErrorKind::Sampling: return FSW_ERR_SAMPLING;
    case ErrorKind::Config: return FSW_ERR_CONFIG;
    case ErrorKind::EmptySelection: return FSW_ERR_EMPTY_SELECTION;
    case ErrorKind::AllUndefined: return FSW_ERR_ALL_UNDEFINED;
  }
  return FSW_ERR_INTERNAL;
}

fsw_status fail(fsw_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
fsw_status guarded(F&& f) {
  try {
    f();
    return FSW_OK;
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FSW_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FSW_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FSW_ERR_INTERNAL, "unknown error");
  }
}

template <typename T>
const T& need(const T* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is NULL");
  return *p;
}

const char* need(const char* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is NULL");
  return p;
}

template <typename T>
void need_out(T** out) {
  if (!out) throw ArgumentError("output pointer is NULL");
  *out = nullptr;
}

Dims3 dims3(const int d[3]) {
  if (!d) throw ArgumentError("dims is NULL");
  return {d[0], d[1], d[2]};
}

Mask mask_from(const Volume& v) {
  if (v.channels() != 1) throw ArgumentError("mask volume must be 3D");
  Mask m = Mask::filled(v.spatial(), false);
  for (std::size_t i = 0; i < v.voxels(); ++i) m.values[i] = v.data[i] != 0.0f ? 1 : 0;
  return m;
}

Volume volume_from(const Mask& m) {
  Volume v = Volume::zeros(m.dims, 1);
  for (std::size_t i = 0; i < m.size(); ++i) v.data[i] = m[i] ? 1.0f : 0.0f;
  return v;
}

swin::ModelConfig to_core(const fsw_model_config& c) {
  if (c.num_stages < 1 || c.num_stages > FSW_MAX_STAGES)
    throw ConfigError("num_stages must be in [1, " + std::to_string(FSW_MAX_STAGES) + "]");
  swin::ModelConfig m;
  m.patch_size = {c.patch[0], c.patch[1], c.patch[2]};
  m.channels = c.channels;
  m.embed_dim = c.embed_dim;
  m.window_size = {c.window[0], c.window[1], c.window[2]};
  m.depths.assign(c.depths, c.depths + c.num_stages);
  m.num_heads.assign(c.heads, c.heads + c.num_stages);
  m.shift = c.shift != 0;
  m.mlp_ratio = c.mlp_ratio;
  m.residual = c.residual != 0;
  return m;
}

fsw_model_config from_core(const swin::ModelConfig& m) {
  if (m.num_stages() > FSW_MAX_STAGES) throw UnsupportedError("model has more stages than the C API exposes");
  fsw_model_config c{};
  for (int i = 0; i < 3; ++i) {
    c.patch[i] = m.patch_size[i];
    c.window[i] = m.window_size[i];
  }
  c.channels = m.channels;
  c.embed_dim = m.embed_dim;
  c.num_stages = m.num_stages();
  for (int s = 0; s < c.num_stages; ++s) {
    c.depths[s] = m.depths[s];
    c.heads[s] = m.num_heads[s];
  }
  c.shift = m.shift ? 1 : 0;
  c.mlp_ratio = m.mlp_ratio;
  c.residual = m.residual ? 1 : 0;
  return c;
}

train::TrainConfig to_core(const fsw_train_config& c) {
  train::TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.batch_size = c.batch_size;
  t.max_epochs = c.max_epochs;
  t.patches_per_epoch = c.patches_per_epoch;
  t.val_patches = c.val_patches;
  t.min_tissue_frac = c.min_tissue_frac;
  t.seed = c.seed;
  t.patience = c.patience;
  t.resample_each_epoch = c.resample_each_epoch != 0;
  if (c.precision_bits == 32)
    t.precision = train::Precision::Float32;
  else if (c.precision_bits == 64)
    t.precision = train::Precision::Float64;
  else
    throw ArgumentError("precision_bits must be 32 or 64");
  t.augment_rotations = c.augment_rotations != 0;
  t.threads = c.threads;
  if (c.checkpoint_path) t.checkpoint_path = c.checkpoint_path;
  return t;
}

fsw_epoch_record to_c(const train::EpochRecord& r) { return {r.epoch, r.train_mse, r.val_mse, r.seconds}; }

eval::RegionRule rule_of(fsw_region r) {
  switch (r) {
    case FSW_REGION_WM: return eval::wm_rule();
    case FSW_REGION_WM_CGM: return eval::wm_cgm_rule();
    case FSW_REGION_WM_SGM: return eval::wm_sgm_rule();
  }
  throw ArgumentError("unknown region " + std::to_string(static_cast<int>(r)));
}

}  // namespace

extern "C" {

const char* fsw_version(void) { return "0.1.0"; }

const char* fsw_status_name(fsw_status s) {
  switch (s) {
    case FSW_OK: return "ok";
    case FSW_ERR_ARGUMENT: return "argument error";
    case FSW_ERR_FORMAT: return "format error";
    case FSW_ERR_UNSUPPORTED: return "unsupported";
    case FSW_ERR_IO: return "io error";
    case FSW_ERR_NUMERICAL: return "numerical error";
    case FSW_ERR_SAMPLING: return "sampling error";
    case FSW_ERR_CONFIG: return "config error";
    case FSW_ERR_EMPTY_SELECTION: return "empty selection";
    case FSW_ERR_ALL_UNDEFINED: return "all undefined";
    case FSW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fsw_last_error_message(void) { return g_last_error.c_str(); }

/* volumes */

fsw_status fsw_volume_create(const int dims[3], int channels, const float* data, fsw_volume** out) {
  return guarded([&] {
    need_out(out);
    const Dims3 d = dims3(dims);
    for (int x : d)
      if (x < 1) throw ArgumentError("volume dims must be positive");
    if (channels < 1) throw ArgumentError("channels must be positive");
    Volume v = Volume::zeros(d, channels);
    if (data) v.data.assign(data, data + v.data.size());
    *out = new fsw_volume{std::move(v)};
  });
}

fsw_status fsw_volume_read(const char* path, fsw_volume** out) {
  return guarded([&] {
    need_out(out);
    *out = new fsw_volume{nifti::read(need(path, "path"))};
  });
}

fsw_status fsw_volume_write(const fsw_volume* volume, const char* path) {
  return guarded([&] { nifti::write(need(volume, "volume").v, need(path, "path")); });
}

fsw_status fsw_volume_dims(const fsw_volume* volume, int dims[4]) {
  return guarded([&] {
    const Volume& v = need(volume, "volume").v;
    if (!dims) throw ArgumentError("dims is NULL");
    const Dims3 s = v.spatial();
    dims[0] = s[0];
    dims[1] = s[1];
    dims[2] = s[2];
    dims[3] = v.channels();
  });
}

const float* fsw_volume_data(const fsw_volume* volume) { return volume ? volume->v.data.data() : nullptr; }

size_t fsw_volume_size(const fsw_volume* volume) { return volume ? volume->v.data.size() : 0; }

void fsw_volume_free(fsw_volume* volume) { delete volume; }

/* datasets */

fsw_degrade_config fsw_degrade_config_default(void) {
  const phantom::DegradeConfig d;
  return {d.truncate_lmax, d.coeff_noise_sigma, d.amplitude_damping};
}

fsw_phantom_config fsw_phantom_config_default(void) {
  const phantom::PhantomOptions o;
  fsw_phantom_config c{};
  c.dims[0] = c.dims[1] = c.dims[2] = 48;
  c.seed = 0;
  c.degrade_seed = 1;
  c.kernel_sharpness = o.kernel_sharpness;
  c.gm_amplitude = o.gm_amplitude;
  c.degrade = fsw_degrade_config_default();
  return c;
}

fsw_status fsw_phantom_generate(const fsw_phantom_config* config, fsw_dataset** out) {
  return guarded([&] {
    need_out(out);
    const fsw_phantom_config& c = need(config, "config");
    phantom::PhantomOptions opt;
    opt.kernel_sharpness = c.kernel_sharpness;
    opt.gm_amplitude = c.gm_amplitude;
    if (!(opt.kernel_sharpness > 0.0)) throw ArgumentError("kernel sharpness must be > 0");
    if (!(opt.gm_amplitude >= 0.0)) throw ArgumentError("grey matter amplitude must be >= 0");
    const phantom::DegradeConfig dc{c.degrade.truncate_lmax, c.degrade.noise_sigma, c.degrade.damping};
    dc.validate();
    phantom::Phantom ph = phantom::gen_phantom(dims3(c.dims), c.seed, opt);
    Volume input = phantom::degrade(ph.target, dc, c.degrade_seed);
    *out = new fsw_dataset{{std::move(input), std::move(ph.target), std::move(ph.fractions)}};
  });
}

fsw_status fsw_dataset_load(const char* dir, fsw_dataset** out) {
  return guarded([&] {
    need_out(out);
    *out = new fsw_dataset{train::load_training_pair(need(dir, "dir"))};
  });
}

fsw_status fsw_dataset_load_fractions(const char* dir, fsw_dataset** out) {
  return guarded([&] {
    need_out(out);
    const std::filesystem::path d = need(dir, "dir");
    TissueFractions f{nifti::read(d / "wm.nii"), nifti::read(d / "cgm.nii"), nifti::read(d / "sgm.nii")};
    f.validate();
    *out = new fsw_dataset{{Volume{}, Volume{}, std::move(f)}};
  });
}

fsw_status fsw_dataset_save(const fsw_dataset* dataset, const char* dir) {
  return guarded([&] {
    const auto& p = need(dataset, "dataset").pair;
    const std::filesystem::path d = need(dir, "dir");
    std::error_code ec;
    std::filesystem::create_directories(d, ec);
    if (ec) throw IOError("cannot create directory " + d.string() + ": " + ec.message());
    nifti::write(p.input, d / "input.nii");
    nifti::write(p.target, d / "target.nii");
    nifti::write(p.fractions.wm, d / "wm.nii");
    nifti::write(p.fractions.cgm, d / "cgm.nii");
    nifti::write(p.fractions.sgm, d / "sgm.nii");
  });
}

fsw_status fsw_dataset_part_get(const fsw_dataset* dataset, fsw_dataset_part part, fsw_volume** out) {
  return guarded([&] {
    need_out(out);
    const auto& p = need(dataset, "dataset").pair;
    switch (part) {
      case FSW_PART_INPUT:
      case FSW_PART_TARGET: {
        const Volume& v = part == FSW_PART_INPUT ? p.input : p.target;
        if (v.data.empty()) throw ArgumentError("dataset was loaded without input and target");
        *out = new fsw_volume{v};
        return;
      }
      case FSW_PART_WM: *out = new fsw_volume{p.fractions.wm}; return;
      case FSW_PART_CGM: *out = new fsw_volume{p.fractions.cgm}; return;
      case FSW_PART_SGM: *out = new fsw_volume{p.fractions.sgm}; return;
    }
    throw ArgumentError("unknown dataset part");
  });
}

void fsw_dataset_free(fsw_dataset* dataset) { delete dataset; }

/* model and training */

fsw_model_config fsw_model_config_default(void) { return from_core(swin::desk_config()); }

fsw_train_config fsw_train_config_default(void) {
  const train::TrainConfig t;
  fsw_train_config c{};
  c.learning_rate = t.learning_rate;
  c.batch_size = t.batch_size;
  c.max_epochs = t.max_epochs;
  c.patches_per_epoch = t.patches_per_epoch;
  c.val_patches = t.val_patches;
  c.min_tissue_frac = t.min_tissue_frac;
  c.seed = t.seed;
  c.patience = t.patience;
  c.resample_each_epoch = t.resample_each_epoch ? 1 : 0;
  c.precision_bits = t.precision == train::Precision::Float64 ? 64 : 32;
  c.augment_rotations = t.augment_rotations ? 1 : 0;
  c.threads = t.threads;
  c.checkpoint_path = nullptr;
  return c;
}

fsw_status fsw_model_config_validate(const fsw_model_config* config) {
  return guarded([&] { to_core(need(config, "config")).validate(); });
}

fsw_status fsw_model_param_count(const fsw_model_config* config, size_t* out) {
  return guarded([&] {
    if (!out) throw ArgumentError("output pointer is NULL");
    *out = swin::model_layout(to_core(need(config, "config"))).total();
  });
}

fsw_status fsw_train(const fsw_dataset* const* train_sets, size_t n_train, const fsw_dataset* const* val_sets,
                     size_t n_val, const fsw_model_config* model, const fsw_train_config* config,
                     fsw_epoch_callback callback, void* user, fsw_checkpoint** best_out,
                     fsw_history** history_out) {
  return guarded([&] {
    need_out(best_out);
    if (history_out) *history_out = nullptr;
    if (n_train == 0 || !train_sets) throw ArgumentError("training needs at least one dataset");
    if (n_val == 0 || !val_sets) throw ArgumentError("training needs at least one validation dataset");
    std::vector<train::TrainingPair> tr, va;
    for (size_t i = 0; i < n_train; ++i) tr.push_back(need(train_sets[i], "training dataset").pair);
    for (size_t i = 0; i < n_val; ++i) va.push_back(need(val_sets[i], "validation dataset").pair);
    train::EpochCallback cb;
    if (callback)
      cb = [&](const train::EpochRecord& r, bool improved) {
        const fsw_epoch_record rec = to_c(r);
        callback(&rec, improved ? 1 : 0, user);
      };
    train::TrainResult res =
        train::train(tr, va, to_core(need(model, "model config")), to_core(need(config, "train config")), cb);
    *best_out = new fsw_checkpoint{std::move(res.best)};
    if (history_out) *history_out = new fsw_history{std::move(res.history)};
  });
}

size_t fsw_history_count(const fsw_history* history) { return history ? history->h.epochs.size() : 0; }

fsw_status fsw_history_get(const fsw_history* history, size_t index, fsw_epoch_record* out) {
  return guarded([&] {
    const auto& h = need(history, "history").h;
    if (!out) throw ArgumentError("output pointer is NULL");
    if (index >= h.epochs.size()) throw ArgumentError("history index out of range");
    *out = to_c(h.epochs[index]);
  });
}

int fsw_history_best_epoch(const fsw_history* history) { return history ? history->h.best_epoch : 0; }

double fsw_history_initial_mse(const fsw_history* history) {
  return history ? history->h.initial_train_mse : std::numeric_limits<double>::quiet_NaN();
}

fsw_status fsw_history_write_csv(const fsw_history* history, const char* path) {
  return guarded([&] { train::write_history_csv(need(history, "history").h, need(path, "path")); });
}

void fsw_history_free(fsw_history* history) { delete history; }

fsw_status fsw_checkpoint_load(const char* path, fsw_checkpoint** out) {
  return guarded([&] {
    need_out(out);
    *out = new fsw_checkpoint{swin::load_checkpoint(need(path, "path"))};
  });
}

fsw_status fsw_checkpoint_save(const fsw_checkpoint* checkpoint, const char* path) {
  return guarded([&] { swin::save_checkpoint(need(checkpoint, "checkpoint").ckpt, need(path, "path")); });
}

fsw_status fsw_checkpoint_identity(const fsw_model_config* model, uint64_t seed, fsw_checkpoint** out) {
  return guarded([&] {
    need_out(out);
    *out = new fsw_checkpoint{swin::identity_checkpoint(to_core(need(model, "model config")), seed)};
  });
}

fsw_status fsw_checkpoint_model_config(const fsw_checkpoint* checkpoint, fsw_model_config* out) {
  return guarded([&] {
    if (!out) throw ArgumentError("output pointer is NULL");
    *out = from_core(need(checkpoint, "checkpoint").ckpt.model);
  });
}

const char* fsw_checkpoint_metadata(const fsw_checkpoint* checkpoint, const char* key) {
  if (!checkpoint || !key) return nullptr;
  const auto it = checkpoint->ckpt.metadata.find(key);
  return it == checkpoint->ckpt.metadata.end() ? nullptr : it->second.c_str();
}

void fsw_checkpoint_free(fsw_checkpoint* checkpoint) { delete checkpoint; }

/* inference */

fsw_infer_options fsw_infer_options_default(void) {
  const infer::InferOptions o;
  return {o.overlap, o.blend == infer::Blend::Cosine ? FSW_BLEND_COSINE : FSW_BLEND_UNIFORM, o.threads};
}

fsw_status fsw_tile_count(const int dims[3], const int patch[3], double overlap, size_t* out) {
  return guarded([&] {
    if (!out) throw ArgumentError("output pointer is NULL");
    *out = infer::tile_volume(dims3(dims), dims3(patch), overlap).specs.size();
  });
}

fsw_status fsw_super_resolve(const fsw_checkpoint* checkpoint, const fsw_volume* input, const fsw_volume* mask,
                             const fsw_infer_options* options, fsw_volume** out, size_t* forward_passes) {
  return guarded([&] {
    need_out(out);
    const fsw_infer_options o = options ? *options : fsw_infer_options_default();
    infer::InferOptions io;
    io.overlap = o.overlap;
    if (o.blend == FSW_BLEND_UNIFORM)
      io.blend = infer::Blend::Uniform;
    else if (o.blend == FSW_BLEND_COSINE)
      io.blend = infer::Blend::Cosine;
    else
      throw ArgumentError("unknown blend mode");
    io.threads = o.threads;
    if (io.threads < 1) throw ArgumentError("threads must be >= 1");
    Mask m;
    if (mask) {
      m = mask_from(mask->v);
      io.mask = &m;
    }
    infer::InferResult r = infer::super_resolve(need(checkpoint, "checkpoint").ckpt, need(input, "input").v, io);
    if (forward_passes) *forward_passes = r.forward_passes;
    *out = new fsw_volume{std::move(r.output)};
  });
}

/* evaluation */

fsw_status fsw_region_mask(const fsw_dataset* fractions, fsw_region region, fsw_volume** out) {
  return guarded([&] {
    need_out(out);
    const auto& f = need(fractions, "fractions").pair.fractions;
    *out = new fsw_volume{volume_from(eval::region_mask(f, rule_of(region)))};
  });
}

fsw_status fsw_acc_map_compute(const fsw_volume* a, const fsw_volume* b, const fsw_volume* mask,
                               fsw_acc_map** out) {
  return guarded([&] {
    need_out(out);
    const Volume& va = need(a, "a").v;
    const Mask m = mask ? mask_from(mask->v) : Mask::filled(va.spatial(), true);
    *out = new fsw_acc_map{sh::acc_volume(va, need(b, "b").v, m)};
  });
}

fsw_status fsw_acc_map_to_volume(const fsw_acc_map* map, fsw_volume** out) {
  return guarded([&] {
    need_out(out);
    const auto& m = need(map, "map").map;
    Volume v = Volume::zeros(m.dims, 1);
    v.header.intent = "ACC";
    for (std::size_t i = 0; i < m.values.size(); ++i)
      v.data[i] = m.state[i] == sh::AccState::Defined ? static_cast<float>(m.values[i])
                                                      : std::numeric_limits<float>::quiet_NaN();
    *out = new fsw_volume{std::move(v)};
  });
}

fsw_status fsw_export_heatmap_slice(const fsw_acc_map* map, fsw_axis axis, int index, const char* stem) {
  return guarded([&] {
    eval::Axis ax;
    switch (axis) {
      case FSW_AXIS_X: ax = eval::Axis::X; break;
      case FSW_AXIS_Y: ax = eval::Axis::Y; break;
      case FSW_AXIS_Z: ax = eval::Axis::Z; break;
      default: throw ArgumentError("unknown axis");
    }
    eval::export_heatmap_slice(need(map, "map").map, ax, index, need(stem, "stem"));
  });
}

void fsw_acc_map_free(fsw_acc_map* map) { delete map; }

fsw_status fsw_report_compute(const fsw_acc_map* const* maps, const char* const* names, size_t n,
                              const fsw_dataset* fractions, fsw_report** out) {
  return guarded([&] {
    need_out(out);
    if (n == 0 || !maps || !names) throw ArgumentError("report needs at least one map");
    std::vector<eval::NamedAccMap> named;
    for (size_t i = 0; i < n; ++i) named.emplace_back(need(names[i], "method name"), need(maps[i], "map").map);
    auto* r = new fsw_report{};
    try {
      r->report = eval::compare_methods(named, need(fractions, "fractions").pair.fractions, eval::standard_rules());
      r->csv = eval::report_csv(r->report);
      r->table = eval::report_table(r->report);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

size_t fsw_report_rows(const fsw_report* report) { return report ? report->report.rows.size() : 0; }

fsw_status fsw_report_row_get(const fsw_report* report, size_t index, fsw_report_row* out) {
  return guarded([&] {
    const auto& rows = need(report, "report").report.rows;
    if (!out) throw ArgumentError("output pointer is NULL");
    if (index >= rows.size()) throw ArgumentError("report row out of range");
    const auto& r = rows[index];
    *out = {r.method.c_str(), r.region.c_str(), r.stats.n_voxels, r.stats.n_undefined, r.stats.min, r.stats.max,
            r.stats.mean, r.stats.std, r.stats.lower_quartile, r.stats.upper_quartile};
  });
}

const char* fsw_report_csv(const fsw_report* report) { return report ? report->csv.c_str() : nullptr; }

const char* fsw_report_table(const fsw_report* report) { return report ? report->table.c_str() : nullptr; }

void fsw_report_free(fsw_report* report) { delete report; }

fsw_status fsw_write_text(const char* path, const char* text) {
  return guarded([&] { eval::write_text(need(path, "path"), need(text, "text")); });
}

}  // extern "C"
