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

#include "pipeline/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "core/error.hpp"
#include "core/nifti_io.hpp"
#include "core/parallel.hpp"
#include "core/patching.hpp"
#include "core/rng.hpp"
#include "core/sh.hpp"
#include "model/swin_unet.hpp"

namespace fodswin::train {

namespace {

constexpr std::uint64_t kValidationStream = 0x7661'6c69'6461'7465ULL;
constexpr std::uint64_t kEpochStream = 0x6570'6f63'6800'0000ULL;
constexpr double kMinScale = 1e-8;

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, r.ptr);
}

struct PatchRef {
  std::size_t pair = 0;
  patching::PatchSpec spec;
  bool rotate = false;
  std::uint64_t rotation_seed = 0;
};

std::vector<PatchRef> sample_patches(std::span<const TrainingPair> pairs, const Dims3& size, int count,
                                     double min_frac, std::uint64_t stream, bool rotate) {
  std::vector<PatchRef> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = mix_seed(stream, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(s);
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    PatchRef ref;
    ref.pair = pick(rng);
    ref.spec = patching::sample_patch(pairs[ref.pair].fractions, size, min_frac, mix_seed(s, 1));
    ref.rotate = rotate;
    ref.rotation_seed = mix_seed(s, 2);
    out.push_back(ref);
  }
  return out;
}

template <typename T>
std::vector<T> normalized_patch(const Volume& vol, const patching::PatchSpec& spec, const std::vector<double>& shift,
                                const std::vector<double>& scale, const Eigen::MatrixXd* rotation) {
  const auto p = patching::extract(vol, spec);
  const std::size_t tokens = p.tokens();
  const int c = p.channels;
  std::vector<T> out(p.data.size());
  Eigen::VectorXd raw(c), rotated(c);
  for (std::size_t t = 0; t < tokens; ++t) {
    const std::size_t row = t * static_cast<std::size_t>(c);
    for (int k = 0; k < c; ++k) raw(k) = static_cast<double>(p.data[row + static_cast<std::size_t>(k)]);
    if (rotation)
      rotated.noalias() = *rotation * raw;
    else
      rotated = raw;
    for (int k = 0; k < c; ++k)
      out[row + static_cast<std::size_t>(k)] = static_cast<T>((rotated(k) - shift[k]) / scale[k]);
  }
  return out;
}

template <typename T>
struct PatchSet {
  std::vector<std::vector<T>> inputs;
  std::vector<std::vector<T>> targets;
};

template <typename T>
PatchSet<T> materialize(std::span<const TrainingPair> pairs, const std::vector<PatchRef>& refs,
                        const swin::Normalization& norm) {
  PatchSet<T> set;
  for (const auto& r : refs) {
    Eigen::MatrixXd rot;
    if (r.rotate) rot = sh::rotation_matrix(sh::random_rotation(r.rotation_seed), sh::lmax_for_count(static_cast<int>(norm.in_shift.size())));
    const Eigen::MatrixXd* m = r.rotate ? &rot : nullptr;
    set.inputs.push_back(normalized_patch<T>(pairs[r.pair].input, r.spec, norm.in_shift, norm.in_scale, m));
    set.targets.push_back(normalized_patch<T>(pairs[r.pair].target, r.spec, norm.out_shift, norm.out_scale, m));
  }
  return set;
}

template <typename T>
double mean_loss(const swin::SwinUNet<T>& model, const std::vector<T>& params, const PatchSet<T>& set, int threads) {
  std::vector<double> losses(set.inputs.size(), 0.0);
  parallel_for(set.inputs.size(), threads, [&](std::size_t i) {
    const auto y = model.forward(params, set.inputs[i]);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double r = static_cast<double>(y[k]) - static_cast<double>(set.targets[i][k]);
      s += r * r;
    }
    losses[i] = s / static_cast<double>(y.size());
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(losses.size());
}

void check_finite_loss(double loss, int epoch) {
  if (!std::isfinite(loss))
    throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch));
}

template <typename T>
TrainResult train_impl(std::span<const TrainingPair> train_pairs, std::span<const TrainingPair> val_pairs,
                       const swin::ModelConfig& mcfg, const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  using clock = std::chrono::steady_clock;
  const swin::SwinUNet<T> model(mcfg);
  const swin::ParamLayout& layout = model.layout();

  TrainResult result;
  swin::Checkpoint& best = result.best;
  best.model = mcfg;
  best.norm = compute_normalization(train_pairs, mcfg.residual, tcfg.augment_rotations);
  best.seed = tcfg.seed;
  best.metadata["learning_rate"] = shortest(tcfg.learning_rate);
  best.metadata["batch_size"] = std::to_string(tcfg.batch_size);
  best.metadata["max_epochs"] = std::to_string(tcfg.max_epochs);
  best.metadata["patches_per_epoch"] = std::to_string(tcfg.patches_per_epoch);
  best.metadata["val_patches"] = std::to_string(tcfg.val_patches);
  best.metadata["min_tissue_frac"] = shortest(tcfg.min_tissue_frac);
  best.metadata["patience"] = std::to_string(tcfg.patience);
  best.metadata["seed"] = std::to_string(tcfg.seed);
  best.metadata["precision"] = tcfg.precision == Precision::Float64 ? "64" : "32";
  best.metadata["augment_rotations"] = tcfg.augment_rotations ? "1" : "0";

  const auto val_refs = sample_patches(val_pairs, mcfg.patch_size, tcfg.val_patches, tcfg.min_tissue_frac,
                                       mix_seed(tcfg.seed, kValidationStream), tcfg.augment_rotations);
  const PatchSet<T> val = materialize<T>(val_pairs, val_refs, best.norm);

  std::vector<double> params = swin::init_values(layout, tcfg.seed);
  std::vector<T> params_t(params.begin(), params.end());
  AdamState adam(params.size());
  const AdamConfig acfg{tcfg.learning_rate, 0.9, 0.999, 1e-8};

  const auto epoch_refs = [&](int epoch) {
    const int e = tcfg.resample_each_epoch ? epoch : 1;
    return sample_patches(train_pairs, mcfg.patch_size, tcfg.patches_per_epoch, tcfg.min_tissue_frac,
                          mix_seed(mix_seed(tcfg.seed, kEpochStream), static_cast<std::uint64_t>(e)),
                          tcfg.augment_rotations);
  };

  PatchSet<T> train_set = materialize<T>(train_pairs, epoch_refs(1), best.norm);
  result.history.initial_train_mse = mean_loss(model, params_t, train_set, tcfg.threads);
  check_finite_loss(result.history.initial_train_mse, 0);

  const std::size_t n_params = params.size();
  const std::size_t batch = static_cast<std::size_t>(tcfg.batch_size);
  std::vector<std::vector<T>> elem_grads(batch, std::vector<T>(n_params));
  std::vector<double> elem_loss(batch, 0.0);
  std::vector<double> grads(n_params);

  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    if (epoch > 1 && tcfg.resample_each_epoch) train_set = materialize<T>(train_pairs, epoch_refs(epoch), best.norm);

    double loss_sum = 0.0;
    int steps = 0;
    const std::size_t n = train_set.inputs.size();
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t nb = std::min(batch, n - start);
      parallel_for(nb, tcfg.threads, [&](std::size_t b) {
        std::fill(elem_grads[b].begin(), elem_grads[b].end(), T(0));
        elem_loss[b] = static_cast<double>(
            model.loss_and_grads(params_t, train_set.inputs[start + b], train_set.targets[start + b], elem_grads[b]));
      });
      std::fill(grads.begin(), grads.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        batch_loss += elem_loss[b];
        for (std::size_t i = 0; i < n_params; ++i) grads[i] += static_cast<double>(elem_grads[b][i]);
      }
      batch_loss /= static_cast<double>(nb);
      check_finite_loss(batch_loss, epoch);
      const double inv = 1.0 / static_cast<double>(nb);
      for (double& g : grads) g *= inv;
      adam_step(params, grads, adam, acfg, &layout);
      for (std::size_t i = 0; i < n_params; ++i) params_t[i] = static_cast<T>(params[i]);
      loss_sum += batch_loss;
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = loss_sum / static_cast<double>(steps);
    rec.val_mse = mean_loss(model, params_t, val, tcfg.threads);
    check_finite_loss(rec.val_mse, epoch);
    const bool improved = rec.val_mse < best_val;
    if (improved) {
      best_val = rec.val_mse;
      result.history.best_epoch = epoch;
      result.history.best_val_mse = rec.val_mse;
      best.params = params;
      best.epoch = static_cast<std::uint32_t>(epoch);
      best.metadata["best_val_mse"] = shortest(rec.val_mse);
      if (!tcfg.checkpoint_path.empty()) swin::save_checkpoint(best, tcfg.checkpoint_path);
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, improved);
    if (epoch - result.history.best_epoch >= tcfg.patience) break;
  }
  return result;
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg,
               const swin::ParamLayout* layout) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ArgumentError("adam_step: parameter, gradient and state sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (std::isfinite(grads[i])) continue;
    std::string where = "index " + std::to_string(i);
    if (layout) {
      for (const auto& e : layout->entries())
        if (i >= e.offset && i < e.offset + e.size) where = "tensor '" + e.name + "' element " + std::to_string(i - e.offset);
    }
    throw NumericalError("non-finite gradient (" + std::to_string(grads[i]) + ") at " + where + ", step " +
                         std::to_string(state.t + 1));
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

void TrainingPair::validate() const {
  fractions.validate();
  if (input.header.dims.size() != 4 || target.header.dims.size() != 4)
    throw ArgumentError("training input and target must be 4D coefficient volumes");
  if (input.header.dims != target.header.dims)
    throw ArgumentError("training input " + to_string(input.spatial()) + " and target " +
                        to_string(target.spatial()) + " differ in shape");
  if (input.spatial() != fractions.spatial())
    throw ArgumentError("tissue fractions do not match the coefficient volume grid");
}

TrainingPair load_training_pair(const std::filesystem::path& dir) {
  TrainingPair p;
  p.input = nifti::read(dir / "input.nii");
  p.target = nifti::read(dir / "target.nii");
  p.fractions.wm = nifti::read(dir / "wm.nii");
  p.fractions.cgm = nifti::read(dir / "cgm.nii");
  p.fractions.sgm = nifti::read(dir / "sgm.nii");
  p.validate();
  return p;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning rate must be > 0");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (max_epochs < 1) throw ArgumentError("max epochs must be >= 1");
  if (patches_per_epoch < 1) throw ArgumentError("patches per epoch must be >= 1");
  if (val_patches < 1) throw ArgumentError("validation patches must be >= 1");
  if (!(min_tissue_frac >= 0.0 && min_tissue_frac <= 1.0)) throw ArgumentError("min tissue fraction must be in [0,1]");
  if (patience < 1) throw ArgumentError("patience must be >= 1");
  if (threads < 1) throw ArgumentError("threads must be >= 1");
}

std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,train_mse,val_mse,seconds\n";
  char line[160];
  for (const auto& r : h.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.3f\n", r.epoch, r.train_mse, r.val_mse, r.seconds);
    out += line;
  }
  return out;
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open '" + path.string() + "' for writing");
  out << history_csv(h);
  if (!out) throw IOError("failed writing '" + path.string() + "'");
}

swin::Normalization compute_normalization(std::span<const TrainingPair> pairs, bool residual,
                                          bool rotation_invariant) {
  if (pairs.empty()) throw ArgumentError("no training pairs");
  const int c = pairs[0].input.channels();
  auto stats = [&](bool targets, std::vector<double>& shift, std::vector<double>& scale) {
    shift.assign(static_cast<std::size_t>(c), 0.0);
    scale.assign(static_cast<std::size_t>(c), 1.0);
    std::vector<double> mean_sq(static_cast<std::size_t>(c), 0.0);
    for (int k = 0; k < c; ++k) {
      double sum = 0.0, sum2 = 0.0;
      std::size_t n = 0;
      for (const auto& p : pairs) {
        const Volume& v = targets ? p.target : p.input;
        if (v.channels() != c) throw ArgumentError("training volumes differ in channel count");
        for (std::size_t i = 0; i < v.voxels(); ++i) {
          if (p.fractions.total(i) <= patching::kTissueVoxelThreshold) continue;
          const double x = v.at(i, k);
          sum += x;
          sum2 += x * x;
          ++n;
        }
      }
      if (n == 0) continue;
      const double mean = sum / static_cast<double>(n);
      const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
      const double sd = std::sqrt(var);
      shift[k] = mean;
      scale[k] = sd < kMinScale ? 1.0 : sd;
      mean_sq[k] = sum2 / static_cast<double>(n);
    }
    if (!rotation_invariant) return;
    // Pool each degree l >= 2 into one RMS scale with zero shift.
    for (int l = 2; l <= sh::lmax_for_count(c); l += 2) {
      const int lo = sh::num_coeffs(l - 2), hi = sh::num_coeffs(l);
      double ms = 0.0;
      for (int k = lo; k < hi; ++k) ms += mean_sq[k];
      const double rms = std::sqrt(ms / (hi - lo));
      for (int k = lo; k < hi; ++k) {
        shift[k] = 0.0;
        scale[k] = rms < kMinScale ? 1.0 : rms;
      }
    }
  };
  swin::Normalization norm;
  stats(true, norm.out_shift, norm.out_scale);
  if (residual) {
    // One affine map on both sides keeps the skip an identity; target
    // statistics give the degrees missing from the input a real scale.
    norm.in_shift = norm.out_shift;
    norm.in_scale = norm.out_scale;
  } else {
    stats(false, norm.in_shift, norm.in_scale);
  }
  return norm;
}

TrainResult train(std::span<const TrainingPair> train_pairs, std::span<const TrainingPair> val_pairs,
                  const swin::ModelConfig& mcfg, const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  mcfg.validate();
  if (train_pairs.empty()) throw ArgumentError("training needs at least one pair");
  if (val_pairs.empty()) throw ArgumentError("training needs at least one validation pair");
  for (const auto& p : train_pairs) p.validate();
  for (const auto& p : val_pairs) p.validate();
  for (const auto* set : {&train_pairs, &val_pairs})
    for (const auto& p : *set)
      if (p.input.channels() != mcfg.channels)
        throw ArgumentError("volumes have " + std::to_string(p.input.channels()) + " channels, model expects " +
                            std::to_string(mcfg.channels));
  if (tcfg.precision == Precision::Float64) return train_impl<double>(train_pairs, val_pairs, mcfg, tcfg, on_epoch);
  return train_impl<float>(train_pairs, val_pairs, mcfg, tcfg, on_epoch);
}

}  // namespace fodswin::train
