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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/volume.hpp"
#include "model/checkpoint.hpp"
#include "model/params.hpp"

namespace fodswin::train {

struct AdamConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;  // completed steps

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update; increments state.t first. A non-finite
/// gradient raises NumericalError naming the offending tensor when a layout
/// is supplied. Parameters are left untouched in that case.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg,
               const swin::ParamLayout* layout = nullptr);

/// One co-registered training example.
struct TrainingPair {
  Volume input;   // degraded coefficients [X,Y,Z,C]
  Volume target;  // reference coefficients [X,Y,Z,C]
  TissueFractions fractions;

  void validate() const;
};

/// Reads input.nii, target.nii, wm.nii, cgm.nii and sgm.nii from dir.
TrainingPair load_training_pair(const std::filesystem::path& dir);

enum class Precision { Float32, Float64 };

struct TrainConfig {
  double learning_rate = 0.0005;
  int batch_size = 2;
  int max_epochs = 80;
  int patches_per_epoch = 32;
  int val_patches = 8;
  double min_tissue_frac = 0.2;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a validation improvement.
  int patience = 15;
  /// When false the patches of epoch 1 are reused every epoch.
  bool resample_each_epoch = true;
  Precision precision = Precision::Float32;
  /// Rotate the coefficients of each training and validation patch (input and
  /// target alike) by a random rotation. Normalization becomes rotation
  /// invariant: DC shift only, one scale per degree.
  bool augment_rotations = false;
  int threads = 1;
  /// Best checkpoint is written here on every improvement (skipped if empty).
  std::filesystem::path checkpoint_path;

  /// Throws ArgumentError for out-of-range values.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;  // mean minibatch loss over the epoch (normalized units)
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  /// Loss of the initial parameters on the first epoch's patches.
  double initial_train_mse = 0.0;
};

/// CSV with header "epoch,train_mse,val_mse,seconds".
std::string history_csv(const TrainHistory& h);
void write_history_csv(const TrainHistory& h, const std::filesystem::path& path);

struct TrainResult {
  swin::Checkpoint best;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&, bool improved)>;

/// Per-channel statistics over tissue voxels of the training pairs. Targets set
/// the output side. Inputs set the input side, except for residual models,
/// which reuse the target statistics there.
/// With rotation_invariant, only the DC channel is shifted and the channels of
/// each degree share one RMS scale.
swin::Normalization compute_normalization(std::span<const TrainingPair> pairs, bool residual,
                                          bool rotation_invariant = false);

/// Adam on patch MSE with validation-driven checkpointing; deterministic
/// given tcfg.seed and independent of tcfg.threads.
TrainResult train(std::span<const TrainingPair> train_pairs, std::span<const TrainingPair> val_pairs,
                  const swin::ModelConfig& mcfg, const TrainConfig& tcfg, const EpochCallback& on_epoch = {});

}  // namespace fodswin::train
