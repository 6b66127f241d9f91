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

#include "pipeline/inference.hpp"

#include <cmath>
#include <numbers>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "model/swin_unet.hpp"

namespace fodswin::infer {

std::vector<double> blend_window(const Dims3& patch, Blend blend) {
  const std::size_t n = product(patch);
  std::vector<double> w(n, 1.0);
  if (blend == Blend::Uniform) return w;
  std::array<std::vector<double>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    axis[a].resize(static_cast<std::size_t>(patch[a]));
    for (int i = 0; i < patch[a]; ++i)
      axis[a][i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / patch[a]);
  }
  std::size_t t = 0;
  for (int z = 0; z < patch[2]; ++z)
    for (int y = 0; y < patch[1]; ++y)
      for (int x = 0; x < patch[0]; ++x) w[t++] = axis[0][x] * axis[1][y] * axis[2][z];
  return w;
}

std::vector<int> axis_origins(int dim, int patch, int stride) {
  if (patch > dim) throw ArgumentError("patch " + std::to_string(patch) + " exceeds volume size " + std::to_string(dim));
  if (stride < 1) throw ArgumentError("stride must be >= 1");
  std::vector<int> o;
  for (int start = 0; start + patch <= dim; start += stride) o.push_back(start);
  if (o.back() + patch < dim) o.push_back(dim - patch);
  return o;
}

TilePlan tile_volume(const Dims3& dims, const Dims3& patch, double overlap, Blend blend) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ArgumentError("overlap must lie in [0, 1)");
  TilePlan plan;
  plan.dims = dims;
  plan.patch = patch;
  for (int a = 0; a < 3; ++a) {
    if (patch[a] < 1) throw ArgumentError("patch size must be positive");
    if (patch[a] > dims[a])
      throw ArgumentError("patch " + to_string(patch) + " does not fit in volume " + to_string(dims));
    plan.stride[a] = std::max(1, static_cast<int>(std::floor(patch[a] * (1.0 - overlap) + 1e-9)));
    plan.origins[a] = axis_origins(dims[a], patch[a], plan.stride[a]);
  }
  for (int oz : plan.origins[2])
    for (int oy : plan.origins[1])
      for (int ox : plan.origins[0]) plan.specs.push_back({{ox, oy, oz}, patch});
  plan.blend = blend_window(patch, blend);
  return plan;
}

double partition_of_unity_error(const TilePlan& plan) {
  const std::size_t n = product(plan.dims);
  std::vector<double> total(n, 0.0);
  auto visit = [&](auto&& fn) {
    for (const auto& s : plan.specs) {
      std::size_t t = 0;
      for (int z = 0; z < s.size[2]; ++z)
        for (int y = 0; y < s.size[1]; ++y)
          for (int x = 0; x < s.size[0]; ++x, ++t) {
            const std::size_t v = static_cast<std::size_t>(s.origin[0] + x) +
                                  static_cast<std::size_t>(plan.dims[0]) *
                                      (static_cast<std::size_t>(s.origin[1] + y) +
                                       static_cast<std::size_t>(plan.dims[1]) * static_cast<std::size_t>(s.origin[2] + z));
            fn(v, plan.blend[t]);
          }
    }
  };
  visit([&](std::size_t v, double w) { total[v] += w; });
  for (std::size_t v = 0; v < n; ++v)
    if (!(total[v] > 0.0)) throw NumericalError("voxel " + std::to_string(v) + " has no blend weight");
  std::vector<double> normalized(n, 0.0);
  visit([&](std::size_t v, double w) { normalized[v] += w / total[v]; });
  double err = 0.0;
  for (double s : normalized) err = std::max(err, std::abs(s - 1.0));
  return err;
}

SlidingWindowAccumulator::SlidingWindowAccumulator(const Dims3& dims, int channels)
    : dims_(dims),
      channels_(channels),
      sum_(product(dims) * static_cast<std::size_t>(channels), 0.0),
      weight_(product(dims), 0.0) {}

void SlidingWindowAccumulator::add(const patching::PatchSpec& spec, const patching::PatchTensor<float>& patch,
                                   const std::vector<double>& weights) {
  patching::check_bounds(spec, dims_);
  if (patch.size != spec.size || patch.channels != channels_ || weights.size() != spec.voxels())
    throw ArgumentError("tile prediction does not match its spec");
  const std::size_t nv = weight_.size();
  std::size_t t = 0;
  for (int z = 0; z < spec.size[2]; ++z)
    for (int y = 0; y < spec.size[1]; ++y)
      for (int x = 0; x < spec.size[0]; ++x, ++t) {
        const std::size_t v = static_cast<std::size_t>(spec.origin[0] + x) +
                              static_cast<std::size_t>(dims_[0]) *
                                  (static_cast<std::size_t>(spec.origin[1] + y) +
                                   static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(spec.origin[2] + z));
        const double w = weights[t];
        weight_[v] += w;
        const float* src = patch.data.data() + t * static_cast<std::size_t>(channels_);
        for (int c = 0; c < channels_; ++c) sum_[v + nv * static_cast<std::size_t>(c)] += w * src[c];
      }
}

Volume SlidingWindowAccumulator::finalize(const VolumeHeader& header) const {
  if (header.spatial() != dims_ || header.channels() != channels_)
    throw ArgumentError("output header does not match the accumulator grid");
  Volume out(header, std::vector<float>(sum_.size()));
  const std::size_t nv = weight_.size();
  for (std::size_t v = 0; v < nv; ++v) {
    const double w = weight_[v];
    if (!(w > 0.0)) throw NumericalError("voxel " + std::to_string(v) + " was not covered by any tile");
    for (int c = 0; c < channels_; ++c) {
      const std::size_t i = v + nv * static_cast<std::size_t>(c);
      out.data[i] = static_cast<float>(sum_[i] / w);
    }
  }
  return out;
}

struct Predictor::Impl {
  swin::Checkpoint ckpt;
  swin::SwinUNet<float> model;
  std::vector<float> params;

  explicit Impl(const swin::Checkpoint& c) : ckpt(c), model(c.model), params(c.params.begin(), c.params.end()) {
    if (params.size() != model.layout().total()) throw ArgumentError("checkpoint parameters do not match its config");
    ckpt.norm.validate(c.model.channels);
  }
};

Predictor::Predictor(const swin::Checkpoint& ckpt) : impl_(std::make_unique<Impl>(ckpt)) {}
Predictor::~Predictor() = default;
Predictor::Predictor(Predictor&&) noexcept = default;

const swin::ModelConfig& Predictor::config() const { return impl_->ckpt.model; }

patching::PatchTensor<float> Predictor::predict(const patching::PatchTensor<float>& raw) const {
  const auto& cfg = impl_->ckpt.model;
  const auto& norm = impl_->ckpt.norm;
  if (raw.size != cfg.patch_size || raw.channels != cfg.channels)
    throw ArgumentError("patch " + to_string(raw.size) + "x" + std::to_string(raw.channels) +
                        " does not match the model input " + to_string(cfg.patch_size) + "x" +
                        std::to_string(cfg.channels));
  const std::size_t c = static_cast<std::size_t>(cfg.channels);
  std::vector<float> x(raw.data.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t k = i % c;
    x[i] = static_cast<float>((static_cast<double>(raw.data[i]) - norm.in_shift[k]) / norm.in_scale[k]);
  }
  const auto y = impl_->model.forward(impl_->params, x);
  patching::PatchTensor<float> out{raw.size, raw.channels, std::vector<float>(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t k = i % c;
    out.data[i] = static_cast<float>(static_cast<double>(y[i]) * norm.out_scale[k] + norm.out_shift[k]);
  }
  return out;
}

InferResult super_resolve(const swin::Checkpoint& ckpt, const Volume& input, const InferOptions& options) {
  input.header.validate();
  if (input.channels() != ckpt.model.channels)
    throw ArgumentError("input has " + std::to_string(input.channels()) + " channels, checkpoint expects " +
                        std::to_string(ckpt.model.channels));
  if (options.mask && options.mask->dims != input.spatial())
    throw ArgumentError("mask " + to_string(options.mask->dims) + " does not match input " +
                        to_string(input.spatial()));
  if (options.threads < 1) throw ArgumentError("threads must be >= 1");
  const Predictor predictor(ckpt);
  const TilePlan plan = tile_volume(input.spatial(), ckpt.model.patch_size, options.overlap, options.blend);

  SlidingWindowAccumulator acc(input.spatial(), input.channels());
  InferResult result;
  result.tiles = plan.specs.size();
  // Tiles are predicted in parallel chunks and accumulated in plan order.
  const std::size_t chunk = static_cast<std::size_t>(options.threads);
  std::vector<patching::PatchTensor<float>> preds(chunk);
  for (std::size_t start = 0; start < plan.specs.size(); start += chunk) {
    const std::size_t n = std::min(chunk, plan.specs.size() - start);
    parallel_for(n, options.threads, [&](std::size_t i) {
      preds[i] = predictor.predict(patching::extract(input, plan.specs[start + i]));
    });
    for (std::size_t i = 0; i < n; ++i) acc.add(plan.specs[start + i], preds[i], plan.blend);
    result.forward_passes += n;
  }
  result.output = acc.finalize(input.header);
  if (options.mask) {
    const std::size_t nv = input.voxels();
    for (std::size_t v = 0; v < nv; ++v)
      if (!(*options.mask)[v])
        for (int c = 0; c < input.channels(); ++c) result.output.at(v, c) = input.at(v, c);
  }
  return result;
}

}  // namespace fodswin::infer
