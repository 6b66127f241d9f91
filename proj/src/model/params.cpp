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

#include "model/params.hpp"

#include <random>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace fodswin::swin {

std::size_t ParamLayout::add(std::string name, std::vector<int> shape, InitKind init) {
  std::size_t size = 1;
  for (int d : shape) size *= static_cast<std::size_t>(d);
  ParamEntry e{std::move(name), std::move(shape), total_, size, init};
  entries_.push_back(std::move(e));
  total_ += size;
  return entries_.back().offset;
}

const ParamEntry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ArgumentError("unknown parameter tensor '" + name + "'");
}

bool ParamLayout::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::vector<double> init_values(const ParamLayout& layout, std::uint64_t seed) {
  constexpr double kStd = 0.02;
  std::vector<double> values(layout.total(), 0.0);
  for (std::size_t t = 0; t < layout.entries().size(); ++t) {
    const ParamEntry& e = layout.entries()[t];
    double* p = values.data() + e.offset;
    switch (e.init) {
      case InitKind::Zeros:
        break;
      case InitKind::Ones:
        std::fill(p, p + e.size, 1.0);
        break;
      case InitKind::TruncNormal: {
        std::mt19937_64 rng(mix_seed(seed, t));
        std::normal_distribution<double> n(0.0, 1.0);
        for (std::size_t i = 0; i < e.size; ++i) {
          double v;
          do v = n(rng);
          while (std::abs(v) > 2.0);
          p[i] = kStd * v;
        }
        break;
      }
    }
  }
  return values;
}

}  // namespace fodswin::swin
