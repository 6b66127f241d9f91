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
#include <string>
#include <vector>

namespace fodswin::swin {

enum class InitKind : std::uint8_t { TruncNormal, Zeros, Ones };

struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  InitKind init = InitKind::TruncNormal;
};

/// Named tensors packed into one flat buffer. Gradients and optimizer state
/// share the same layout.
class ParamLayout {
 public:
  /// Appends a tensor and returns its offset.
  std::size_t add(std::string name, std::vector<int> shape, InitKind init);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t total() const { return total_; }
  const ParamEntry& find(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

/// Truncated normal (std 0.02, cut at two standard deviations) for
/// projections and bias tables, zeros for biases and norm offsets, ones for
/// norm scales. Deterministic given seed.
std::vector<double> init_values(const ParamLayout& layout, std::uint64_t seed);

}  // namespace fodswin::swin
