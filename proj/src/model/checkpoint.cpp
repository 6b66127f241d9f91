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

#include "model/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "model/params.hpp"
#include "model/swin_unet.hpp"

namespace fodswin::swin {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'O', 'D', 'S', 'W', 'I', 'N', '\0'};
constexpr const char* kNormNames[4] = {"norm.in_shift", "norm.in_scale", "norm.out_shift", "norm.out_scale"};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const std::vector<int>& shape, const double* data, std::size_t n) {
    str(name);
    pod<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) pod<std::uint32_t>(static_cast<std::uint32_t>(d));
    bytes(data, n * sizeof(double));
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string origin) : buf_(std::move(data)), origin_(std::move(origin)) {}

  void bytes(void* p, std::size_t n) {
    if (n > buf_.size() - pos_) throw IOError("checkpoint '" + origin_ + "' is truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string origin_;
};

std::string config_block(const Checkpoint& c) {
  std::string text = to_text(c.model);
  for (const auto& [k, v] : c.metadata) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos)
      throw ArgumentError("metadata entry '" + k + "' contains '=' or a newline");
    text += "meta." + k + "=" + v + "\n";
  }
  return text;
}

std::map<std::string, std::string> parse_metadata(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("meta.", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(5, eq - 5)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace

Normalization Normalization::identity(int channels) {
  const auto c = static_cast<std::size_t>(channels);
  return {std::vector<double>(c, 0.0), std::vector<double>(c, 1.0), std::vector<double>(c, 0.0),
          std::vector<double>(c, 1.0)};
}

void Normalization::validate(int channels) const {
  const auto c = static_cast<std::size_t>(channels);
  if (in_shift.size() != c || in_scale.size() != c || out_shift.size() != c || out_scale.size() != c)
    throw ArgumentError("normalization must have one entry per channel (" + std::to_string(channels) + ")");
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::isfinite(in_shift[i]) || !std::isfinite(out_shift[i]) || !(in_scale[i] > 0.0) ||
        !(out_scale[i] > 0.0) || !std::isfinite(in_scale[i]) || !std::isfinite(out_scale[i]))
      throw ArgumentError("normalization channel " + std::to_string(i) + " is not finite and positive-scaled");
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.model.validate();
  ckpt.norm.validate(ckpt.model.channels);
  const ParamLayout layout = model_layout(ckpt.model);
  if (ckpt.params.size() != layout.total())
    throw ArgumentError("checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, layout expects " +
                        std::to_string(layout.total()));

  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(config_block(ckpt));
  w.pod<std::uint64_t>(ckpt.seed);
  w.pod<std::uint32_t>(ckpt.epoch);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(layout.entries().size() + 4));
  for (const auto& e : layout.entries()) w.tensor(e.name, e.shape, ckpt.params.data() + e.offset, e.size);
  const std::vector<double>* norms[4] = {&ckpt.norm.in_shift, &ckpt.norm.in_scale, &ckpt.norm.out_shift,
                                         &ckpt.norm.out_scale};
  for (int i = 0; i < 4; ++i) w.tensor(kNormNames[i], {ckpt.model.channels}, norms[i]->data(), norms[i]->size());

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError("cannot open '" + tmp.string() + "' for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    out.flush();
    if (!out) throw IOError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IOError("cannot move checkpoint into place at '" + path.string() + "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open checkpoint '" + path.string() + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());

  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("'" + path.string() + "' is not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");

  Checkpoint ckpt;
  const std::string text = r.str();
  try {
    ckpt.model = model_config_from_text(text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
  }
  ckpt.metadata = parse_metadata(text);
  ckpt.seed = r.pod<std::uint64_t>();
  ckpt.epoch = r.pod<std::uint32_t>();

  const ParamLayout layout = model_layout(ckpt.model);
  ckpt.params.assign(layout.total(), 0.0);
  std::vector<bool> seen(layout.entries().size(), false);
  std::vector<double>* norms[4] = {&ckpt.norm.in_shift, &ckpt.norm.in_scale, &ckpt.norm.out_shift,
                                   &ckpt.norm.out_scale};
  bool norm_seen[4] = {false, false, false, false};

  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<int>(r.pod<std::uint32_t>());
      n *= static_cast<std::size_t>(d);
    }
    double* dst = nullptr;
    int norm_slot = -1;
    for (int i = 0; i < 4; ++i)
      if (name == kNormNames[i]) norm_slot = i;
    if (norm_slot >= 0) {
      if (shape != std::vector<int>{ckpt.model.channels})
        throw FormatError("tensor '" + name + "' has the wrong shape");
      norms[norm_slot]->assign(n, 0.0);
      dst = norms[norm_slot]->data();
      norm_seen[norm_slot] = true;
    } else {
      if (!layout.contains(name)) throw FormatError("unexpected tensor '" + name + "' in checkpoint");
      const ParamEntry& e = layout.find(name);
      if (e.shape != shape) throw FormatError("tensor '" + name + "' has the wrong shape");
      dst = ckpt.params.data() + e.offset;
      seen[static_cast<std::size_t>(&e - layout.entries().data())] = true;
    }
    r.bytes(dst, n * sizeof(double));
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw FormatError("checkpoint is missing tensor '" + layout.entries()[i].name + "'");
  for (int i = 0; i < 4; ++i)
    if (!norm_seen[i]) throw FormatError(std::string("checkpoint is missing tensor '") + kNormNames[i] + "'");
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  try {
    ckpt.norm.validate(ckpt.model.channels);
  } catch (const ArgumentError& e) {
    throw FormatError(e.what());
  }
  return ckpt;
}

Checkpoint identity_checkpoint(const ModelConfig& cfg_in, std::uint64_t seed) {
  Checkpoint c;
  c.model = cfg_in;
  c.model.residual = true;
  c.model.validate();
  const ParamLayout layout = model_layout(c.model);
  c.params = init_values(layout, seed);
  for (const char* name : {"head.weight", "head.bias"}) {
    const ParamEntry& e = layout.find(name);
    std::fill(c.params.begin() + static_cast<long>(e.offset), c.params.begin() + static_cast<long>(e.offset + e.size),
              0.0);
  }
  c.norm = Normalization::identity(c.model.channels);
  c.seed = seed;
  c.metadata["kind"] = "identity";
  return c;
}

}  // namespace fodswin::swin
