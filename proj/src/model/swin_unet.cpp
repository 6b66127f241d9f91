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

#include "model/swin_unet.hpp"

#include <algorithm>
#include <string>

#include "core/error.hpp"
#include "model/ops.hpp"

namespace fodswin::swin {

namespace detail {

struct LinearOff {
  std::size_t w = 0;
  std::size_t b = 0;
  int in = 0;
  int out = 0;
  bool bias = true;
};

struct NormOff {
  std::size_t gamma = 0;
  std::size_t beta = 0;
  int dim = 0;
};

struct BlockOff {
  NormOff norm1;
  LinearOff qkv;
  std::size_t rel_bias = 0;
  LinearOff proj;
  NormOff norm2;
  LinearOff fc1;
  LinearOff fc2;
  bool shifted = false;
};

struct StagePlan {
  std::vector<BlockOff> blocks;
  AttentionGeometry regular;
  AttentionGeometry shifted;
  std::vector<int> regular_perm;
  std::vector<int> shifted_perm;
  std::vector<int> to_coarse;  // space-to-depth index of this stage's grid (merging)
};

struct MergeOff {
  NormOff norm;
  LinearOff reduction;
};

struct DecoderOff {
  LinearOff expand;
  LinearOff fuse;
};

struct ModelPlan {
  int full_tokens = 0;
  std::vector<int> input_to_coarse;
  LinearOff embed;
  NormOff embed_norm;
  std::vector<StagePlan> stages;
  std::vector<MergeOff> merges;    // merges[s]: stage s -> s+1
  std::vector<DecoderOff> decoders;  // decoders[s]: level s+1 -> s
  LinearOff final_expand;
  LinearOff final_skip;
  LinearOff final_fuse;
  NormOff refine_norm;
  LinearOff refine_fc1;
  LinearOff refine_fc2;
  LinearOff head;
};

LinearOff add_linear(ParamLayout& l, const std::string& name, int in, int out, bool bias = true) {
  LinearOff o;
  o.in = in;
  o.out = out;
  o.bias = bias;
  o.w = l.add(name + ".weight", {in, out}, InitKind::TruncNormal);
  if (bias) o.b = l.add(name + ".bias", {out}, InitKind::Zeros);
  return o;
}

NormOff add_norm(ParamLayout& l, const std::string& name, int dim) {
  NormOff o;
  o.dim = dim;
  o.gamma = l.add(name + ".gamma", {dim}, InitKind::Ones);
  o.beta = l.add(name + ".beta", {dim}, InitKind::Zeros);
  return o;
}

AttentionGeometry attention_geometry(const StageGeometry& g, const WindowLayout& wl) {
  AttentionGeometry a;
  a.dim = g.dim;
  a.heads = g.heads;
  a.window_tokens = g.window_tokens;
  a.num_windows = g.num_windows;
  a.table_rows = relative_table_rows(g.window);
  a.rel_index = relative_position_index(g.window);
  a.labels = wl.labels;
  return a;
}

void build(const ModelConfig& cfg, const std::vector<StageGeometry>& stages, ParamLayout& layout,
           ModelPlan& plan) {
  const int c_in = cfg.channels;
  const int e = cfg.embed_dim;
  const int n_stages = cfg.num_stages();
  plan.full_tokens = static_cast<int>(product(cfg.patch_size));
  plan.input_to_coarse = space_to_depth_index(cfg.patch_size);

  plan.embed = add_linear(layout, "embed", 8 * c_in, e);
  plan.embed_norm = add_norm(layout, "embed.norm", e);
  for (int s = 0; s < n_stages; ++s) {
    const StageGeometry& g = stages[s];
    StagePlan sp;
    const WindowLayout regular = make_window_layout(g.resolution, g.window, {0, 0, 0});
    sp.regular = attention_geometry(g, regular);
    sp.regular_perm = regular.perm;
    if (g.has_shift()) {
      const WindowLayout shifted = make_window_layout(g.resolution, g.window, g.shift);
      sp.shifted = attention_geometry(g, shifted);
      sp.shifted_perm = shifted.perm;
    }
    for (int b = 0; b < cfg.depths[s]; ++b) {
      const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(b);
      BlockOff bo;
      bo.shifted = g.has_shift() && (b % 2 == 1);
      bo.norm1 = add_norm(layout, p + ".norm1", g.dim);
      bo.qkv = add_linear(layout, p + ".attn.qkv", g.dim, 3 * g.dim);
      bo.rel_bias = layout.add(p + ".attn.rel_bias", {relative_table_rows(g.window), g.heads}, InitKind::TruncNormal);
      bo.proj = add_linear(layout, p + ".attn.proj", g.dim, g.dim);
      bo.norm2 = add_norm(layout, p + ".norm2", g.dim);
      bo.fc1 = add_linear(layout, p + ".mlp.fc1", g.dim, cfg.mlp_ratio * g.dim);
      bo.fc2 = add_linear(layout, p + ".mlp.fc2", cfg.mlp_ratio * g.dim, g.dim);
      sp.blocks.push_back(bo);
    }
    if (s + 1 < n_stages) sp.to_coarse = space_to_depth_index(g.resolution);
    plan.stages.push_back(std::move(sp));
    if (s + 1 < n_stages) {
      const std::string p = "merge" + std::to_string(s);
      MergeOff mo;
      mo.norm = add_norm(layout, p + ".norm", 8 * g.dim);
      mo.reduction = add_linear(layout, p + ".reduction", 8 * g.dim, 2 * g.dim, false);
      plan.merges.push_back(mo);
    }
  }
  for (int s = 0; s + 1 < n_stages; ++s) {
    const std::string p = "decoder" + std::to_string(s);
    const int cs = stages[s].dim;
    DecoderOff d;
    d.expand = add_linear(layout, p + ".expand", stages[s + 1].dim, 8 * cs);
    d.fuse = add_linear(layout, p + ".fuse", 2 * cs, cs);
    plan.decoders.push_back(d);
  }
  plan.final_expand = add_linear(layout, "final.expand", stages[0].dim, 8 * e);
  plan.final_skip = add_linear(layout, "final.skip", c_in, e);
  plan.final_fuse = add_linear(layout, "final.fuse", 2 * e, e);
  plan.refine_norm = add_norm(layout, "final.refine.norm", e);
  plan.refine_fc1 = add_linear(layout, "final.refine.fc1", e, 2 * e);
  plan.refine_fc2 = add_linear(layout, "final.refine.fc2", 2 * e, e);
  plan.head = add_linear(layout, "head", e, cfg.channels);
}

}  // namespace detail

ParamLayout model_layout(const ModelConfig& cfg) {
  ParamLayout layout;
  detail::ModelPlan plan;
  detail::build(cfg, stage_geometry(cfg), layout, plan);
  return layout;
}

template <typename T>
struct SwinUNet<T>::Plan : detail::ModelPlan {};

template <typename T>
struct SwinUNet<T>::Cache {
  struct Block {
    ops::LayerNormCache<T> ln1;
    std::vector<T> h_win;
    AttentionCache<T> attn;
    ops::LayerNormCache<T> ln2;
    std::vector<T> h2;
    std::vector<T> m1;
    std::vector<T> g;
  };

  std::vector<T> x0;
  std::vector<T> skip_pre;
  std::vector<T> skip_act;
  std::vector<T> embed_in;
  ops::LayerNormCache<T> embed_ln;
  std::vector<std::vector<Block>> blocks;
  std::vector<std::vector<T>> stage_out;
  std::vector<ops::LayerNormCache<T>> merge_ln;
  std::vector<std::vector<T>> merge_out;  // LN output feeding the reduction
  std::vector<std::vector<T>> dec_in;
  std::vector<std::vector<T>> dec_cat;
  std::vector<std::vector<T>> dec_pre;
  std::vector<T> fin_in;
  std::vector<T> fin_cat;
  std::vector<T> fin_pre;
  std::vector<T> fin_act;
  ops::LayerNormCache<T> ref_ln;
  std::vector<T> ref_ln_out;
  std::vector<T> ref_pre;
  std::vector<T> ref_act;
  std::vector<T> fin_out;
  std::vector<T> y;
};

namespace {

template <typename T>
void lin_fwd(const T* params, const detail::LinearOff& o, const T* x, int n, T* y) {
  ops::linear_forward(x, n, o.in, params + o.w, o.bias ? params + o.b : nullptr, o.out, y);
}

template <typename T>
void lin_bwd(const T* params, const detail::LinearOff& o, const T* x, int n, const T* dy, T* dx, T* grads,
             bool accumulate_dx = false) {
  ops::linear_backward(x, n, o.in, params + o.w, o.out, dy, dx, grads + o.w, o.bias ? grads + o.b : nullptr,
                       accumulate_dx);
}

template <typename T>
void norm_fwd(const T* params, const detail::NormOff& o, const T* x, int n, T* y, ops::LayerNormCache<T>& c) {
  ops::layernorm_forward(x, n, o.dim, params + o.gamma, params + o.beta, y, c);
}

template <typename T>
void norm_bwd(const T* params, const detail::NormOff& o, const ops::LayerNormCache<T>& c, const T* dy, int n,
              T* dx, T* grads, bool accumulate_dx) {
  ops::layernorm_backward(dy, n, o.dim, params + o.gamma, c, dx, grads + o.gamma, grads + o.beta, accumulate_dx);
}

template <typename T>
AttentionParams<T> attn_params(const T* p, const detail::BlockOff& b) {
  return {p + b.qkv.w, p + b.qkv.b, p + b.rel_bias, p + b.proj.w, p + b.proj.b};
}

template <typename T>
std::vector<T> sized(std::size_t n) {
  return std::vector<T>(n);
}

}  // namespace

template <typename T>
SwinUNet<T>::SwinUNet(ModelConfig cfg) : cfg_(std::move(cfg)), plan_(std::make_unique<Plan>()) {
  stages_ = stage_geometry(cfg_);
  detail::build(cfg_, stages_, layout_, *plan_);
}

template <typename T>
SwinUNet<T>::~SwinUNet() = default;
template <typename T>
SwinUNet<T>::SwinUNet(SwinUNet&&) noexcept = default;
template <typename T>
SwinUNet<T>& SwinUNet<T>::operator=(SwinUNet&&) noexcept = default;

template <typename T>
std::size_t SwinUNet<T>::patch_tokens() const {
  return product(cfg_.patch_size);
}

template <typename T>
std::size_t SwinUNet<T>::patch_elements() const {
  return patch_tokens() * static_cast<std::size_t>(cfg_.channels);
}

template <typename T>
void SwinUNet<T>::check_shapes(std::span<const T> params, std::span<const T> input) const {
  if (params.size() != layout_.total())
    throw ArgumentError("parameter buffer has " + std::to_string(params.size()) + " values, model expects " +
                        std::to_string(layout_.total()));
  if (input.size() != patch_elements())
    throw ArgumentError("input patch has " + std::to_string(input.size()) + " values, model expects " +
                        std::to_string(patch_elements()) + " (" + to_string(cfg_.patch_size) + " x " +
                        std::to_string(cfg_.channels) + ")");
}

template <typename T>
void SwinUNet<T>::run_forward(const T* p, const T* input, Cache& c) const {
  const Plan& plan = *plan_;
  const int n_full = plan.full_tokens;
  const int c_in = cfg_.channels;
  const int e = cfg_.embed_dim;
  const int n_stages = cfg_.num_stages();

  c.x0.assign(input, input + static_cast<std::size_t>(n_full) * c_in);

  c.skip_pre = sized<T>(static_cast<std::size_t>(n_full) * e);
  c.skip_act = sized<T>(c.skip_pre.size());
  lin_fwd(p, plan.final_skip, c.x0.data(), n_full, c.skip_pre.data());
  ops::gelu_forward(c.skip_pre.data(), c.skip_pre.size(), c.skip_act.data());

  const int n0 = stages_[0].tokens;
  c.embed_in = sized<T>(c.x0.size());
  ops::gather_rows(c.x0.data(), plan.input_to_coarse, c_in, c.embed_in.data());
  std::vector<T> tmp(static_cast<std::size_t>(n0) * e);
  lin_fwd(p, plan.embed, c.embed_in.data(), n0, tmp.data());
  std::vector<T> t(tmp.size());
  norm_fwd(p, plan.embed_norm, tmp.data(), n0, t.data(), c.embed_ln);

  c.blocks.resize(n_stages);
  c.stage_out.resize(n_stages);
  c.merge_ln.resize(n_stages);
  c.merge_out.resize(n_stages);
  for (int s = 0; s < n_stages; ++s) {
    const StageGeometry& g = stages_[s];
    const detail::StagePlan& sp = plan.stages[s];
    const int n = g.tokens;
    const int dim = g.dim;
    const std::size_t nd = static_cast<std::size_t>(n) * dim;
    c.blocks[s].resize(sp.blocks.size());
    std::vector<T> h(nd), a_win(nd), a(nd);
    for (std::size_t b = 0; b < sp.blocks.size(); ++b) {
      const detail::BlockOff& bo = sp.blocks[b];
      auto& bc = c.blocks[s][b];
      const AttentionGeometry& ag = bo.shifted ? sp.shifted : sp.regular;
      const std::vector<int>& perm = bo.shifted ? sp.shifted_perm : sp.regular_perm;

      norm_fwd(p, bo.norm1, t.data(), n, h.data(), bc.ln1);
      bc.h_win.resize(nd);
      ops::gather_rows(h.data(), perm, dim, bc.h_win.data());
      attention_forward(ag, attn_params(p, bo), bc.h_win.data(), a_win.data(), bc.attn);
      ops::scatter_rows(a_win.data(), perm, dim, a.data());
      for (std::size_t i = 0; i < nd; ++i) t[i] += a[i];

      bc.h2.resize(nd);
      norm_fwd(p, bo.norm2, t.data(), n, bc.h2.data(), bc.ln2);
      const std::size_t hidden = static_cast<std::size_t>(n) * bo.fc1.out;
      bc.m1.resize(hidden);
      bc.g.resize(hidden);
      lin_fwd(p, bo.fc1, bc.h2.data(), n, bc.m1.data());
      ops::gelu_forward(bc.m1.data(), hidden, bc.g.data());
      lin_fwd(p, bo.fc2, bc.g.data(), n, a.data());
      for (std::size_t i = 0; i < nd; ++i) t[i] += a[i];
    }
    c.stage_out[s] = t;
    if (s + 1 < n_stages) {
      const detail::MergeOff& mo = plan.merges[s];
      const int n_next = stages_[s + 1].tokens;
      std::vector<T> mi(nd);
      ops::gather_rows(t.data(), sp.to_coarse, dim, mi.data());
      c.merge_out[s].resize(nd);
      norm_fwd(p, mo.norm, mi.data(), n_next, c.merge_out[s].data(), c.merge_ln[s]);
      t.assign(static_cast<std::size_t>(n_next) * stages_[s + 1].dim, T(0));
      lin_fwd(p, mo.reduction, c.merge_out[s].data(), n_next, t.data());
    }
  }

  std::vector<T> u = std::move(t);
  c.dec_in.resize(std::max(0, n_stages - 1));
  c.dec_cat.resize(c.dec_in.size());
  c.dec_pre.resize(c.dec_in.size());
  for (int s = n_stages - 2; s >= 0; --s) {
    const detail::DecoderOff& d = plan.decoders[s];
    const int n_coarse = stages_[s + 1].tokens;
    const int n = stages_[s].tokens;
    const int dim = stages_[s].dim;
    const std::size_t nd = static_cast<std::size_t>(n) * dim;
    c.dec_in[s] = std::move(u);
    std::vector<T> ex(nd), up(nd);
    lin_fwd(p, d.expand, c.dec_in[s].data(), n_coarse, ex.data());
    ops::scatter_rows(ex.data(), plan.stages[s].to_coarse, dim, up.data());
    c.dec_cat[s].resize(2 * nd);
    ops::concat_cols(up.data(), dim, c.stage_out[s].data(), dim, n, c.dec_cat[s].data());
    c.dec_pre[s].resize(nd);
    lin_fwd(p, d.fuse, c.dec_cat[s].data(), n, c.dec_pre[s].data());
    u.resize(nd);
    ops::gelu_forward(c.dec_pre[s].data(), nd, u.data());
  }

  const std::size_t ne = static_cast<std::size_t>(n_full) * e;
  c.fin_in = std::move(u);
  std::vector<T> ex(ne), up(ne);
  lin_fwd(p, plan.final_expand, c.fin_in.data(), n0, ex.data());
  ops::scatter_rows(ex.data(), plan.input_to_coarse, e, up.data());
  c.fin_cat.resize(2 * ne);
  ops::concat_cols(up.data(), e, c.skip_act.data(), e, n_full, c.fin_cat.data());
  c.fin_pre.resize(ne);
  c.fin_act.resize(ne);
  lin_fwd(p, plan.final_fuse, c.fin_cat.data(), n_full, c.fin_pre.data());
  ops::gelu_forward(c.fin_pre.data(), ne, c.fin_act.data());

  c.ref_ln_out.resize(ne);
  norm_fwd(p, plan.refine_norm, c.fin_act.data(), n_full, c.ref_ln_out.data(), c.ref_ln);
  c.ref_pre.resize(2 * ne);
  c.ref_act.resize(2 * ne);
  lin_fwd(p, plan.refine_fc1, c.ref_ln_out.data(), n_full, c.ref_pre.data());
  ops::gelu_forward(c.ref_pre.data(), 2 * ne, c.ref_act.data());
  c.fin_out.resize(ne);
  lin_fwd(p, plan.refine_fc2, c.ref_act.data(), n_full, c.fin_out.data());
  for (std::size_t i = 0; i < ne; ++i) c.fin_out[i] += c.fin_act[i];

  c.y.resize(c.x0.size());
  lin_fwd(p, plan.head, c.fin_out.data(), n_full, c.y.data());
  if (cfg_.residual)
    for (std::size_t i = 0; i < c.y.size(); ++i) c.y[i] += c.x0[i];
}

template <typename T>
void SwinUNet<T>::run_backward(const T* p, Cache& c, const T* dy, T* grads, T* input_grad) const {
  const Plan& plan = *plan_;
  const int n_full = plan.full_tokens;
  const int c_in = cfg_.channels;
  const int e = cfg_.embed_dim;
  const int n_stages = cfg_.num_stages();
  const std::size_t ne = static_cast<std::size_t>(n_full) * e;
  const int n0 = stages_[0].tokens;

  std::vector<T> dx0(c.x0.size(), T(0));
  if (cfg_.residual) std::copy(dy, dy + dx0.size(), dx0.begin());

  // Head and refinement.
  std::vector<T> dfin_out(ne);
  lin_bwd(p, plan.head, c.fin_out.data(), n_full, dy, dfin_out.data(), grads);
  std::vector<T> dref_act(2 * ne), dref_pre(2 * ne), dref_ln(ne);
  lin_bwd(p, plan.refine_fc2, c.ref_act.data(), n_full, dfin_out.data(), dref_act.data(), grads);
  ops::gelu_backward(c.ref_pre.data(), dref_act.data(), 2 * ne, dref_pre.data());
  lin_bwd(p, plan.refine_fc1, c.ref_ln_out.data(), n_full, dref_pre.data(), dref_ln.data(), grads);
  std::vector<T> dfin_act = dfin_out;
  norm_bwd(p, plan.refine_norm, c.ref_ln, dref_ln.data(), n_full, dfin_act.data(), grads, true);

  // Full-resolution fusion.
  std::vector<T> dfin_pre(ne), dcat(2 * ne), dup(ne), dskip_act(ne);
  ops::gelu_backward(c.fin_pre.data(), dfin_act.data(), ne, dfin_pre.data());
  lin_bwd(p, plan.final_fuse, c.fin_cat.data(), n_full, dfin_pre.data(), dcat.data(), grads);
  ops::split_cols(dcat.data(), e, e, n_full, dup.data(), dskip_act.data());
  std::vector<T> dex(ne);
  ops::gather_rows(dup.data(), plan.input_to_coarse, e, dex.data());
  std::vector<T> du(static_cast<std::size_t>(n0) * stages_[0].dim);
  lin_bwd(p, plan.final_expand, c.fin_in.data(), n0, dex.data(), du.data(), grads);

  // Input skip branch.
  {
    std::vector<T> dskip_pre(ne);
    ops::gelu_backward(c.skip_pre.data(), dskip_act.data(), ne, dskip_pre.data());
    lin_bwd(p, plan.final_skip, c.x0.data(), n_full, dskip_pre.data(), dx0.data(), grads, true);
  }

  // Decoder levels, finest first.
  std::vector<std::vector<T>> dskip(n_stages);
  for (int s = 0; s + 1 < n_stages; ++s) {
    const detail::DecoderOff& d = plan.decoders[s];
    const int n = stages_[s].tokens;
    const int dim = stages_[s].dim;
    const int n_coarse = stages_[s + 1].tokens;
    const std::size_t nd = static_cast<std::size_t>(n) * dim;
    std::vector<T> dpre(nd), dc(2 * nd), dupl(nd);
    ops::gelu_backward(c.dec_pre[s].data(), du.data(), nd, dpre.data());
    lin_bwd(p, d.fuse, c.dec_cat[s].data(), n, dpre.data(), dc.data(), grads);
    dskip[s].resize(nd);
    ops::split_cols(dc.data(), dim, dim, n, dupl.data(), dskip[s].data());
    std::vector<T> dexl(nd);
    ops::gather_rows(dupl.data(), plan.stages[s].to_coarse, dim, dexl.data());
    std::vector<T> du_next(static_cast<std::size_t>(n_coarse) * stages_[s + 1].dim);
    lin_bwd(p, d.expand, c.dec_in[s].data(), n_coarse, dexl.data(), du_next.data(), grads);
    du = std::move(du_next);
  }

  // Encoder stages, coarsest first. `dt` is the gradient at the stage output.
  std::vector<T> dt = std::move(du);
  for (int s = n_stages - 1; s >= 0; --s) {
    const StageGeometry& g = stages_[s];
    const detail::StagePlan& sp = plan.stages[s];
    const int n = g.tokens;
    const int dim = g.dim;
    const std::size_t nd = static_cast<std::size_t>(n) * dim;
    std::vector<T> tmp(nd), tmp_win(nd), dh(nd);
    for (int b = static_cast<int>(sp.blocks.size()) - 1; b >= 0; --b) {
      const detail::BlockOff& bo = sp.blocks[b];
      auto& bc = c.blocks[s][b];
      const AttentionGeometry& ag = bo.shifted ? sp.shifted : sp.regular;
      const std::vector<int>& perm = bo.shifted ? sp.shifted_perm : sp.regular_perm;

      // MLP branch.
      const std::size_t hidden = static_cast<std::size_t>(n) * bo.fc1.out;
      std::vector<T> dg(hidden), dm1(hidden);
      lin_bwd(p, bo.fc2, bc.g.data(), n, dt.data(), dg.data(), grads);
      ops::gelu_backward(bc.m1.data(), dg.data(), hidden, dm1.data());
      lin_bwd(p, bo.fc1, bc.h2.data(), n, dm1.data(), dh.data(), grads);
      norm_bwd(p, bo.norm2, bc.ln2, dh.data(), n, dt.data(), grads, true);

      // Attention branch.
      ops::gather_rows(dt.data(), perm, dim, tmp_win.data());
      std::vector<T> dh_win(nd);
      attention_backward(ag, attn_params(p, bo), bc.h_win.data(), bc.attn, tmp_win.data(), dh_win.data(),
                         AttentionGrads<T>{grads + bo.qkv.w, grads + bo.qkv.b, grads + bo.rel_bias,
                                           grads + bo.proj.w, grads + bo.proj.b});
      ops::scatter_rows(dh_win.data(), perm, dim, tmp.data());
      norm_bwd(p, bo.norm1, bc.ln1, tmp.data(), n, dt.data(), grads, true);
    }
    if (s > 0) {
      // dt is now the gradient at the merge output feeding this stage.
      const detail::MergeOff& mo = plan.merges[s - 1];
      const int prev_dim = stages_[s - 1].dim;
      const std::size_t prev_nd = static_cast<std::size_t>(stages_[s - 1].tokens) * prev_dim;
      std::vector<T> dmo(prev_nd), dmi(prev_nd);
      lin_bwd(p, mo.reduction, c.merge_out[s - 1].data(), n, dt.data(), dmo.data(), grads);
      norm_bwd(p, mo.norm, c.merge_ln[s - 1], dmo.data(), n, dmi.data(), grads, false);
      std::vector<T> dprev(prev_nd);
      ops::scatter_rows(dmi.data(), plan.stages[s - 1].to_coarse, prev_dim, dprev.data());
      for (std::size_t i = 0; i < prev_nd; ++i) dprev[i] += dskip[s - 1][i];
      dt = std::move(dprev);
    }
  }

  // Patch embedding.
  {
    const std::size_t n0e = static_cast<std::size_t>(n0) * e;
    std::vector<T> dtmp(n0e), dembed_in(c.embed_in.size()), dscatter(c.x0.size());
    norm_bwd(p, plan.embed_norm, c.embed_ln, dt.data(), n0, dtmp.data(), grads, false);
    lin_bwd(p, plan.embed, c.embed_in.data(), n0, dtmp.data(), dembed_in.data(), grads);
    ops::scatter_rows(dembed_in.data(), plan.input_to_coarse, c_in, dscatter.data());
    for (std::size_t i = 0; i < dx0.size(); ++i) dx0[i] += dscatter[i];
  }
  if (input_grad) std::copy(dx0.begin(), dx0.end(), input_grad);
}

template <typename T>
std::vector<T> SwinUNet<T>::forward(std::span<const T> params, std::span<const T> input) const {
  check_shapes(params, input);
  Cache c;
  run_forward(params.data(), input.data(), c);
  return std::move(c.y);
}

template <typename T>
void SwinUNet<T>::backward(std::span<const T> params, std::span<const T> input, std::span<const T> output_grad,
                           std::span<T> grads, std::span<T> input_grad) const {
  check_shapes(params, input);
  if (output_grad.size() != patch_elements()) throw ArgumentError("output gradient shape mismatch");
  if (grads.size() != layout_.total()) throw ArgumentError("gradient buffer shape mismatch");
  if (!input_grad.empty() && input_grad.size() != patch_elements())
    throw ArgumentError("input gradient buffer shape mismatch");
  Cache c;
  run_forward(params.data(), input.data(), c);
  run_backward(params.data(), c, output_grad.data(), grads.data(), input_grad.empty() ? nullptr : input_grad.data());
}

template <typename T>
T SwinUNet<T>::loss_and_grads(std::span<const T> params, std::span<const T> input, std::span<const T> target,
                              std::span<T> grads, std::span<T> input_grad) const {
  check_shapes(params, input);
  if (target.size() != patch_elements()) throw ArgumentError("target patch shape mismatch");
  if (grads.size() != layout_.total()) throw ArgumentError("gradient buffer shape mismatch");
  if (!input_grad.empty() && input_grad.size() != patch_elements())
    throw ArgumentError("input gradient buffer shape mismatch");
  Cache c;
  run_forward(params.data(), input.data(), c);
  const std::size_t n = c.y.size();
  std::vector<T> dy(n);
  double sse = 0.0;
  const T scale = T(2) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T r = c.y[i] - target[i];
    sse += static_cast<double>(r) * static_cast<double>(r);
    dy[i] = scale * r;
  }
  run_backward(params.data(), c, dy.data(), grads.data(), input_grad.empty() ? nullptr : input_grad.data());
  return static_cast<T>(sse / static_cast<double>(n));
}

template class SwinUNet<float>;
template class SwinUNet<double>;

}  // namespace fodswin::swin
