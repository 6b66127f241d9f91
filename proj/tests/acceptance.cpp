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

// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// the number of failed criteria.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "core/error.hpp"
#include "core/nifti_io.hpp"
#include "core/phantom.hpp"
#include "core/sh.hpp"
#include "model/checkpoint.hpp"
#include "model/params.hpp"
#include "model/swin_unet.hpp"
#include "model/windows.hpp"
#include "pipeline/evaluation.hpp"
#include "pipeline/inference.hpp"
#include "pipeline/trainer.hpp"
#include "support/grad_check.hpp"
#include "support/temp_dir.hpp"

#ifndef FODSWIN_CLI_PATH
#error "FODSWIN_CLI_PATH must point at the CLI binary"
#endif

namespace fs = std::filesystem;
using namespace fodswin;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// ---------------------------------------------------------------------------

Outcome sh_basis() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const sh::SphereDesign d = sh::gauss_product_sphere(62, 70);
  const Eigen::MatrixXd B = sh::eval_basis(d.dirs);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(d.weights.data(), static_cast<long>(d.weights.size()));
  const double gram = (B.transpose() * w.asDiagonal() * B - Eigen::MatrixXd::Identity(45, 45)).cwiseAbs().maxCoeff();

  std::mt19937_64 rng(1);
  const sh::SphereDesign d60 = sh::fibonacci_sphere(60);
  const sh::ShFitter fitter(d60.dirs);
  double roundtrip = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const sh::ShCoeffs c(randn(45, rng));
    const sh::ShCoeffs back = fitter.fit(sh::synthesize(c, d60.dirs));
    for (int j = 0; j < 45; ++j) roundtrip = std::max(roundtrip, std::abs(back[j] - c[j]));
  }
  const double t = seconds_since(t0);
  o.require(d.dirs.size() >= 4000, std::to_string(d.dirs.size()) + " points");
  o.require(gram < 1e-6, "Gram dev " + fmt("%.2e", gram));
  o.require(roundtrip < 1e-8, "roundtrip err " + fmt("%.2e", roundtrip) + " (60 dirs)");
  o.require(t < 5.0, fmt("%.2f s", t));
  return o;
}

double weighted_pearson(const sh::SphereDesign& d, const Eigen::MatrixXd& B, const std::vector<double>& u,
                        const std::vector<double>& v) {
  const Eigen::VectorXd f = B * Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<long>(u.size()));
  const Eigen::VectorXd g = B * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  double sw = 0, mf = 0, mg = 0;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    sw += d.weights[i];
    mf += d.weights[i] * f[static_cast<long>(i)];
    mg += d.weights[i] * g[static_cast<long>(i)];
  }
  mf /= sw;
  mg /= sw;
  double cfg = 0, cff = 0, cgg = 0;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    const double a = f[static_cast<long>(i)] - mf, b = g[static_cast<long>(i)] - mg;
    cfg += d.weights[i] * a * b;
    cff += d.weights[i] * a * a;
    cgg += d.weights[i] * b * b;
  }
  return cfg / std::sqrt(cff * cgg);
}

Outcome acc_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const sh::SphereDesign d = sh::gauss_product_sphere(62, 70);
  const Eigen::MatrixXd B = sh::eval_basis(d.dirs);
  std::mt19937_64 rng(2);
  double worst = 0, self = 0, neg = 0, dc = 0, scale = 0;
  bool defined = true;
  for (int k = 0; k < 100; ++k) {
    const auto u = randn(45, rng), v = randn(45, rng);
    const auto acc = sh::acc_voxel(u, v);
    if (!acc) {
      defined = false;
      continue;
    }
    worst = std::max(worst, std::abs(*acc - weighted_pearson(d, B, u, v)));
    auto un = u, ud = u, us = u;
    for (auto& x : un) x = -x;
    ud[0] += 10.0 * (k + 1);
    for (auto& x : us) x *= 0.5 + k;
    self = std::max(self, std::abs(*sh::acc_voxel(u, u) - 1.0));
    neg = std::max(neg, std::abs(*sh::acc_voxel(u, un) + 1.0));
    dc = std::max(dc, std::abs(*sh::acc_voxel(ud, v) - *acc));
    scale = std::max(scale, std::abs(*sh::acc_voxel(us, v) - *acc));
  }
  const double t = seconds_since(t0);
  o.require(defined, "100 pairs");
  o.require(worst < 1e-3, "|ACC - Pearson| " + fmt("%.2e", worst));
  o.require(self < 1e-12 && neg < 1e-12, "ACC(u,u)=1, ACC(u,-u)=-1 within " + fmt("%.1e", std::max(self, neg)));
  o.require(dc == 0.0, "DC invariance " + fmt("%.1e", dc));
  o.require(scale < 1e-12, "scale invariance " + fmt("%.1e", scale));
  o.require(t < 10.0, fmt("%.2f s", t));
  return o;
}

Outcome gradient_check() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::string worst_tensor;
  int tensors = 0, min_checked = 1 << 30;
  bool enough = true;
  for (bool residual : {false, true}) {
    swin::ModelConfig cfg = testing::toy_config(45);
    cfg.residual = residual;
    const auto problem = testing::make_grad_problem(cfg, 31);
    for (const auto& r : testing::check_all_gradients(problem, 20, 5)) {
      const std::size_t size = problem.model.layout().contains(r.tensor) ? problem.model.layout().find(r.tensor).size
                                                                          : problem.input.size();
      enough = enough && r.checked >= static_cast<int>(std::min<std::size_t>(20, size));
      min_checked = std::min(min_checked, r.checked);
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_tensor = r.tensor;
      }
      ++tensors;
    }
  }
  const double t = seconds_since(t0);
  o.require(enough, std::to_string(tensors) + " tensors, >= min(20, size) coords each, Richardson h=2e-3");
  o.require(worst < 1e-3, "max rel err " + fmt("%.2e", worst) + " (" + worst_tensor + ")");
  o.require(t < 120.0, fmt("%.1f s", t));
  return o;
}

Outcome window_attention_checks() {
  Outcome o;
  std::mt19937_64 rng(4);
  bool identity = true;
  int layouts = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int w = std::vector<int>{2, 4}[rng() % 2];
    const Dims3 window{w, w, std::vector<int>{1, 2}[rng() % 2]};
    Dims3 grid{};
    for (int a = 0; a < 3; ++a) grid[a] = window[a] * static_cast<int>(1 + rng() % 3);
    const int channels = 1 + static_cast<int>(rng() % 5);
    const Dims3 shift{window[0] / 2, window[1] / 2, window[2] / 2};
    const auto feat = randn(product(grid) * static_cast<std::size_t>(channels), rng);
    for (const Dims3& s : {Dims3{0, 0, 0}, shift}) {
      const auto part = swin::partition_windows<double>(feat, grid, channels, window, s);
      identity = identity && swin::reverse_windows(part) == feat &&
                 part.layout.num_windows * part.layout.window_tokens == static_cast<int>(product(grid));
      ++layouts;
    }
  }
  o.require(identity, "partition/reverse identity on " + std::to_string(layouts) + " layouts");

  int built = 0;
  bool shapes = true;
  for (int trial = 0; built < 20 && trial < 500; ++trial) {
    swin::ModelConfig cfg;
    const int stages = 1 + static_cast<int>(rng() % 3);
    const int base = std::vector<int>{2, 4}[rng() % 2];
    cfg.window_size = {base, base, std::vector<int>{1, 2}[rng() % 2]};
    for (int a = 0; a < 3; ++a) cfg.patch_size[a] = (1 << stages) * cfg.window_size[a] * static_cast<int>(1 + rng() % 2);
    cfg.channels = 1 + static_cast<int>(rng() % 6);
    const int heads = 1 + static_cast<int>(rng() % 2);
    cfg.embed_dim = heads * (2 + static_cast<int>(rng() % 3));
    cfg.depths.assign(stages, 0);
    cfg.num_heads.assign(stages, heads);
    for (int s = 0; s < stages; ++s) cfg.depths[s] = 1 + static_cast<int>(rng() % 2);
    cfg.shift = rng() % 2 == 0;
    cfg.residual = rng() % 2 == 0;
    try {
      cfg.validate();
    } catch (const ConfigError&) {
      continue;
    }
    swin::SwinUNet<float> m(cfg);
    const auto p64 = swin::init_values(m.layout(), 1);
    const std::vector<float> p(p64.begin(), p64.end());
    std::vector<float> x(m.patch_elements());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(std::sin(0.1 * i));
    shapes = shapes && m.forward(p, x).size() == x.size();
    ++built;
  }
  o.require(built == 20 && shapes, std::to_string(built) + " random configs keep shape");

  double row_err = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Dims3 window{2, 3, 2};
    const int heads = 1 + trial % 3, dim = heads * 2;
    auto w = swin::WindowAttentionWeights<double>::zeros(dim, heads, window);
    w.qkv_weight = randn(w.qkv_weight.size(), rng, 0.5);
    w.qkv_bias = randn(w.qkv_bias.size(), rng, 0.1);
    w.rel_bias = randn(w.rel_bias.size(), rng, 0.5);
    w.proj_weight = randn(w.proj_weight.size(), rng, 0.5);
    w.proj_bias = randn(w.proj_bias.size(), rng, 0.1);
    const auto x = randn(12 * static_cast<std::size_t>(dim), rng, 3.0);
    std::vector<double> probs;
    swin::window_attention<double>(x, window, w, heads, &probs);
    for (std::size_t r = 0; r < probs.size() / 12; ++r) {
      double s = 0;
      for (int k = 0; k < 12; ++k) s += probs[r * 12 + k];
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
  }
  o.require(row_err < 1e-6, "softmax row sums within " + fmt("%.1e", row_err));
  return o;
}

Outcome identity_inference() {
  Outcome o;
  const auto ph = phantom::gen_phantom({48, 48, 48}, 5);
  const Volume input = phantom::degrade(ph.target, {}, 15);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ckpt = swin::identity_checkpoint(swin::desk_config());
  infer::InferOptions opts;
  opts.overlap = 0.25;
  const auto res = infer::super_resolve(ckpt, input, opts);
  const double t = seconds_since(t0);
  double worst = 0;
  for (std::size_t i = 0; i < input.data.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(res.output.data[i] - input.data[i])));
  o.require(res.output.header == input.header && worst < 1e-5,
            "identity on 48^3x45 max diff " + fmt("%.1e", worst));

  const auto plan = infer::tile_volume({145, 174, 145}, {96, 96, 96}, 0.25);
  o.require(plan.stride == Dims3{72, 72, 72} && plan.origins[0] == std::vector<int>{0, 49},
            "145/96/0.25: stride 72, x origins {0,49}");

  double pou = 0;
  for (const Dims3& dims : {Dims3{48, 48, 48}, Dims3{37, 23, 30}, Dims3{20, 20, 20}})
    for (auto blend : {infer::Blend::Uniform, infer::Blend::Cosine})
      pou = std::max(pou, infer::partition_of_unity_error(infer::tile_volume(dims, {16, 16, 16}, 0.25, blend)));
  o.require(pou < 1e-9, "partition of unity " + fmt("%.1e", pou));
  o.require(t < 30.0, fmt("%.1f s", t));
  return o;
}

// Desk-scale learning run: one phantom pair, rotation-augmented residual model.
Outcome learning() {
  Outcome o;
  const auto train_ph = phantom::gen_phantom({48, 48, 48}, 1);
  const auto test_ph = phantom::gen_phantom({48, 48, 48}, 2);
  const train::TrainingPair pair{phantom::degrade(train_ph.target, {}, 11), train_ph.target, train_ph.fractions};
  const Volume test_input = phantom::degrade(test_ph.target, {}, 12);

  swin::ModelConfig mcfg = swin::desk_config();
  mcfg.residual = true;
  train::TrainConfig tcfg;
  tcfg.learning_rate = 2e-3;
  tcfg.max_epochs = 280;
  tcfg.patience = tcfg.max_epochs;
  tcfg.augment_rotations = true;
  const std::vector<train::TrainingPair> pairs{pair};

  const std::clock_t c0 = std::clock();
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train::train(pairs, pairs, mcfg, tcfg);
  const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  const double wall = seconds_since(t0);

  const double initial = result.history.initial_train_mse;
  const double final_mse = result.history.epochs.back().train_mse;
  const double ratio = final_mse / initial;

  const Mask wm = eval::region_mask(test_ph.fractions, eval::wm_rule());
  const auto sr = infer::super_resolve(result.best, test_input);
  const double base = eval::acc_stats(sh::acc_volume(test_input, test_ph.target, wm), wm).mean;
  const double model = eval::acc_stats(sh::acc_volume(sr.output, test_ph.target, wm), wm).mean;

  o.require(cpu <= 600.0, std::to_string(result.history.epochs.size()) + " epochs in " + fmt("%.0f s CPU", cpu) +
                              fmt(" (%.0f s wall)", wall));
  o.require(ratio < 0.1, "(a) train MSE " + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_mse) +
                             ", ratio " + fmt("%.3f", ratio) + " (need < 0.1)");
  o.require(model - base >= 0.05, "(b) held-out WM ACC " + fmt("%.4f", base) + " -> " + fmt("%.4f", model) +
                                      ", gain " + fmt("%+.4f", model - base) + " (need >= 0.05)");
  return o;
}

Outcome regions_and_report() {
  Outcome o;
  const auto ph = phantom::gen_phantom({32, 32, 32}, 9);
  const auto& f = ph.fractions;
  bool match = true;
  std::vector<std::size_t> counts;
  for (const auto& rule : eval::standard_rules()) {
    const Mask m = eval::region_mask(f, rule);
    std::size_t n = 0;
    for (std::size_t v = 0; v < f.wm.data.size(); ++v) {
      const bool in = f.wm.data[v] >= rule.wm_min && f.cgm.data[v] >= rule.cgm_min && f.sgm.data[v] >= rule.sgm_min;
      match = match && in == m[v];
      n += in;
    }
    counts.push_back(n);
  }
  o.require(match, "WM/WM_CGM/WM_SGM masks match brute force (" + std::to_string(counts[0]) + "/" +
                       std::to_string(counts[1]) + "/" + std::to_string(counts[2]) + " voxels)");

  const Volume degraded = phantom::degrade(ph.target, {}, 19);
  const Mask all = Mask::filled(ph.target.spatial(), true);
  const eval::Report rep = eval::compare_methods(
      {{"degraded", sh::acc_volume(degraded, ph.target, all)}, {"target", sh::acc_volume(ph.target, ph.target, all)}},
      f, eval::standard_rules());
  std::istringstream csv(eval::report_csv(rep));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  const std::vector<std::string> order = {"degraded,WM,", "degraded,WM_CGM,", "degraded,WM_SGM,",
                                          "target,WM,",   "target,WM_CGM,",   "target,WM_SGM,"};
  bool schema = lines.size() == 7 && lines[0] == "method,region,n_voxels,n_undefined,Min,Max,Mean,STD,LQ,UQ";
  for (std::size_t i = 0; schema && i < order.size(); ++i) {
    schema = lines[i + 1].rfind(order[i], 0) == 0 && std::count(lines[i + 1].begin(), lines[i + 1].end(), ',') == 9;
  }
  bool ordered = true;
  for (const auto& r : rep.rows) {
    const auto& s = r.stats;
    ordered = ordered && s.min <= s.lower_quartile && s.lower_quartile <= s.upper_quartile && s.upper_quartile <= s.max &&
              s.min <= s.mean && s.mean <= s.max && s.n_voxels > 0;
  }
  o.require(schema, "report columns method,region,n_voxels,n_undefined,Min,Max,Mean,STD,LQ,UQ x 6 rows");
  o.require(ordered, "Min <= LQ <= UQ <= Max per row");
  return o;
}

Outcome forward_count() {
  Outcome o;
  swin::ModelConfig cfg = swin::desk_config();
  cfg.patch_size = {32, 32, 32};
  const auto ckpt = swin::identity_checkpoint(cfg);
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n01;
  Volume input = Volume::zeros({64, 64, 64}, 45);
  for (auto& v : input.data) v = n01(rng);
  const auto res = infer::super_resolve(ckpt, input);
  const double frac = static_cast<double>(res.forward_passes) / static_cast<double>(input.voxels());
  o.require(res.forward_passes == 27 && res.tiles == 27,
            "64^3 volume, 32^3 patch, overlap 0.25: " + std::to_string(res.forward_passes) + " forward passes");
  o.require(frac < 0.001, fmt("%.4f%% of voxels", 100.0 * frac));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome nifti_roundtrip() {
  Outcome o;
  testing::TempDir tmp;
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n01;
  auto check = [&](const std::vector<int>& dims, const std::string& name) {
    VolumeHeader h;
    h.dims = dims;
    h.voxel_size = {1.25, 1.25, 1.25};
    h.affine = identity_affine(h.voxel_size);
    h.affine[0][3] = -90.0;
    h.affine[1][3] = -126.0;
    h.affine[2][3] = -72.0;
    std::vector<float> data(h.element_count());
    for (auto& v : data) v = n01(rng);
    const Volume vol(h, std::move(data));
    const fs::path path = tmp.path() / (name + ".nii");
    nifti::write(vol, path);
    const Volume back = nifti::read(path);
    const bool exact = back.header.dims == h.dims && back.data.size() == vol.data.size() &&
                       std::memcmp(back.data.data(), vol.data.data(), vol.data.size() * sizeof(float)) == 0;
    const fs::path again = tmp.path() / (name + "_2.nii");
    nifti::write(back, again);
    const bool bytes = slurp(path) == slurp(again);
    fs::remove(path);
    fs::remove(again);
    return exact && bytes;
  };
  o.require(check({17, 9, 5}, "small3d"), "3D 17x9x5 bit-exact");
  o.require(check({12, 10, 8, 45}, "small4d"), "4D 12x10x8x45 bit-exact");
  o.require(check({145, 174, 145}, "mask"), "3D 145x174x145 bit-exact");
  o.require(check({145, 174, 145, 45}, "fod"), "4D 145x174x145x45 bit-exact, rewrite byte-identical");
  return o;
}

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const fs::path& cwd, const std::string& args) {
  const fs::path log = cwd / "cli.log";
  const std::string cmd = "cd '" + cwd.string() + "' && '" FODSWIN_CLI_PATH "' " + args + " > '" + log.string() +
                          "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string history_without_seconds(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome cli_determinism() {
  Outcome o;
  testing::TempDir one, two;
  const std::vector<std::string> steps = {
      "phantom-gen --dims 24 --seed 4 --out ph",
      "train --data ph --out run --epochs 3 --patches-per-epoch 4 --val-patches 2 --seed 5 --patch 8 --embed-dim 8 "
      "--window 2 --heads 2 4",
      "infer --in ph/input.nii --ckpt run/best.ckpt --out sr.nii",
      "eval --pred sr.nii ph/input.nii --names sr degraded --ref ph/target.nii --masks ph --out ev",
  };
  bool ran = true;
  for (const auto& dir : {one.path(), two.path()})
    for (const auto& s : steps) {
      const auto r = run_cli(dir, s);
      if (r.code != 0) {
        ran = false;
        std::fprintf(stderr, "%s\n%s\n", s.c_str(), r.output.c_str());
      }
    }
  o.require(ran, "phantom-gen, train, infer, eval ran twice");
  if (!ran) return o;
  bool same = true;
  int files = 0;
  for (const char* f : {"ph/target.nii", "ph/input.nii", "ph/wm.nii", "ph/cgm.nii", "ph/sgm.nii", "ph/phantom.cfg",
                        "run/best.ckpt", "sr.nii", "ev/report.csv", "ev/acc_values.csv"}) {
    const std::string a = slurp(one.path() / f), b = slurp(two.path() / f);
    same = same && !a.empty() && a == b;
    ++files;
  }
  same = same && history_without_seconds(one.path() / "run/history.csv") ==
                     history_without_seconds(two.path() / "run/history.csv");
  o.require(same, std::to_string(files) + " files byte-identical, history.csv identical apart from seconds");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fodswin acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"SH basis orthonormality and fit roundtrip", sh_basis},
      {"ACC oracle and invariances", acc_oracle},
      {"model gradients vs central differences", gradient_check},
      {"window partition, shapes, softmax", window_attention_checks},
      {"identity sliding-window inference", identity_inference},
      {"desk-scale learning fixture", learning},
      {"region masks and report schema", regions_and_report},
      {"forward pass count", forward_count},
      {"NIfTI roundtrip", nifti_roundtrip},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failed += out.pass ? 0 : 1;
    std::printf("criterion %d: %s  %s: %s  [%.1f s]\n", id, out.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                out.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed;
}
