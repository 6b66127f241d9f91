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

// fodswin command-line driver: phantom-gen, train, infer, eval, acc-map,
// identity-ckpt. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fodswin/fodswin.h"

namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(fsw_status s, const std::string& what) {
  if (s != FSW_OK)
    throw Failure(what + ": " + fsw_status_name(s) + ": " + fsw_last_error_message());
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Volume = Handle<fsw_volume, fsw_volume_free>;
using Dataset = Handle<fsw_dataset, fsw_dataset_free>;
using Checkpoint = Handle<fsw_checkpoint, fsw_checkpoint_free>;
using History = Handle<fsw_history, fsw_history_free>;
using AccMap = Handle<fsw_acc_map, fsw_acc_map_free>;
using Report = Handle<fsw_report, fsw_report_free>;

std::array<int, 3> expand3(const std::vector<int>& v, const char* name) {
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw CLI::ValidationError(name, "expects 1 or 3 values");
}

void write_file(const fs::path& p, const std::string& text) { check(fsw_write_text(p.string().c_str(), text.c_str()), "write " + p.string()); }

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Failure("cannot create directory " + d.string() + ": " + ec.message());
}

// INI text with a section named after the command, the layout --config reads.
std::string section(const CLI::App& sub) { return "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false); }

void print_config(const CLI::App& sub) { std::cout << "# resolved config\n" << section(sub) << std::flush; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Model flags shared by train and identity-ckpt.
struct ModelFlags {
  std::vector<int> patch{16};
  int embed_dim = 24;
  std::vector<int> window{4};
  std::vector<int> depths{2, 2};
  std::vector<int> heads{3, 6};
  bool shift = true;
  int mlp_ratio = 4;
  bool residual = false;

  void add(CLI::App* app) {
    app->add_option("--patch", patch, "Patch size (1 or 3 values)")->expected(1, 3)->capture_default_str();
    app->add_option("--embed-dim", embed_dim, "Stage-0 embedding width")->capture_default_str();
    app->add_option("--window", window, "Attention window (1 or 3 values)")->expected(1, 3)->capture_default_str();
    app->add_option("--depths", depths, "Blocks per encoder stage")->expected(1, FSW_MAX_STAGES)->capture_default_str();
    app->add_option("--heads", heads, "Attention heads per stage")->expected(1, FSW_MAX_STAGES)->capture_default_str();
    app->add_flag("--shift,!--no-shift", shift, "Shifted windows on odd blocks")->capture_default_str();
    app->add_option("--mlp-ratio", mlp_ratio, "MLP hidden width factor")->capture_default_str();
    app->add_flag("--residual,!--no-residual", residual, "Predict a correction added to the input")->capture_default_str();
  }

  fsw_model_config build() const {
    fsw_model_config c = fsw_model_config_default();
    const auto p = expand3(patch, "--patch");
    const auto w = expand3(window, "--window");
    for (int i = 0; i < 3; ++i) {
      c.patch[i] = p[i];
      c.window[i] = w[i];
    }
    c.embed_dim = embed_dim;
    if (depths.size() != heads.size()) throw CLI::ValidationError("--heads", "needs one value per stage of --depths");
    c.num_stages = static_cast<int>(depths.size());
    for (int s = 0; s < c.num_stages; ++s) {
      c.depths[s] = depths[s];
      c.heads[s] = heads[s];
    }
    c.shift = shift ? 1 : 0;
    c.mlp_ratio = mlp_ratio;
    c.residual = residual ? 1 : 0;
    return c;
  }
};

void add_common(CLI::App* sub, int& threads) {
  sub->footer("--config FILE  INI file with a [" + sub->get_name() +
              "] section holding any of the options above (flags take precedence)");
  sub->allow_config_extras(CLI::config_extras_mode::error);
  sub->add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();
}

// ---- phantom-gen ----------------------------------------------------------

struct PhantomCmd {
  std::vector<int> dims{48};
  std::uint64_t seed = 0;
  std::uint64_t degrade_seed = 1;
  int truncate_lmax = 4;
  double noise = 0.01;
  double damping = 0.8;
  double kernel_sharpness = 50.0;
  double gm_amplitude = 0.02;
  std::string out;
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    sub->add_option("--dims", dims, "Grid size (1 or 3 values)")->expected(1, 3)->capture_default_str();
    sub->add_option("--seed", seed, "Phantom seed")->capture_default_str();
    sub->add_option("--degrade-seed", degrade_seed, "Noise seed of the degraded input")->capture_default_str();
    sub->add_option("--truncate-lmax", truncate_lmax, "Highest degree kept in the input")->capture_default_str();
    sub->add_option("--noise", noise, "Coefficient noise sigma")->capture_default_str();
    sub->add_option("--damping", damping, "Factor applied to degrees >= 2")->capture_default_str();
    sub->add_option("--kernel-sharpness", kernel_sharpness, "Fiber kernel sharpness")->capture_default_str();
    sub->add_option("--gm-amplitude", gm_amplitude, "Isotropic grey matter amplitude")->capture_default_str();
    sub->add_option("--out", out, "Output directory")->required();
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    fsw_phantom_config c = fsw_phantom_config_default();
    const auto d = expand3(dims, "--dims");
    for (int i = 0; i < 3; ++i) c.dims[i] = d[i];
    c.seed = seed;
    c.degrade_seed = degrade_seed;
    c.kernel_sharpness = kernel_sharpness;
    c.gm_amplitude = gm_amplitude;
    c.degrade = {truncate_lmax, noise, damping};
    Dataset ds;
    check(fsw_phantom_generate(&c, ds.out()), "phantom generation");
    ensure_dir(out);
    check(fsw_dataset_save(ds.get(), out.c_str()), "write phantom");
    // Everything but the output location, so the file can be fed back with --config.
    std::istringstream all(section(sub));
    std::string cfg, line;
    while (std::getline(all, line))
      if (line.rfind("out=", 0) != 0) cfg += line + "\n";
    write_file(fs::path(out) / "phantom.cfg", cfg);
    std::cout << "wrote target.nii input.nii wm.nii cgm.nii sgm.nii phantom.cfg to " << out << "\n";
    return 0;
  }
};

// ---- train ----------------------------------------------------------------

struct TrainCmd {
  std::vector<std::string> data;
  std::vector<std::string> val;
  std::string out;
  ModelFlags model;
  double lr = 0.0005;
  int batch = 2;
  int epochs = 80;
  int patches_per_epoch = 32;
  int val_patches = 8;
  double min_tissue_frac = 0.2;
  std::uint64_t seed = 0;
  int patience = 15;
  bool resample = true;
  int precision = 32;
  bool augment_rotations = false;
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    sub->add_option("--data", data, "Training pair directories")->required();
    sub->add_option("--val", val, "Validation pair directories (default: --data)");
    sub->add_option("--out", out, "Output directory for best.ckpt and history.csv")->required();
    model.add(sub);
    sub->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--batch", batch, "Minibatch size")->capture_default_str();
    sub->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    sub->add_option("--patches-per-epoch", patches_per_epoch, "Training patches per epoch")->capture_default_str();
    sub->add_option("--val-patches", val_patches, "Frozen validation patches")->capture_default_str();
    sub->add_option("--min-tissue-frac", min_tissue_frac, "Patch tissue gate")->capture_default_str();
    sub->add_option("--seed", seed, "Training seed")->capture_default_str();
    sub->add_option("--patience", patience, "Epochs without improvement before stopping")->capture_default_str();
    sub->add_flag("--resample-each-epoch,!--no-resample-each-epoch", resample, "Draw new patches every epoch")
        ->capture_default_str();
    sub->add_option("--precision", precision, "Arithmetic width")->check(CLI::IsMember({32, 64}))->capture_default_str();
    sub->add_flag("--augment-rotations,!--no-augment-rotations", augment_rotations, "Randomly rotate patch coefficients")
        ->capture_default_str();
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    const fsw_model_config mc = model.build();
    std::vector<Dataset> tr, va;
    for (const auto& d : data) {
      tr.emplace_back();
      check(fsw_dataset_load(d.c_str(), tr.back().out()), "load " + d);
    }
    for (const auto& d : val) {
      va.emplace_back();
      check(fsw_dataset_load(d.c_str(), va.back().out()), "load " + d);
    }
    std::vector<const fsw_dataset*> trp, vap;
    for (const auto& d : tr) trp.push_back(d.get());
    for (const auto& d : va) vap.push_back(d.get());
    if (vap.empty()) {
      std::cout << "no --val given; validating on the training data\n";
      vap = trp;
    }
    ensure_dir(out);
    const std::string ckpt_path = (fs::path(out) / "best.ckpt").string();
    fsw_train_config tc = fsw_train_config_default();
    tc.learning_rate = lr;
    tc.batch_size = batch;
    tc.max_epochs = epochs;
    tc.patches_per_epoch = patches_per_epoch;
    tc.val_patches = val_patches;
    tc.min_tissue_frac = min_tissue_frac;
    tc.seed = seed;
    tc.patience = patience;
    tc.resample_each_epoch = resample ? 1 : 0;
    tc.precision_bits = precision;
    tc.augment_rotations = augment_rotations ? 1 : 0;
    tc.threads = threads;
    tc.checkpoint_path = ckpt_path.c_str();
    size_t n_params = 0;
    check(fsw_model_param_count(&mc, &n_params), "model config");
    std::cout << "parameters " << n_params << "\n";
    Checkpoint best;
    History hist;
    auto cb = [](const fsw_epoch_record* r, int improved, void*) {
      std::printf("epoch %d train_mse %.6g val_mse %.6g %.2fs%s\n", r->epoch, r->train_mse, r->val_mse, r->seconds,
                  improved ? " *" : "");
      std::fflush(stdout);
    };
    check(fsw_train(trp.data(), trp.size(), vap.data(), vap.size(), &mc, &tc, cb, nullptr, best.out(), hist.out()),
          "training");
    const std::string hist_path = (fs::path(out) / "history.csv").string();
    check(fsw_history_write_csv(hist.get(), hist_path.c_str()), "write history");
    std::cout << "initial train_mse " << fmt(fsw_history_initial_mse(hist.get())) << ", best epoch "
              << fsw_history_best_epoch(hist.get()) << "\nwrote " << ckpt_path << " and " << hist_path << "\n";
    return 0;
  }
};

// ---- infer ----------------------------------------------------------------

struct InferCmd {
  std::string in, ckpt, out, mask;
  double overlap = 0.25;
  std::string blend = "uniform";
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    sub->add_option("--in", in, "Input coefficient volume")->required();
    sub->add_option("--ckpt", ckpt, "Checkpoint")->required();
    sub->add_option("--out", out, "Output volume")->required();
    sub->add_option("--overlap", overlap, "Tile overlap fraction in [0, 1)")->capture_default_str();
    sub->add_option("--blend", blend, "Tile blending")->check(CLI::IsMember({"uniform", "cosine"}))
        ->capture_default_str();
    sub->add_option("--mask", mask, "Optional 3D mask; voxels outside keep the input");
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    Checkpoint ck;
    check(fsw_checkpoint_load(ckpt.c_str(), ck.out()), "load " + ckpt);
    Volume input, m, result;
    check(fsw_volume_read(in.c_str(), input.out()), "read " + in);
    if (!mask.empty()) check(fsw_volume_read(mask.c_str(), m.out()), "read " + mask);
    fsw_infer_options opt = fsw_infer_options_default();
    opt.overlap = overlap;
    opt.blend = blend == "cosine" ? FSW_BLEND_COSINE : FSW_BLEND_UNIFORM;
    opt.threads = threads;
    size_t passes = 0;
    const auto t0 = std::chrono::steady_clock::now();
    check(fsw_super_resolve(ck.get(), input.get(), m.get(), &opt, result.out(), &passes), "inference");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check(fsw_volume_write(result.get(), out.c_str()), "write " + out);
    int dims[4];
    check(fsw_volume_dims(input.get(), dims), "input dims");
    const double voxels = static_cast<double>(dims[0]) * dims[1] * dims[2];
    std::printf("forward passes %zu (%.4f%% of %.0f voxels), wall time %.2fs\n", passes, 100.0 * passes / voxels,
                voxels, secs);
    return 0;
  }
};

// ---- eval -----------------------------------------------------------------

const char* kRegionNames[3] = {"WM", "WM_CGM", "WM_SGM"};

struct EvalCmd {
  std::vector<std::string> pred;
  std::vector<std::string> names;
  std::string ref, masks, out = ".";
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    sub->add_option("--pred", pred, "Volumes to score (one or more)")->required();
    sub->add_option("--names", names, "Method names, one per --pred (default: file stems)");
    sub->add_option("--ref", ref, "Reference coefficient volume")->required();
    sub->add_option("--masks", masks, "Directory with wm.nii, cgm.nii and sgm.nii")->required();
    sub->add_option("--out", out, "Output directory for report.csv and acc_values.csv")->capture_default_str();
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    if (!names.empty() && names.size() != pred.size())
      throw CLI::ValidationError("--names", "needs one name per --pred");
    Volume reference;
    check(fsw_volume_read(ref.c_str(), reference.out()), "read " + ref);
    Dataset fr;
    check(fsw_dataset_load_fractions(masks.c_str(), fr.out()), "load masks from " + masks);

    std::vector<AccMap> maps;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      Volume p;
      check(fsw_volume_read(pred[i].c_str(), p.out()), "read " + pred[i]);
      maps.emplace_back();
      check(fsw_acc_map_compute(p.get(), reference.get(), nullptr, maps.back().out()), "ACC for " + pred[i]);
      labels.push_back(names.empty() ? fs::path(pred[i]).stem().string() : names[i]);
    }
    std::vector<const fsw_acc_map*> mp;
    std::vector<const char*> lp;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      mp.push_back(maps[i].get());
      lp.push_back(labels[i].c_str());
    }
    Report rep;
    check(fsw_report_compute(mp.data(), lp.data(), mp.size(), fr.get(), rep.out()), "report");
    ensure_dir(out);
    write_file(fs::path(out) / "report.csv", fsw_report_csv(rep.get()));
    write_file(fs::path(out) / "acc_values.csv", raw_values(mp, labels, fr.get()));
    std::cout << fsw_report_table(rep.get());
    std::cout << "wrote " << (fs::path(out) / "report.csv").string() << " and "
              << (fs::path(out) / "acc_values.csv").string() << "\n";
    return 0;
  }

  // Per-voxel ACC values for external plotting: method,region,voxel,acc.
  static std::string raw_values(const std::vector<const fsw_acc_map*>& maps, const std::vector<std::string>& labels,
                                const fsw_dataset* fr) {
    std::string csv = "method,region,voxel,acc\n";
    char line[256];
    for (int r = 0; r < 3; ++r) {
      Volume m;
      check(fsw_region_mask(fr, static_cast<fsw_region>(r), m.out()), "region mask");
      const float* mv = fsw_volume_data(m.get());
      const size_t n = fsw_volume_size(m.get());
      for (std::size_t i = 0; i < maps.size(); ++i) {
        Volume acc;
        check(fsw_acc_map_to_volume(maps[i], acc.out()), "ACC volume");
        const float* av = fsw_volume_data(acc.get());
        for (size_t v = 0; v < n; ++v) {
          if (mv[v] == 0.0f || std::isnan(av[v])) continue;
          std::snprintf(line, sizeof(line), "%s,%s,%zu,%.9g\n", labels[i].c_str(), kRegionNames[r], v,
                        static_cast<double>(av[v]));
          csv += line;
        }
      }
    }
    return csv;
  }
};

// ---- acc-map --------------------------------------------------------------

struct AccMapCmd {
  std::string a, b, mask, out, heatmap;
  std::string axis = "z";
  int slice = -1;
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    sub->add_option("--a", a, "First coefficient volume")->required();
    sub->add_option("--b", b, "Second coefficient volume")->required();
    sub->add_option("--mask", mask, "Optional 3D mask of selected voxels");
    sub->add_option("--out", out, "ACC volume (NaN where undefined)")->required();
    sub->add_option("--heatmap", heatmap, "Stem for the PGM/CSV heatmap slice (skipped if empty)");
    sub->add_option("--axis", axis, "Slice axis")->check(CLI::IsMember({"x", "y", "z"}))->capture_default_str();
    sub->add_option("--slice", slice, "Slice index (-1: middle)")->capture_default_str();
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    Volume va, vb, vm, acc;
    check(fsw_volume_read(a.c_str(), va.out()), "read " + a);
    check(fsw_volume_read(b.c_str(), vb.out()), "read " + b);
    if (!mask.empty()) check(fsw_volume_read(mask.c_str(), vm.out()), "read " + mask);
    AccMap map;
    check(fsw_acc_map_compute(va.get(), vb.get(), vm.get(), map.out()), "ACC");
    check(fsw_acc_map_to_volume(map.get(), acc.out()), "ACC volume");
    check(fsw_volume_write(acc.get(), out.c_str()), "write " + out);
    std::cout << "wrote " << out << "\n";
    if (!heatmap.empty()) {
      const fsw_axis ax = axis == "x" ? FSW_AXIS_X : axis == "y" ? FSW_AXIS_Y : FSW_AXIS_Z;
      int dims[4];
      check(fsw_volume_dims(va.get(), dims), "dims");
      const int index = slice >= 0 ? slice : dims[static_cast<int>(ax)] / 2;
      check(fsw_export_heatmap_slice(map.get(), ax, index, heatmap.c_str()), "heatmap");
      std::cout << "wrote " << heatmap << ".pgm, " << heatmap << "_mask.pgm and " << heatmap << ".csv (" << axis
                << " = " << index << ")\n";
    }
    return 0;
  }
};

// ---- identity-ckpt --------------------------------------------------------

struct IdentityCmd {
  ModelFlags model;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;

  void add(CLI::App* sub) {
    add_common(sub, threads);
    model.add(sub);
    sub->add_option("--seed", seed, "Initialization seed of the non-head weights")->capture_default_str();
    sub->add_option("--out", out, "Checkpoint path")->required();
  }

  int run(const CLI::App& sub) {
    print_config(sub);
    const fsw_model_config mc = model.build();
    Checkpoint ck;
    check(fsw_checkpoint_identity(&mc, seed, ck.out()), "identity checkpoint");
    check(fsw_checkpoint_save(ck.get(), out.c_str()), "write " + out);
    std::cout << "wrote " << out << "\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fodswin: FOD super-resolution with windowed attention"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", fsw_version());
  // Reachable after the command name; values go in a [command] section.
  app.set_config("--config", "", "INI file with a [command] section (flags take precedence)");
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  PhantomCmd phantom;
  TrainCmd train;
  InferCmd infer;
  EvalCmd eval;
  AccMapCmd accmap;
  IdentityCmd identity;
  CLI::App* s_phantom = app.add_subcommand("phantom-gen", "Generate a synthetic phantom and its degraded input");
  CLI::App* s_train = app.add_subcommand("train", "Train a model on phantom or dataset directories");
  CLI::App* s_infer = app.add_subcommand("infer", "Whole-volume sliding-window inference");
  CLI::App* s_eval = app.add_subcommand("eval", "Regional ACC report against a reference");
  CLI::App* s_acc = app.add_subcommand("acc-map", "Per-voxel ACC map and heatmap slice");
  CLI::App* s_id = app.add_subcommand("identity-ckpt", "Write a checkpoint whose forward pass is the identity");
  phantom.add(s_phantom);
  train.add(s_train);
  infer.add(s_infer);
  eval.add(s_eval);
  accmap.add(s_acc);
  identity.add(s_id);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*s_phantom) return phantom.run(*s_phantom);
    if (*s_train) return train.run(*s_train);
    if (*s_infer) return infer.run(*s_infer);
    if (*s_eval) return eval.run(*s_eval);
    if (*s_acc) return accmap.run(*s_acc);
    if (*s_id) return identity.run(*s_id);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
