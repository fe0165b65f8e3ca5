#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jointnerf/camera.h"
#include "jointnerf/dataset.h"
#include "jointnerf/eval.h"
#include "jointnerf/trainer.h"

namespace jointnerf {

// Workflows behind the command-line subcommands. Each writes its artifacts
// below an explicit output directory and reports progress to `log` when it
// is non-null.

// Writes a synthetic dataset to `out_dir`.
Dataset RunSynth(const SynthOptions& options, const std::string& out_dir,
                 std::ostream* log = nullptr);

struct TrainOptions {
  std::string dataset;
  std::string out_dir;
  TrainConfig config;
  // Camera text file seeding the training cameras, one pose per training
  // image; its intrinsics line, if any, seeds the focal lengths.
  std::optional<std::string> init_poses;
  // Runs a second phase with a fresh field after the main one.
  bool refine = false;
  // Epochs of the second phase; defaults to config.epochs.
  std::optional<int64_t> refine_epochs;
  int64_t checkpoint_every = 100;
  int64_t log_every = 100;
};

struct TrainResult {
  TrainState state;
  // Camera index k of the state belongs to dataset image train_indices[k].
  std::vector<int> train_indices;
  // State at the end of the main phase when refinement ran.
  std::optional<TrainState> before_refine;
};

// Writes to out_dir:
//   config.txt        resolved configuration
//   loss.csv          epoch,loss,lr_nerf,lr_pose,lr_focal,seconds
//   loss_refine.csv   the same for the refinement phase
//   checkpoint.bin    latest state; checkpoint_main.bin before refinement
//   cameras.txt       optimised cameras of the training images
// On a non-finite loss the state from the last completed epoch is saved and
// NumericalError propagates.
TrainResult RunTrain(const TrainOptions& options, std::ostream* log = nullptr);

std::string FormatConfig(const TrainConfig& config);
std::string LossCsvHeader();
// Wall-clock seconds are written as 0 in deterministic mode.
std::string LossCsvRow(const EpochStats& stats, bool deterministic);

// Smooth closed loop of `count` poses around the mean of `poses`, keeping the
// mean orientation.
std::vector<Extrinsics> SpiralPath(std::span<const Extrinsics> poses, int count);

struct RenderOptions {
  std::string checkpoint;
  std::string out_dir;
  // Exactly one pose source.
  std::optional<int> train_index;
  std::optional<std::string> camera_file;
  std::optional<int> spiral_frames;
  int threads = 1;
  int chunk_rays = 1024;
};

// Writes NAME.ppm and NAME_depth.pfm per pose. Returns the file stems.
std::vector<std::string> RunRender(const RenderOptions& options,
                                   std::ostream* log = nullptr);

struct EvaluateOptions {
  std::string scene = "scene";
  PoseAlignOptions align;
  int threads = 1;
};

struct ViewMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double initial_loss = 0.0;
  double aligned_loss = 0.0;
};

struct EvaluateResult {
  std::vector<ViewMetrics> views;  // held-out images
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::optional<AteMetrics> ate;  // training cameras
  std::optional<FocalError> focal;
  std::vector<Extrinsics> aligned_trajectory;
  std::vector<std::string> warnings;
};

// Sim(3)-aligns the training cameras to the reference, aligns every held-out
// view by test-time pose optimisation and scores the rendered views.
// Held-out views start from the reference pose mapped into the model frame
// or, without reference cameras, from the nearest training camera.
EvaluateResult Evaluate(const TrainState& state, const Dataset& dataset,
                        const EvaluateOptions& options);

// Writes metrics.csv, summary.json and, with reference cameras,
// trajectory_aligned.txt to out_dir.
EvaluateResult RunEvaluate(const std::string& checkpoint,
                           const std::string& dataset,
                           const std::string& out_dir,
                           const EvaluateOptions& options,
                           std::ostream* log = nullptr);

}  // namespace jointnerf
