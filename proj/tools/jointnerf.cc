#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "jointnerf/checkpoint.h"
#include "jointnerf/commands.h"

namespace {

using namespace jointnerf;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct SynthArgs {
  std::string pattern = "forward-facing-arc";
  SynthOptions options;
  std::string out;
};

struct TrainArgs {
  std::string preset = "paper";
  std::string update_mode = "per-image";
  std::optional<int64_t> epochs;
  std::optional<int> pixels;
  std::optional<int> samples;
  std::optional<double> lr_nerf;
  std::optional<double> lr_pose;
  std::optional<double> lr_focal;
  std::optional<uint64_t> seed;
  std::optional<int> chunk_rays;
  int threads = 1;
  bool deterministic = false;
  bool no_jitter = false;
  std::optional<std::string> init_poses;
  TrainOptions options;
};

struct RenderArgs {
  RenderOptions options;
};

struct EvaluateArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  EvaluateOptions options;
  bool deterministic = false;
};

TrainConfig ResolveConfig(const TrainArgs& a) {
  TrainConfig c = a.preset == "tiny" ? TrainConfig::Tiny() : TrainConfig::FullScale();
  if (a.epochs) c.epochs = *a.epochs;
  if (a.pixels) c.pixels_per_image = *a.pixels;
  if (a.samples) c.samples_per_ray = *a.samples;
  if (a.lr_nerf) c.lr_nerf = *a.lr_nerf;
  if (a.lr_pose) c.lr_pose = *a.lr_pose;
  if (a.lr_focal) c.lr_focal = *a.lr_focal;
  if (a.seed) c.seed = *a.seed;
  if (a.chunk_rays) c.chunk_rays = *a.chunk_rays;
  c.threads = a.threads;
  c.deterministic = a.deterministic;
  if (a.no_jitter) c.jitter = false;
  c.update_mode = a.update_mode == "whole-batch" ? UpdateMode::kWholeBatch
                                                 : UpdateMode::kPerImage;
  return c;
}

void AddSynth(CLI::App& app, SynthArgs& a) {
  CLI::App* cmd = app.add_subcommand("synth", "Render a synthetic dataset with ground-truth cameras");
  cmd->add_option("--pattern", a.pattern, "Camera motion pattern")
      ->check(CLI::IsMember({"forward-facing-arc", "rotation-dominant", "pure-rotation",
                             "traversal", "zoom-in"}))
      ->capture_default_str();
  cmd->add_option("--n", a.options.count, "Number of images")->capture_default_str();
  cmd->add_option("--width", a.options.width, "Image width")->capture_default_str();
  cmd->add_option("--height", a.options.height, "Image height")->capture_default_str();
  cmd->add_option("--seed", a.options.seed, "Scene seed")->capture_default_str();
  cmd->add_option("--focal-scale", a.options.focal_scale,
                  "Ground-truth focal length as a multiple of the image size")
      ->capture_default_str();
  cmd->add_option("--samples", a.options.samples, "Base samples per ray")->capture_default_str();
  cmd->add_option("--oversample", a.options.oversample, "Quadrature refinement factor")
      ->capture_default_str();
  cmd->add_option("--test-every", a.options.test_every,
                  "Hold out every N-th image, 0 for none")
      ->capture_default_str();
  cmd->add_option("--threads", a.options.threads, "Worker threads")->capture_default_str();
  cmd->add_flag("--deterministic", "Accepted for uniformity; synthesis is always reproducible");
  cmd->add_option("--out", a.out, "Output dataset directory")->required();
}

void AddTrain(CLI::App& app, TrainArgs& a) {
  CLI::App* cmd = app.add_subcommand("train", "Jointly optimise the field and the cameras");
  cmd->add_option("--dataset", a.options.dataset, "Dataset directory")->required();
  cmd->add_option("--out", a.options.out_dir, "Output directory")->required();
  cmd->add_option("--preset", a.preset, "Configuration preset")
      ->check(CLI::IsMember({"paper", "tiny"}))
      ->capture_default_str();
  cmd->add_option("--epochs", a.epochs, "Epochs of the main phase");
  cmd->add_option("--pixels", a.pixels, "Pixels sampled per image and step");
  cmd->add_option("--samples", a.samples, "Samples per ray");
  cmd->add_option("--lr-nerf", a.lr_nerf, "Initial field learning rate");
  cmd->add_option("--lr-pose", a.lr_pose, "Initial pose learning rate, 0 freezes poses");
  cmd->add_option("--lr-focal", a.lr_focal, "Initial focal learning rate, 0 freezes focal");
  cmd->add_option("--update-mode", a.update_mode, "Optimiser step granularity")
      ->check(CLI::IsMember({"per-image", "whole-batch"}))
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "Run seed");
  cmd->add_flag("--deterministic", a.deterministic,
                "Omit wall-clock times so repeated runs are byte-identical");
  cmd->add_option("--threads", a.threads, "Worker threads")->capture_default_str();
  cmd->add_option("--chunk-rays", a.chunk_rays, "Rays per independent gradient chunk");
  cmd->add_flag("--no-jitter", a.no_jitter, "Use bin midpoints instead of jittered samples");
  cmd->add_option("--init-poses", a.options.init_poses,
                  "Camera text file with initial poses for the training images");
  cmd->add_flag("--refine", a.options.refine,
                "Restart with a fresh field after the main phase, keeping the cameras");
  cmd->add_option("--refine-epochs", a.options.refine_epochs,
                  "Epochs of the refinement phase (default: same as the main phase)");
  cmd->add_option("--checkpoint-every", a.options.checkpoint_every,
                  "Epochs between checkpoints, 0 for the end only")
      ->capture_default_str();
  cmd->add_option("--log-every", a.options.log_every, "Epochs between progress lines")
      ->capture_default_str();
}

void AddRender(CLI::App& app, RenderArgs& a) {
  CLI::App* cmd = app.add_subcommand("render", "Render views from a checkpoint");
  cmd->add_option("--checkpoint", a.options.checkpoint, "Checkpoint file")->required();
  cmd->add_option("--out", a.options.out_dir, "Output directory")->required();
  auto* index = cmd->add_option("--train-index", a.options.train_index,
                                "Render the optimised pose of this training camera");
  auto* file = cmd->add_option("--camera-file", a.options.camera_file,
                               "Render every pose of a camera text file");
  auto* spiral = cmd->add_option("--spiral", a.options.spiral_frames,
                                 "Render N frames on a loop around the mean pose");
  index->excludes(file)->excludes(spiral);
  file->excludes(spiral);
  cmd->add_option("--threads", a.options.threads, "Worker threads")->capture_default_str();
  cmd->add_option("--chunk-rays", a.options.chunk_rays, "Rays per render chunk")
      ->capture_default_str();
  cmd->add_flag("--deterministic", "Accepted for uniformity; rendering is always reproducible");
}

void AddEvaluate(CLI::App& app, EvaluateArgs& a) {
  CLI::App* cmd = app.add_subcommand("evaluate", "Score a checkpoint against a dataset");
  cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
  cmd->add_option("--dataset", a.dataset, "Dataset directory")->required();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--scene", a.options.scene, "Scene label for the CSV")->capture_default_str();
  cmd->add_option("--align-iterations", a.options.align.iterations,
                  "Test-time pose alignment iterations")
      ->capture_default_str();
  cmd->add_option("--align-lr", a.options.align.lr, "Test-time pose alignment learning rate")
      ->capture_default_str();
  cmd->add_option("--align-pixels", a.options.align.pixels,
                  "Pixels per test-time alignment step")
      ->capture_default_str();
  cmd->add_option("--seed", a.options.align.seed, "Seed of the alignment pixel subsets")
      ->capture_default_str();
  cmd->add_option("--threads", a.options.threads, "Worker threads")->capture_default_str();
  cmd->add_flag("--deterministic", a.deterministic,
                "Accepted for uniformity; evaluation is always reproducible");
}

int Run(CLI::App& app, const SynthArgs& synth, const TrainArgs& train,
        const RenderArgs& render, const EvaluateArgs& evaluate) {
  if (app.got_subcommand("synth")) {
    SynthOptions o = synth.options;
    o.pattern = ParseMotionPattern(synth.pattern);
    RunSynth(o, synth.out, &std::cout);
  } else if (app.got_subcommand("train")) {
    TrainOptions o = train.options;
    o.config = ResolveConfig(train);
    RunTrain(o, &std::cout);
  } else if (app.got_subcommand("render")) {
    RunRender(render.options, &std::cout);
  } else if (app.got_subcommand("evaluate")) {
    const EvaluateResult r = RunEvaluate(evaluate.checkpoint, evaluate.dataset, evaluate.out,
                                         evaluate.options, &std::cout);
    for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint optimisation of a radiance field and camera parameters"};
  app.require_subcommand(1);
  SynthArgs synth;
  TrainArgs train;
  RenderArgs render;
  EvaluateArgs evaluate;
  AddSynth(app, synth);
  AddTrain(app, train);
  AddRender(app, render);
  AddEvaluate(app, evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return Run(app, synth, train, render, evaluate);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kData;
  } catch (const CameraError& e) {
    std::cerr << "camera file error: " << e.what() << "\n";
    return kData;
  } catch (const ImageIoError& e) {
    std::cerr << "image error: " << e.what() << "\n";
    return kData;
  } catch (const EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
