#include "jointnerf/commands.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>
#include <json.hpp>

#include "jointnerf/checkpoint.h"
#include "jointnerf/image.h"

namespace jointnerf {

namespace fs = std::filesystem;

namespace {

std::string Fixed(double v, const char* format = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string Padded(int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<size_t>(width) - digits.size(), '0');
  }
  return digits;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

const char* ModeName(UpdateMode mode) {
  return mode == UpdateMode::kPerImage ? "per-image" : "whole-batch";
}

CameraFile ExportCameras(const TrainState& state, const Dataset& dataset,
                         std::span<const int> train) {
  CameraFile file;
  file.intrinsics = state.intrinsics();
  for (size_t k = 0; k < train.size(); ++k) {
    file.poses.push_back({dataset.names[static_cast<size_t>(train[k])],
                          state.pose(static_cast<int>(k))});
  }
  return file;
}

}  // namespace

Dataset RunSynth(const SynthOptions& options, const std::string& out_dir,
                 std::ostream* log) {
  Dataset ds = MakeSyntheticDataset(options);
  SaveDataset(ds, out_dir);
  if (log) {
    *log << "wrote " << ds.size() << " images (" << MotionPatternName(options.pattern)
         << ", " << ds.width << "x" << ds.height << ", near " << ds.near
         << ", far " << ds.far << ") to " << out_dir << "\n";
  }
  return ds;
}

std::string FormatConfig(const TrainConfig& c) {
  std::ostringstream os;
  os << "epochs " << c.epochs << "\n"
     << "pixels_per_image " << c.pixels_per_image << "\n"
     << "samples_per_ray " << c.samples_per_ray << "\n"
     << "lr_nerf " << Fixed(c.lr_nerf, "%g") << "\n"
     << "lr_pose " << Fixed(c.lr_pose, "%g") << "\n"
     << "lr_focal " << Fixed(c.lr_focal, "%g") << "\n"
     << "nerf_decay " << Fixed(c.nerf_decay, "%g") << " every " << c.nerf_decay_every << "\n"
     << "camera_decay " << Fixed(c.camera_decay, "%g") << " every "
     << c.camera_decay_every << "\n"
     << "update_mode " << ModeName(c.update_mode) << "\n"
     << "jitter " << (c.jitter ? "on" : "off") << "\n"
     << "seed " << c.seed << "\n"
     << "deterministic " << (c.deterministic ? "on" : "off") << "\n"
     << "threads " << c.threads << "\n"
     << "chunk_rays " << c.chunk_rays << "\n"
     << "field depth " << c.field.depth << " width " << c.field.width
     << " skip_after " << c.field.skip_after << " dir_width " << c.field.dir_width
     << " pos_frequencies " << c.field.encoding.pos_frequencies
     << " dir_frequencies " << c.field.encoding.dir_frequencies << "\n"
     << "adam beta1 " << Fixed(c.adam.beta1, "%g") << " beta2 "
     << Fixed(c.adam.beta2, "%g") << " epsilon " << Fixed(c.adam.epsilon, "%g")
     << "\n";
  return os.str();
}

std::string LossCsvHeader() { return "epoch,loss,lr_nerf,lr_pose,lr_focal,seconds\n"; }

std::string LossCsvRow(const EpochStats& s, bool deterministic) {
  std::ostringstream os;
  os << s.epoch << ',' << Fixed(s.loss) << ',' << Fixed(s.lr_nerf)
     << ',' << Fixed(s.lr_pose) << ',' << Fixed(s.lr_focal) << ','
     << (deterministic ? std::string("0") : Fixed(s.seconds, "%.6f")) << '\n';
  return os.str();
}

TrainResult RunTrain(const TrainOptions& options, std::ostream* log) {
  options.config.Validate();
  const Dataset ds = LoadDataset(options.dataset);
  TrainResult result;
  result.train_indices = ds.TrainIndices();
  const std::vector<int>& train = result.train_indices;
  if (train.empty()) throw DataError("dataset has no training images");
  std::vector<Image> images;
  for (int i : train) images.push_back(ds.images[static_cast<size_t>(i)]);

  TrainState state;
  if (options.init_poses) {
    const CameraFile cams = ReadCameraFile(*options.init_poses);
    std::vector<Eigen::Matrix3d> rotations;
    std::vector<Eigen::Vector3d> centers;
    for (int i : train) {
      const std::string& name = ds.names[static_cast<size_t>(i)];
      auto it = std::find_if(cams.poses.begin(), cams.poses.end(),
                             [&](const NamedPose& p) { return p.name == name; });
      if (it == cams.poses.end()) {
        throw DataError("initial camera file lacks a pose for '" + name + "'");
      }
      rotations.push_back(it->pose.Rotation());
      centers.push_back(it->pose.t);
    }
    if (cams.intrinsics && (cams.intrinsics->width != ds.width ||
                            cams.intrinsics->height != ds.height)) {
      throw DataError("initial camera file intrinsics do not match the image size");
    }
    state = InitFromPoses(options.config, rotations, centers, cams.intrinsics,
                          ds.width, ds.height, ds.near, ds.far);
  } else {
    state = InitTrainState(options.config, static_cast<int>(train.size()),
                           ds.width, ds.height, ds.near, ds.far);
  }

  const fs::path out(options.out_dir);
  fs::create_directories(out);
  const std::string config_text = FormatConfig(options.config);
  WriteText(out / "config.txt", config_text);
  if (log) *log << config_text;

  const std::string checkpoint = (out / "checkpoint.bin").string();
  const bool deterministic = options.config.deterministic;

  auto run_phase = [&](int64_t epochs, const std::string& csv_name) {
    const fs::path csv_path = out / csv_name;
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw DataError("cannot write " + csv_path.string());
    csv << LossCsvHeader();
    state.config.epochs = epochs;
    while (state.epoch < epochs) {
      TrainState last_good = state;
      EpochStats stats;
      try {
        stats = TrainEpoch(state, images);
      } catch (const NumericalError&) {
        SaveCheckpoint(last_good, checkpoint);
        WriteCameraFile((out / "cameras.txt").string(),
                        ExportCameras(last_good, ds, train));
        throw;
      }
      csv << LossCsvRow(stats, deterministic);
      csv.flush();
      if (log && options.log_every > 0 &&
          (state.epoch % options.log_every == 0 || state.epoch == epochs)) {
        *log << "phase " << state.phase << " epoch " << state.epoch << "/" << epochs
             << " loss " << Fixed(stats.loss, "%.6f") << " fx "
             << Fixed(state.intrinsics().fx(), "%.2f") << " fy "
             << Fixed(state.intrinsics().fy(), "%.2f") << "\n";
      }
      if (options.checkpoint_every > 0 && state.epoch % options.checkpoint_every == 0) {
        SaveCheckpoint(state, checkpoint);
      }
    }
    SaveCheckpoint(state, checkpoint);
    if (!csv) throw DataError("failed writing " + csv_path.string());
  };

  run_phase(options.config.epochs, "loss.csv");
  if (options.refine) {
    fs::copy_file(checkpoint, out / "checkpoint_main.bin",
                  fs::copy_options::overwrite_existing);
    result.before_refine = state;
    state = Refine(state);
    run_phase(options.refine_epochs.value_or(options.config.epochs), "loss_refine.csv");
  }
  WriteCameraFile((out / "cameras.txt").string(), ExportCameras(state, ds, train));
  result.state = std::move(state);
  return result;
}

std::vector<Extrinsics> SpiralPath(std::span<const Extrinsics> poses, int count) {
  if (poses.empty()) throw std::invalid_argument("spiral: no poses");
  if (count < 1) throw std::invalid_argument("spiral: frame count must be >= 1");
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation_sum = Eigen::Matrix3d::Zero();
  for (const Extrinsics& p : poses) {
    center += p.t;
    rotation_sum += p.Rotation();
  }
  center /= static_cast<double>(poses.size());
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_sum,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0) u.col(2) *= -1;
  const Eigen::Matrix3d mean_rotation = u * svd.matrixV().transpose();

  // Radii follow the spread of the centres along the mean camera axes.
  Eigen::Vector3d radius = Eigen::Vector3d::Zero();
  for (const Extrinsics& p : poses) {
    radius = radius.cwiseMax((mean_rotation.transpose() * (p.t - center)).cwiseAbs());
  }
  const double floor = 1e-2 * std::max(1.0, center.norm());
  radius = radius.cwiseMax(floor);

  std::vector<Extrinsics> out;
  for (int k = 0; k < count; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / count;
    const Eigen::Vector3d offset(radius.x() * std::cos(angle),
                                 radius.y() * std::sin(angle),
                                 0.5 * radius.z() * std::sin(2.0 * angle));
    out.push_back(Extrinsics::FromRotation(mean_rotation,
                                           center + mean_rotation * offset));
  }
  return out;
}

std::vector<std::string> RunRender(const RenderOptions& options, std::ostream* log) {
  const int sources = options.train_index.has_value() +
                      options.camera_file.has_value() +
                      options.spiral_frames.has_value();
  if (sources != 1) {
    throw std::invalid_argument("render: give exactly one of a training index, "
                                "a camera file or a spiral frame count");
  }
  const TrainState state = LoadCheckpoint(options.checkpoint);
  Intrinsics intr = state.intrinsics();
  std::vector<NamedPose> targets;
  if (options.train_index) {
    const int i = *options.train_index;
    if (i < 0 || i >= state.camera_count()) {
      throw std::invalid_argument("render: training index " + std::to_string(i) +
                                  " out of range [0, " +
                                  std::to_string(state.camera_count()) + ")");
    }
    targets.push_back({"train_" + Padded(i, 3), state.pose(i)});
  } else if (options.camera_file) {
    const CameraFile cams = ReadCameraFile(*options.camera_file);
    if (cams.intrinsics) intr = *cams.intrinsics;
    for (const NamedPose& p : cams.poses) {
      targets.push_back({fs::path(p.name).stem().string(), p.pose});
    }
  } else {
    const int n = *options.spiral_frames;
    const std::vector<Extrinsics> path = SpiralPath(state.poses(), n);
    const int width = std::max(3, static_cast<int>(std::to_string(n - 1).size()));
    for (int k = 0; k < n; ++k) {
      targets.push_back({"spiral_" + Padded(k, width), path[static_cast<size_t>(k)]});
    }
  }

  const fs::path out(options.out_dir);
  fs::create_directories(out);
  std::vector<std::string> stems;
  for (const NamedPose& t : targets) {
    const RenderedView view = RenderImage(state.field, intr, t.pose,
                                          state.render_settings(), options.threads,
                                          options.chunk_rays);
    WritePpm((out / (t.name + ".ppm")).string(), Quantize8(view.color));
    WritePfm((out / (t.name + "_depth.pfm")).string(), view.depth);
    stems.push_back(t.name);
    if (log) *log << "rendered " << t.name << "\n";
  }
  return stems;
}

EvaluateResult Evaluate(const TrainState& state, const Dataset& dataset,
                        const EvaluateOptions& options) {
  const std::vector<int> train = dataset.TrainIndices();
  if (state.camera_count() != static_cast<int>(train.size())) {
    throw DataError("checkpoint has " + std::to_string(state.camera_count()) +
                    " cameras but the dataset has " + std::to_string(train.size()) +
                    " training images");
  }
  if (state.width != dataset.width || state.height != dataset.height) {
    throw DataError("checkpoint image size does not match the dataset");
  }
  EvaluateResult result;
  const std::vector<Extrinsics> estimate = state.poses();
  std::optional<Sim3<double>> to_reference;
  if (dataset.has_gt_cameras()) {
    std::vector<Extrinsics> reference;
    for (int i : train) reference.push_back(dataset.gt_poses[static_cast<size_t>(i)]);
    try {
      const AteMetrics ate = ComputeAte(estimate, reference);
      result.ate = ate;
      to_reference = ate.alignment;
      for (const Extrinsics& e : estimate) {
        result.aligned_trajectory.push_back(ate.alignment.Apply(e));
      }
    } catch (const EvalError& e) {
      result.warnings.push_back(std::string("trajectory alignment skipped: ") + e.what());
    }
    result.focal = ComputeFocalError(state.intrinsics(), *dataset.gt_intrinsics);
  } else {
    result.warnings.push_back(
        "dataset has no reference cameras: reporting image metrics only");
  }

  const std::vector<int> test = dataset.TestIndices();
  if (test.empty()) {
    result.warnings.push_back("dataset has no held-out images: no image metrics");
    result.mean_psnr = result.mean_ssim = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const RenderSettings settings = state.render_settings();
  const Intrinsics intr = state.intrinsics();
  for (int j : test) {
    Extrinsics init;
    if (to_reference) {
      init = to_reference->Inverse().Apply(dataset.gt_poses[static_cast<size_t>(j)]);
    } else {
      size_t nearest = 0;
      for (size_t k = 1; k < train.size(); ++k) {
        if (std::abs(train[k] - j) < std::abs(train[nearest] - j)) nearest = k;
      }
      init = estimate[nearest];
    }
    PoseAlignOptions align = options.align;
    align.seed = options.align.seed + static_cast<uint64_t>(j);
    align.threads = options.threads;
    const Image& target = dataset.images[static_cast<size_t>(j)];
    const PoseAlignResult aligned =
        TestTimePoseAlign(state.field, intr, settings, target, init, align);
    if (aligned.diverged) {
      result.warnings.push_back("pose alignment of '" +
                                dataset.names[static_cast<size_t>(j)] +
                                "' diverged; kept the best pose");
    }
    const Image rendered = Quantize8(
        RenderImage(state.field, intr, aligned.pose, settings, options.threads).color);
    ViewMetrics m;
    m.name = dataset.names[static_cast<size_t>(j)];
    m.psnr = Psnr(rendered, target);
    m.ssim = Ssim(rendered, target);
    m.initial_loss = aligned.initial_loss;
    m.aligned_loss = aligned.best_loss;
    result.mean_psnr += m.psnr / static_cast<double>(test.size());
    result.mean_ssim += m.ssim / static_cast<double>(test.size());
    result.views.push_back(std::move(m));
  }
  return result;
}

EvaluateResult RunEvaluate(const std::string& checkpoint, const std::string& dataset,
                           const std::string& out_dir, const EvaluateOptions& options,
                           std::ostream* log) {
  const TrainState state = LoadCheckpoint(checkpoint);
  const Dataset ds = LoadDataset(dataset);
  EvaluateResult r = Evaluate(state, ds, options);

  const fs::path out(out_dir);
  fs::create_directories(out);
  const bool cameras = r.ate.has_value();
  std::ostringstream csv;
  csv << "scene,psnr,ssim";
  if (cameras) csv << ",rot_deg,trans,focal_dx,focal_dy";
  csv << "\n" << options.scene << ',' << Fixed(r.mean_psnr, "%.6f") << ','
      << Fixed(r.mean_ssim, "%.6f");
  if (cameras) {
    csv << ',' << Fixed(r.ate->rotation_deg, "%.6f") << ','
        << Fixed(r.ate->translation, "%.6g") << ',' << Fixed(r.focal->dx, "%.4f")
        << ',' << Fixed(r.focal->dy, "%.4f");
  }
  csv << "\n";
  WriteText(out / "metrics.csv", csv.str());

  nlohmann::json summary;
  summary["scene"] = options.scene;
  summary["psnr"] = r.mean_psnr;
  summary["ssim"] = r.mean_ssim;
  if (cameras) {
    summary["rot_deg"] = r.ate->rotation_deg;
    summary["trans"] = r.ate->translation;
    summary["sim3_scale"] = r.ate->alignment.scale;
  }
  if (r.focal) {
    summary["focal_dx"] = r.focal->dx;
    summary["focal_dy"] = r.focal->dy;
  }
  summary["views"] = nlohmann::json::array();
  for (const ViewMetrics& v : r.views) {
    summary["views"].push_back({{"name", v.name},
                                {"psnr", v.psnr},
                                {"ssim", v.ssim},
                                {"initial_loss", v.initial_loss},
                                {"aligned_loss", v.aligned_loss}});
  }
  summary["warnings"] = r.warnings;
  WriteText(out / "summary.json", summary.dump(2) + "\n");

  if (cameras) {
    CameraFile traj;
    traj.intrinsics = state.intrinsics();
    const std::vector<int> train = ds.TrainIndices();
    for (size_t k = 0; k < train.size(); ++k) {
      traj.poses.push_back({ds.names[static_cast<size_t>(train[k])], r.aligned_trajectory[k]});
    }
    WriteCameraFile((out / "trajectory_aligned.txt").string(), traj);
  }
  if (log) *log << csv.str();
  return r;
}

}  // namespace jointnerf
