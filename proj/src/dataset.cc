#include "jointnerf/dataset.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace jointnerf {

namespace fs = std::filesystem;

std::vector<int> Dataset::TrainIndices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (!IsTest(i)) out.push_back(i);
  }
  return out;
}

std::vector<int> Dataset::TestIndices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (IsTest(i)) out.push_back(i);
  }
  return out;
}

void Dataset::Validate() const {
  if (width <= 0 || height <= 0) throw DataError("dataset: invalid image size");
  if (!(near < far)) throw DataError("dataset: near bound must be below far");
  if (names.size() != images.size()) {
    throw DataError("dataset: image names and images differ in count");
  }
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != width || images[i].height != height) {
      throw DataError("dataset: image '" + names[i] + "' is " +
                      std::to_string(images[i].width) + "x" +
                      std::to_string(images[i].height) + ", expected " +
                      std::to_string(width) + "x" + std::to_string(height));
    }
  }
  if (!gt_poses.empty() && gt_poses.size() != images.size()) {
    throw DataError("dataset: ground-truth camera count does not match images");
  }
  if (!gt_depth.empty() && gt_depth.size() != images.size()) {
    throw DataError("dataset: ground-truth depth count does not match images");
  }
  if (!gt_opacity.empty() && gt_opacity.size() != images.size()) {
    throw DataError("dataset: ground-truth opacity count does not match images");
  }
}

namespace {

std::string Stem(const std::string& name) { return fs::path(name).stem().string(); }

// Maps are stored as 32-bit floats on disk.
ScalarImage RoundToFloat(ScalarImage image) {
  image.value = image.value.cast<float>().cast<double>();
  return image;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void SaveDataset(const Dataset& dataset, const std::string& dir) {
  dataset.Validate();
  const fs::path root(dir);
  fs::create_directories(root / "images");
  {
    std::ofstream m(root / "manifest.txt");
    if (!m) throw DataError("cannot write manifest in " + dir);
    m << "# dataset manifest\n";
    m << "width " << dataset.width << "\n";
    m << "height " << dataset.height << "\n";
    m << "near " << FormatDouble(dataset.near) << "\n";
    m << "far " << FormatDouble(dataset.far) << "\n";
    if (dataset.test_every > 0) {
      m << "split every " << dataset.test_every << "\n";
    } else {
      m << "split none\n";
    }
    for (const std::string& name : dataset.names) m << "image " << name << "\n";
    if (!m) throw DataError("failed writing manifest in " + dir);
  }
  for (size_t i = 0; i < dataset.images.size(); ++i) {
    WritePpm((root / "images" / dataset.names[i]).string(), dataset.images[i]);
  }
  if (dataset.has_gt_cameras()) {
    CameraFile cams;
    cams.intrinsics = dataset.gt_intrinsics;
    for (size_t i = 0; i < dataset.gt_poses.size(); ++i) {
      cams.poses.push_back({dataset.names[i], dataset.gt_poses[i]});
    }
    WriteCameraFile((root / "cameras_gt.txt").string(), cams);
  }
  if (!dataset.gt_depth.empty()) {
    fs::create_directories(root / "depth_gt");
    for (size_t i = 0; i < dataset.gt_depth.size(); ++i) {
      WritePfm((root / "depth_gt" / (Stem(dataset.names[i]) + ".pfm")).string(),
               dataset.gt_depth[i]);
    }
  }
  if (!dataset.gt_opacity.empty()) {
    fs::create_directories(root / "opacity_gt");
    for (size_t i = 0; i < dataset.gt_opacity.size(); ++i) {
      WritePfm((root / "opacity_gt" / (Stem(dataset.names[i]) + ".pfm")).string(),
               dataset.gt_opacity[i]);
    }
  }
}

Dataset LoadDataset(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream m(root / "manifest.txt");
  if (!m) throw DataError("missing manifest: " + (root / "manifest.txt").string());
  Dataset ds;
  bool have_w = false, have_h = false, have_near = false, have_far = false;
  std::string line;
  int line_no = 0;
  while (std::getline(m, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& why) {
      return DataError("manifest line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "width") {
      if (!(ls >> ds.width) || ds.width <= 0) throw fail("bad width");
      have_w = true;
    } else if (key == "height") {
      if (!(ls >> ds.height) || ds.height <= 0) throw fail("bad height");
      have_h = true;
    } else if (key == "near") {
      if (!(ls >> ds.near)) throw fail("bad near bound");
      have_near = true;
    } else if (key == "far") {
      if (!(ls >> ds.far)) throw fail("bad far bound");
      have_far = true;
    } else if (key == "split") {
      std::string rule;
      ls >> rule;
      if (rule == "none") {
        ds.test_every = 0;
      } else if (rule == "every") {
        if (!(ls >> ds.test_every) || ds.test_every < 1) throw fail("bad split period");
      } else {
        throw fail("unknown split rule '" + rule + "'");
      }
    } else if (key == "image") {
      std::string name;
      if (!(ls >> name)) throw fail("missing image name");
      ds.names.push_back(name);
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!have_w || !have_h || !have_near || !have_far) {
    throw DataError("manifest in " + dir + " lacks width/height/near/far");
  }
  if (ds.names.empty()) throw DataError("manifest in " + dir + " lists no images");

  for (const std::string& name : ds.names) {
    const fs::path p = root / "images" / name;
    if (!fs::exists(p)) throw DataError("missing image file: " + p.string());
    try {
      ds.images.push_back(ReadPpm(p.string()));
    } catch (const ImageIoError& e) {
      throw DataError(e.what());
    }
  }

  const fs::path cams_path = root / "cameras_gt.txt";
  if (fs::exists(cams_path)) {
    const CameraFile cams = ReadCameraFile(cams_path.string());
    if (!cams.intrinsics) throw DataError("cameras_gt.txt lacks an intrinsics line");
    if (cams.poses.size() != ds.names.size()) {
      throw DataError("cameras_gt.txt has " + std::to_string(cams.poses.size()) +
                      " poses for " + std::to_string(ds.names.size()) + " images");
    }
    ds.gt_intrinsics = cams.intrinsics;
    for (size_t i = 0; i < cams.poses.size(); ++i) {
      if (cams.poses[i].name != ds.names[i]) {
        throw DataError("cameras_gt.txt pose " + std::to_string(i) + " is for '" +
                        cams.poses[i].name + "', expected '" + ds.names[i] + "'");
      }
      ds.gt_poses.push_back(cams.poses[i].pose);
    }
  }
  auto load_maps = [&](const char* sub, std::vector<ScalarImage>& out) {
    if (!fs::exists(root / sub)) return;
    for (const std::string& name : ds.names) {
      out.push_back(ReadPfm((root / sub / (Stem(name) + ".pfm")).string()));
    }
  };
  load_maps("depth_gt", ds.gt_depth);
  load_maps("opacity_gt", ds.gt_opacity);
  ds.Validate();
  return ds;
}

Dataset MakeSyntheticDataset(const SynthOptions& options) {
  const SyntheticScene scene = SyntheticScene::Random(options.seed);
  const std::vector<Extrinsics> poses =
      MakeTrajectory(options.pattern, options.count, options.trajectory);
  const Intrinsics intr = Intrinsics::FromFocal(
      options.focal_scale * options.width, options.focal_scale * options.height,
      options.width, options.height);
  const auto range = HitRange(scene, intr, poses);
  if (!range) throw DataError("synthetic scene is not visible from any camera");

  Dataset ds;
  ds.width = options.width;
  ds.height = options.height;
  ds.near = 0.5 * range->first;
  ds.far = 1.5 * range->second;
  ds.test_every = options.test_every;
  ds.gt_intrinsics = intr;
  ds.gt_poses = poses;
  RenderSettings settings;
  settings.near = ds.near;
  settings.far = ds.far;
  settings.samples = options.samples;
  for (int i = 0; i < options.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.ppm", i);
    ds.names.push_back(name);
    const GroundTruthView view = RenderGroundTruth(
        scene, intr, poses[static_cast<size_t>(i)], settings, options.oversample,
        options.threads);
    ds.images.push_back(Quantize8(view.color));
    ds.gt_depth.push_back(RoundToFloat(view.depth));
    ds.gt_opacity.push_back(RoundToFloat(view.opacity));
  }
  return ds;
}

}  // namespace jointnerf
