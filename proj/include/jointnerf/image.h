#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "jointnerf/autodiff.h"

namespace jointnerf {

// RGB image in [0, 1]. Pixel (u, v) lives in row v * width + u of `rgb`.
struct Image {
  int width = 0;
  int height = 0;
  Matrix rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(Matrix::Zero(w * h, 3)) {}

  Eigen::Index index(int u, int v) const {
    return static_cast<Eigen::Index>(v) * width + u;
  }
  auto pixel(int u, int v) { return rgb.row(index(u, v)); }
  auto pixel(int u, int v) const { return rgb.row(index(u, v)); }

  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && rgb == o.rgb;
  }
};

// Single-channel float map, value(v, u).
struct ScalarImage {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd value;

  ScalarImage() = default;
  ScalarImage(int w, int h)
      : width(w), height(h), value(Eigen::MatrixXd::Zero(h, w)) {}
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rounds each channel of clamp(x, 0, 1) to the nearest of 256 levels.
Image Quantize8(const Image& image);

// Binary P6, maxval 255, linear quantisation (no gamma).
void WritePpm(const std::string& path, const Image& image);
Image ReadPpm(const std::string& path);

// Grayscale PFM ("Pf"), little-endian (scale -1.0), rows bottom to top.
void WritePfm(const std::string& path, const ScalarImage& image);
ScalarImage ReadPfm(const std::string& path);

}  // namespace jointnerf
