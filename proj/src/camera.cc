#include "jointnerf/camera.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace jointnerf {

Intrinsics Intrinsics::FromFocal(double fx, double fy, int width, int height) {
  if (fx <= 0.0 || fy <= 0.0 || width <= 0 || height <= 0) {
    throw CameraError("intrinsics: focal lengths and image size must be positive");
  }
  Intrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.sx_root = std::sqrt(fx / width);
  intr.sy_root = std::sqrt(fy / height);
  return intr;
}

Extrinsics Extrinsics::FromRotation(const Eigen::Matrix3d& r,
                                    const Eigen::Vector3d& t) {
  Extrinsics e;
  e.phi = RotationLog(r);
  e.t = t;
  return e;
}

Ray RayForPixel(double u, double v, const Intrinsics& intr,
                const Extrinsics& extr, double near, double far) {
  if (!(u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height)) {
    throw CameraError("pixel (" + std::to_string(u) + ", " +
                      std::to_string(v) + ") outside " +
                      std::to_string(intr.width) + "x" +
                      std::to_string(intr.height) + " image");
  }
  Ray ray;
  ray.origin = extr.t;
  ray.direction =
      (extr.Rotation() * PixelDirection<double>(u, v, intr)).normalized();
  ray.near = near;
  ray.far = far;
  return ray;
}

CameraSet InitCameras(int count, int width, int height) {
  if (count < 1) throw CameraError("init_cameras: need at least one image");
  if (width <= 0 || height <= 0) {
    throw CameraError("init_cameras: image size must be positive");
  }
  CameraSet set;
  set.intrinsics.width = width;
  set.intrinsics.height = height;
  set.poses.assign(static_cast<size_t>(count), Extrinsics{});
  return set;
}

Tensor RodriguesExp(Graph& graph, Tensor phi, bool transposed) {
  const Tensor angle2 = Sum(Mul(phi, phi));
  Tensor a;
  Tensor b;
  if (angle2.value()(0, 0) < kSmallAngle * kSmallAngle) {
    a = Add(Mul(angle2, -1.0 / 6.0), 1.0);
    b = Add(Mul(angle2, -1.0 / 24.0), 0.5);
  } else {
    const Tensor angle = Power(angle2, 0.5);
    a = Mul(Sin(angle), Power(angle, -1.0));
    b = Mul(Add(Neg(Cos(angle)), 1.0), Power(angle2, -1.0));
  }
  // K^T = -K while K^2 is symmetric.
  if (transposed) a = Neg(a);

  const Tensor zero = graph.Scalar(0.0);
  const Tensor p0 = Column(phi, 0);
  const Tensor p1 = Column(phi, 1);
  const Tensor p2 = Column(phi, 2);
  const Tensor k = Concat({Concat({zero, Neg(p2), p1}, Axis::kCols),
                           Concat({p2, zero, Neg(p0)}, Axis::kCols),
                           Concat({Neg(p1), p0, zero}, Axis::kCols)},
                          Axis::kRows);
  const Tensor k2 = MatMul(k, k);
  const Shape s3{3, 3};
  const Tensor identity = graph.Constant(Matrix::Identity(3, 3));
  return Add(identity, Add(Mul(Broadcast(a, s3), k), Mul(Broadcast(b, s3), k2)));
}

RayBundle BuildRays(Graph& graph, Tensor phi, Tensor t, Tensor focal_root,
                    std::span<const Pixel> pixels, int width, int height) {
  const auto m = static_cast<Eigen::Index>(pixels.size());
  Matrix x_num(m, 1);
  Matrix y_num(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Pixel& p = pixels[static_cast<size_t>(i)];
    if (!(p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height)) {
      throw CameraError("pixel (" + std::to_string(p.u) + ", " +
                        std::to_string(p.v) + ") outside image");
    }
    // (u - W/2) / fx with fx = s^2 W, so the focal enters as s^-2.
    x_num(i, 0) = (p.u - 0.5 * width) / width;
    y_num(i, 0) = -(p.v - 0.5 * height) / height;
  }
  const Shape col{m, 1};
  const Tensor inv_sx2 = Power(Column(focal_root, 0), -2.0);
  const Tensor inv_sy2 = Power(Column(focal_root, 1), -2.0);
  const Tensor dx = Mul(graph.Constant(std::move(x_num)), Broadcast(inv_sx2, col));
  const Tensor dy = Mul(graph.Constant(std::move(y_num)), Broadcast(inv_sy2, col));
  const Tensor dz = graph.Constant(Matrix::Constant(m, 1, -1.0));
  const Tensor cam_dirs = Concat({dx, dy, dz}, Axis::kCols);

  const Tensor world = MatMul(cam_dirs, RodriguesExp(graph, phi, true));
  const Tensor inv_norm = Power(Sum(Mul(world, world), Axis::kCols), -0.5);
  RayBundle rays;
  rays.directions = Mul(world, Broadcast(inv_norm, {m, 3}));
  rays.origins = Broadcast(t, {m, 3});
  return rays;
}

namespace {

std::string StripComment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CameraFile ParseCameraText(const std::string& text) {
  CameraFile file;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(StripComment(line));
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    auto number = [&](const std::string& tok) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw CameraError("camera file line " + std::to_string(line_no) +
                          ": expected a number, got '" + tok + "'");
      }
      return v;
    };
    if (tokens.size() == 4) {
      if (file.intrinsics) {
        throw CameraError("camera file line " + std::to_string(line_no) +
                          ": duplicate intrinsics line");
      }
      Intrinsics intr;
      intr.sx_root = number(tokens[0]);
      intr.sy_root = number(tokens[1]);
      const double w = number(tokens[2]);
      const double h = number(tokens[3]);
      if (w <= 0 || h <= 0 || w != std::floor(w) || h != std::floor(h)) {
        throw CameraError("camera file line " + std::to_string(line_no) +
                          ": image size must be positive integers");
      }
      intr.width = static_cast<int>(w);
      intr.height = static_cast<int>(h);
      file.intrinsics = intr;
    } else if (tokens.size() == 7) {
      NamedPose pose;
      pose.name = tokens[0];
      for (int k = 0; k < 3; ++k) {
        pose.pose.phi(k) = number(tokens[static_cast<size_t>(1 + k)]);
        pose.pose.t(k) = number(tokens[static_cast<size_t>(4 + k)]);
      }
      file.poses.push_back(std::move(pose));
    } else {
      throw CameraError("camera file line " + std::to_string(line_no) +
                        ": expected 4 (intrinsics) or 7 (pose) fields, got " +
                        std::to_string(tokens.size()));
    }
  }
  return file;
}

CameraFile ReadCameraFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CameraError("cannot open camera file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCameraText(ss.str());
}

std::string FormatCameraText(const CameraFile& cameras) {
  std::ostringstream out;
  out << "# sx_root sy_root W H\n";
  if (cameras.intrinsics) {
    const Intrinsics& k = *cameras.intrinsics;
    out << FormatDouble(k.sx_root) << ' ' << FormatDouble(k.sy_root) << ' '
        << k.width << ' ' << k.height << '\n';
  }
  out << "# image_name phi_x phi_y phi_z t_x t_y t_z\n";
  for (const NamedPose& p : cameras.poses) {
    out << p.name;
    for (int k = 0; k < 3; ++k) out << ' ' << FormatDouble(p.pose.phi(k));
    for (int k = 0; k < 3; ++k) out << ' ' << FormatDouble(p.pose.t(k));
    out << '\n';
  }
  return out.str();
}

void WriteCameraFile(const std::string& path, const CameraFile& cameras) {
  std::ofstream out(path);
  if (!out) throw CameraError("cannot write camera file " + path);
  out << FormatCameraText(cameras);
  if (!out) throw CameraError("failed writing camera file " + path);
}

}  // namespace jointnerf
