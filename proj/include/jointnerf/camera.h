#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "jointnerf/autodiff.h"

namespace jointnerf {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

// Below this rotation angle the Rodrigues coefficients switch to their
// two-term Taylor series (sin a / a and (1 - cos a) / a^2 are 0/0 at a = 0).
inline constexpr double kSmallAngle = 1e-6;

template <typename Scalar>
Matrix3<Scalar> Skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> k;
  k << Scalar(0), -v(2), v(1),
       v(2), Scalar(0), -v(0),
       -v(1), v(0), Scalar(0);
  return k;
}

// Exponential map so(3) -> SO(3), axis-angle vector to rotation matrix.
template <typename Scalar>
Matrix3<Scalar> RodriguesExp(const Vector3<Scalar>& phi) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar angle2 = phi.squaredNorm();
  Scalar a;
  Scalar b;
  if (angle2 < Scalar(kSmallAngle * kSmallAngle)) {
    a = Scalar(1) - angle2 / Scalar(6);
    b = Scalar(0.5) - angle2 / Scalar(24);
  } else {
    const Scalar angle = sqrt(angle2);
    a = sin(angle) / angle;
    b = (Scalar(1) - cos(angle)) / angle2;
  }
  const Matrix3<Scalar> k = Skew(phi);
  return Matrix3<Scalar>::Identity() + a * k + b * k * k;
}

// Logarithm map SO(3) -> so(3). Goes through the unit quaternion, which is
// well conditioned up to and including angle pi.
template <typename Scalar>
Vector3<Scalar> RotationLog(const Matrix3<Scalar>& rotation) {
  using std::atan2;
  Eigen::Quaternion<Scalar> q(rotation);
  q.normalize();
  if (q.w() < Scalar(0)) q.coeffs() = -q.coeffs();
  const Vector3<Scalar> v = q.vec();
  const Scalar n = v.norm();
  if (n < Scalar(kSmallAngle)) {
    // angle = 2 atan(n / w) ~ 2 n / w
    return (Scalar(2) / q.w()) * v;
  }
  const Scalar angle = Scalar(2) * atan2(n, q.w());
  return (angle / n) * v;
}

template <typename Scalar>
bool IsRotation(const Matrix3<Scalar>& r, double tolerance) {
  using std::abs;
  const Scalar orth = (r.transpose() * r - Matrix3<Scalar>::Identity())
                          .cwiseAbs()
                          .maxCoeff();
  return orth <= Scalar(tolerance) &&
         abs(r.determinant() - Scalar(1)) <= Scalar(tolerance);
}

// Rotation angle between two rotations in radians, arccos((tr(A^T B) - 1) / 2)
// evaluated through atan2 so that it stays accurate near zero and pi.
template <typename Scalar>
Scalar RotationAngleBetween(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  using std::atan2;
  const Matrix3<Scalar> r = a.transpose() * b;
  const Vector3<Scalar> axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0),
                             r(1, 0) - r(0, 1));
  const Scalar c = (r.trace() - Scalar(1)) / Scalar(2);
  return atan2(axis.norm() / Scalar(2), c);
}

// Pinhole intrinsics shared by every image. Focal lengths are stored as the
// square roots of their scale relative to the image size:
// fx = sx_root^2 * W, fy = sy_root^2 * H. The principal point is the centre.
struct Intrinsics {
  double sx_root = 1.0;
  double sy_root = 1.0;
  int width = 0;
  int height = 0;

  double fx() const { return sx_root * sx_root * width; }
  double fy() const { return sy_root * sy_root * height; }
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }

  static Intrinsics FromFocal(double fx, double fy, int width, int height);
};

// Camera-to-world pose: world = R(phi) * camera + t. The camera centre is t.
struct Extrinsics {
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Matrix3d Rotation() const { return RodriguesExp(phi); }
  static Extrinsics FromRotation(const Eigen::Matrix3d& r,
                                 const Eigen::Vector3d& t);
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = -Eigen::Vector3d::UnitZ();
  double near = 0.0;
  double far = 1.0;

  Eigen::Vector3d At(double h) const { return origin + h * direction; }
};

class CameraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Camera-frame direction through pixel (u, v), before normalisation.
// x right, y up, camera looking down -z.
template <typename Scalar>
Vector3<Scalar> PixelDirection(double u, double v, const Intrinsics& intr) {
  return Vector3<Scalar>(Scalar((u - intr.cx()) / intr.fx()),
                         Scalar(-(v - intr.cy()) / intr.fy()), Scalar(-1));
}

// Throws CameraError when (u, v) lies outside [0, W) x [0, H).
Ray RayForPixel(double u, double v, const Intrinsics& intr,
                const Extrinsics& extr, double near = 0.0, double far = 1.0);

// n identity poses at the origin and fx = W, fy = H.
struct CameraSet {
  Intrinsics intrinsics;
  std::vector<Extrinsics> poses;
};
CameraSet InitCameras(int count, int width, int height);

// Pixel coordinate used for ray construction.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

// Differentiable ray bundle for one camera: origins and unit directions,
// each M x 3, as graph tensors.
struct RayBundle {
  Tensor origins;
  Tensor directions;
};

// Rodrigues map on a 1x3 axis-angle tensor. With `transposed` the result is
// R^T, built as I - a K + b K^2 so no transpose op is needed.
Tensor RodriguesExp(Graph& graph, Tensor phi, bool transposed = false);

// Rays for `pixels` under camera (phi, t: 1x3, focal_root: 1x2 holding
// [sx_root, sy_root]). Differentiable with respect to all three.
RayBundle BuildRays(Graph& graph, Tensor phi, Tensor t, Tensor focal_root,
                    std::span<const Pixel> pixels, int width, int height);

// Whitespace-separated text: an optional intrinsics line
// `sx_root sy_root W H` and pose lines `name phi_x phi_y phi_z t_x t_y t_z`.
// '#' starts a comment.
struct NamedPose {
  std::string name;
  Extrinsics pose;
};
struct CameraFile {
  std::optional<Intrinsics> intrinsics;
  std::vector<NamedPose> poses;
};

CameraFile ReadCameraFile(const std::string& path);
CameraFile ParseCameraText(const std::string& text);
void WriteCameraFile(const std::string& path, const CameraFile& cameras);
std::string FormatCameraText(const CameraFile& cameras);

}  // namespace jointnerf
