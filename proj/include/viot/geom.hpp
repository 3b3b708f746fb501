#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace viot::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& v);

/// Project an almost-orthonormal matrix back onto SO(3) (Gram-Schmidt).
Mat3 orthonormalize(const Mat3& m);

/// Orthonormality + determinant check, max-norm tolerance.
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// One gyroscope integration step: R * (I + sin(s)/s B + (1-cos(s))/s^2 B^2)
/// with B = skew(omega * dt) and s = |omega * dt|. Series expansion below
/// s = 1e-6. Result is re-orthonormalized.
Mat3 integrate_rotation(const Mat3& r, const Vec3& omega, double dt);

/// V' = V + dt * (R_next * accel - gravity).
Vec3 integrate_velocity(const Vec3& v, const Mat3& r_next, const Vec3& accel,
                        const Vec3& gravity, double dt);

/// T' = T + dt * V_next.
Vec3 integrate_translation(const Vec3& t, const Vec3& v_next, double dt);

/// Rotation about a unit axis by `angle` (Rodrigues closed form).
Mat3 axis_angle(const Vec3& axis, double angle);

/// Rotation angle in [0, pi]: arccos((trace - 1) / 2), clamped.
double rotation_angle(const Mat3& r);

/// Logarithm map of SO(3); returns axis * angle.
Vec3 log_rotation(const Mat3& r);

struct EulerXYZ {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Decompose R = Rx(x) * Ry(y) * Rz(z). Gimbal lock (|y| = pi/2) resolved
/// with x = 0.
EulerXYZ euler_xyz(const Mat3& r);

Mat3 from_euler_xyz(const EulerXYZ& e);

/// Rigid transform, camera-from-world by convention: p_cam = R p_world + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// compose(A, B): rotation = Ra Rb, translation = Ra tb + ta.
Pose compose(const Pose& outer, const Pose& inner);

Pose inverse(const Pose& p);

/// Apply the transform to a point.
Vec3 transform(const Pose& p, const Vec3& point);

struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole projection; nullopt when the point lands behind the camera
/// (z <= 1e-6 m in the camera frame).
std::optional<Pixel> project(const CameraIntrinsics& k, const Pose& cam_from_obj,
                             const Vec3& point_obj);

/// Area of the convex hull of the points; 0 for fewer than 3 distinct points.
double polygon_hull_area(std::span<const Pixel> points);

/// Convex hull area clipped to the rectangle [0,w] x [0,h].
double clipped_hull_area(std::span<const Pixel> points, double width, double height);

/// The 8 corners of an axis-aligned cuboid with the given half extents.
std::array<Vec3, 8> cuboid_corners(const Vec3& half_extents);

}  // namespace viot::geom
