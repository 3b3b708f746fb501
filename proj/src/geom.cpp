#include "viot/geom.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace viot::geom {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Mat3 orthonormalize(const Mat3& m) {
  // Gram-Schmidt on the rows, third row from the cross product so the
  // determinant stays +1.
  Vec3 r0 = m.row(0).normalized();
  Vec3 r1 = (m.row(1).transpose() - r0 * r0.dot(m.row(1))).normalized();
  Vec3 r2 = r0.cross(r1);
  Mat3 out;
  out.row(0) = r0;
  out.row(1) = r1;
  out.row(2) = r2;
  return out;
}

bool is_rotation(const Mat3& r, double tol) {
  const Mat3 err = r.transpose() * r - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 integrate_rotation(const Mat3& r, const Vec3& omega, double dt) {
  const Vec3 w = omega * dt;
  const double sigma = w.norm();
  const Mat3 b = skew(w);
  double s1, s2;
  if (sigma < 1e-6) {
    const double s2q = sigma * sigma;
    s1 = 1.0 - s2q / 6.0;
    s2 = 0.5 - s2q / 24.0;
  } else {
    s1 = std::sin(sigma) / sigma;
    s2 = (1.0 - std::cos(sigma)) / (sigma * sigma);
  }
  const Mat3 delta = Mat3::Identity() + s1 * b + s2 * (b * b);
  return orthonormalize(r * delta);
}

Vec3 integrate_velocity(const Vec3& v, const Mat3& r_next, const Vec3& accel,
                        const Vec3& gravity, double dt) {
  return v + dt * (r_next * accel - gravity);
}

Vec3 integrate_translation(const Vec3& t, const Vec3& v_next, double dt) {
  return t + dt * v_next;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 u = axis.normalized();
  const Mat3 k = skew(u);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

Vec3 log_rotation(const Mat3& r) {
  const double angle = rotation_angle(r);
  if (angle < 1e-10) {
    // First-order: vee of the skew part.
    return Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)) * 0.5;
  }
  if (angle > M_PI - 1e-6) {
    // Near pi, the skew part vanishes; recover the axis from the symmetric
    // part R = I + (1 - cos a) (uu^T - I) + ...
    const Mat3 s = 0.5 * (r + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(s(0, 0), 0.0)), std::sqrt(std::max(s(1, 1), 0.0)),
              std::sqrt(std::max(s(2, 2), 0.0)));
    // Fix signs against the largest off-diagonal terms.
    int imax = 0;
    if (axis.y() > axis.x()) imax = 1;
    if (axis.z() > axis[imax]) imax = 2;
    for (int i = 0; i < 3; ++i) {
      if (i != imax && s(imax, i) < 0.0) axis[i] = -axis[i];
    }
    const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (axis.dot(vee) < 0.0) axis = -axis;
    return axis.normalized() * angle;
  }
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return vee * (angle / (2.0 * std::sin(angle)));
}

EulerXYZ euler_xyz(const Mat3& r) {
  EulerXYZ e;
  const double sy = std::clamp(r(0, 2), -1.0, 1.0);
  e.y = std::asin(sy);
  if (std::abs(sy) > 1.0 - 1e-12) {
    e.x = 0.0;
    e.z = std::atan2(r(1, 0), r(1, 1));
  } else {
    e.x = std::atan2(-r(1, 2), r(2, 2));
    e.z = std::atan2(-r(0, 1), r(0, 0));
  }
  return e;
}

Mat3 from_euler_xyz(const EulerXYZ& e) {
  return axis_angle(Vec3::UnitX(), e.x) * axis_angle(Vec3::UnitY(), e.y) *
         axis_angle(Vec3::UnitZ(), e.z);
}

Pose compose(const Pose& outer, const Pose& inner) {
  Pose out;
  out.rotation = outer.rotation * inner.rotation;
  out.translation = outer.rotation * inner.translation + outer.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 transform(const Pose& p, const Vec3& point) {
  return p.rotation * point + p.translation;
}

std::optional<Pixel> project(const CameraIntrinsics& k, const Pose& cam_from_obj,
                             const Vec3& point_obj) {
  const Vec3 pc = transform(cam_from_obj, point_obj);
  if (pc.z() <= 1e-6) return std::nullopt;
  return Pixel{k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

namespace {

double shoelace(const std::vector<Pixel>& poly) {
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Pixel& p = poly[i];
    const Pixel& q = poly[(i + 1) % poly.size()];
    a += p.u * q.v - q.u * p.v;
  }
  return std::abs(a) * 0.5;
}

double cross2(const Pixel& o, const Pixel& a, const Pixel& b) {
  return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

// Andrew's monotone chain.
std::vector<Pixel> convex_hull(std::span<const Pixel> points) {
  std::vector<Pixel> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Pixel& a, const Pixel& b) {
    return a.u < b.u || (a.u == b.u && a.v < b.v);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Pixel& a, const Pixel& b) {
                          return a.u == b.u && a.v == b.v;
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Pixel> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Sutherland-Hodgman against one half-plane keep(p) >= 0.
template <typename Keep, typename Clip>
std::vector<Pixel> clip_edge(const std::vector<Pixel>& poly, Keep keep, Clip intersect) {
  std::vector<Pixel> out;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Pixel& cur = poly[i];
    const Pixel& prev = poly[(i + n - 1) % n];
    const bool cin = keep(cur), pin = keep(prev);
    if (cin) {
      if (!pin) out.push_back(intersect(prev, cur));
      out.push_back(cur);
    } else if (pin) {
      out.push_back(intersect(prev, cur));
    }
  }
  return out;
}

Pixel lerp_u(const Pixel& a, const Pixel& b, double u) {
  const double t = (u - a.u) / (b.u - a.u);
  return Pixel{u, a.v + t * (b.v - a.v)};
}

Pixel lerp_v(const Pixel& a, const Pixel& b, double v) {
  const double t = (v - a.v) / (b.v - a.v);
  return Pixel{a.u + t * (b.u - a.u), v};
}

}  // namespace

double polygon_hull_area(std::span<const Pixel> points) {
  return shoelace(convex_hull(points));
}

double clipped_hull_area(std::span<const Pixel> points, double width, double height) {
  std::vector<Pixel> poly = convex_hull(points);
  if (poly.size() < 3) return 0.0;
  poly = clip_edge(poly, [](const Pixel& p) { return p.u >= 0.0; },
                   [](const Pixel& a, const Pixel& b) { return lerp_u(a, b, 0.0); });
  if (poly.size() < 3) return 0.0;
  poly = clip_edge(poly, [&](const Pixel& p) { return p.u <= width; },
                   [&](const Pixel& a, const Pixel& b) { return lerp_u(a, b, width); });
  if (poly.size() < 3) return 0.0;
  poly = clip_edge(poly, [](const Pixel& p) { return p.v >= 0.0; },
                   [](const Pixel& a, const Pixel& b) { return lerp_v(a, b, 0.0); });
  if (poly.size() < 3) return 0.0;
  poly = clip_edge(poly, [&](const Pixel& p) { return p.v <= height; },
                   [&](const Pixel& a, const Pixel& b) { return lerp_v(a, b, height); });
  return shoelace(poly);
}

std::array<Vec3, 8> cuboid_corners(const Vec3& h) {
  return {Vec3(-h.x(), -h.y(), -h.z()), Vec3(h.x(), -h.y(), -h.z()),
          Vec3(h.x(), h.y(), -h.z()),   Vec3(-h.x(), h.y(), -h.z()),
          Vec3(-h.x(), -h.y(), h.z()),  Vec3(h.x(), -h.y(), h.z()),
          Vec3(h.x(), h.y(), h.z()),    Vec3(-h.x(), h.y(), h.z())};
}

}  // namespace viot::geom
