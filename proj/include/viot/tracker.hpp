#pragma once

#include "viot/backend.hpp"
#include "viot/geom.hpp"
#include "viot/motion.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>

namespace viot::tracker {

using backend::PoseResponse;
using geom::CameraIntrinsics;
using geom::Mat3;
using geom::Pose;
using geom::Vec3;
using motion::FrameEvent;
using motion::ImuSample;

struct StateVector {
  Pose cam_from_world;
  Vec3 velocity_world = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();          // rad/s, body frame
  Vec3 accel_bias_world = Vec3::Zero();   // m/s^2, world frame
  double t = 0.0;
  bool pose_valid = true;
};

enum class TrackerStatus { finePose, wrongPose, trackingLost };

struct PiaConfig {
  double px_e = 10.0;
  double px_m = 10.0;
  double base_rate = 30.0;
  double area_divisor = 100.0;
};

inline double thr_2d(const PiaConfig& cfg, double frame_rate) {
  return cfg.px_e + cfg.px_m * cfg.base_rate / frame_rate;
}

/// Algorithm: project the box with pose_now; any vertex behind the camera or
/// the in-frame hull area under frame_area/divisor is a lost track; otherwise
/// the mean vertex offset against pose_last at or above THR_2d is a wrong
/// pose. Area is checked first.
TrackerStatus pia_inspect(const Pose& pose_now, const Pose& pose_last,
                          std::span<const Vec3, 8> bbox_obj, const CameraIntrinsics& k,
                          double frame_rate, const PiaConfig& cfg);

/// R_bias = R_imu * R_real^-1, decomposed to XYZ Euler angles over dt.
Vec3 bscm_gyro_bias(const Mat3& r_imu, const Mat3& r_real, double dt);

struct RefinementRecord {
  double t_prev = 0.0;
  double t_curr = 0.0;
  Pose backend_pose_prev;  // world-frame: translation is the camera position
  Pose backend_pose_curr;
};

struct VelocityBias {
  Vec3 v_avg = Vec3::Zero();
  Vec3 v_bias = Vec3::Zero();
  Vec3 a_bias = Vec3::Zero();
};

/// V_avg = (T_curr - T_prev) / (t_curr - t_prev); V_bias = V_imu_mid - V_avg;
/// a_bias = V_bias / (t_curr - t_prev). Throws on a degenerate interval.
VelocityBias bscm_accel_bias(const RefinementRecord& rec, const Vec3& v_imu_mid);

/// Static initialization: gyro bias is the sample mean of omega; the world
/// accel bias is R * mean(accel) - g with R the initial world-from-camera
/// rotation (identity when unavailable). Needs at least 50 samples.
std::pair<Vec3, Vec3> init_static(std::span<const ImuSample> samples, const Vec3& gravity,
                                  const Mat3& r_world_from_cam = Mat3::Identity());

struct PendingRequest {
  std::uint64_t request_id = 0;
  double t0 = 0.0;
  StateVector state_at_t0;
  bool reinit = false;
};

struct OutboundRequest {
  std::uint64_t request_id = 0;
  double t0 = 0.0;
  bool reinit = false;
};

struct TrackerConfig {
  CameraIntrinsics intrinsics;
  std::array<Vec3, 8> bbox_obj;  // object-frame bounding cuboid corners
  Pose world_from_obj;
  PiaConfig pia;
  double frame_rate = 30.0;
  double imu_rate = 200.0;
  Vec3 gravity = Vec3(0.0, 0.0, 9.80665);
  // Exponential smoothing on each correction: alpha applied to the measured
  // gyro/accel bias increments, and the blend weight pulling the rebased
  // velocity toward Eq.-11's V_avg. Damped below 1 because the backend's
  // white pose noise differentiates into large per-cycle measurements.
  double gyro_bias_smoothing = 0.5;
  double accel_bias_smoothing = 0.05;
  double velocity_blend = 0.5;
  bool enable_pia = true;
  bool enable_bscm = true;
  bool enable_requests = true;
  std::size_t buffer_capacity = 4096;  // >= max round trip at the IMU rate
};

/// The frontend client: pose propagation at IMU rate, per-frame inspection,
/// and refinement from backend responses. Single-writer state machine;
/// inputs must arrive in timestamp order.
class Tracker {
 public:
  Tracker(const TrackerConfig& cfg, const StateVector& initial);

  /// PPM step. Throws on a non-monotonic timestamp.
  void on_imu(const ImuSample& s);

  /// PIM + PRM trigger. Returns the request to send, if any.
  std::optional<OutboundRequest> on_frame(const FrameEvent& frame);

  /// PRM response path. Returns true when the response was applied,
  /// false when it was stale/cancelled/failed and the state is unchanged.
  bool on_response(const PoseResponse& resp);

  const StateVector& state() const { return state_; }
  TrackerStatus last_status() const { return last_status_; }
  bool lost() const { return lost_; }
  bool has_pending() const { return pending_.has_value(); }
  const std::optional<PendingRequest>& pending() const { return pending_; }
  Pose cam_from_obj() const;
  std::uint64_t refinement_count() const { return refinements_; }
  std::uint64_t lost_count() const { return lost_events_; }

 private:
  void propagate(const ImuSample& s);
  std::optional<OutboundRequest> issue_request(double t0, bool reinit);
  Vec3 velocity_at(double t) const;

  TrackerConfig cfg_;
  StateVector state_;
  std::deque<ImuSample> buffer_;
  std::deque<std::pair<double, Vec3>> velocity_history_;  // (interval midpoint, V)
  std::optional<PendingRequest> pending_;

  struct BackendAnchor {
    double t0 = 0.0;
    Pose cam_from_world;
    Mat3 r_world_from_cam;
    Vec3 position_world;
  };
  std::optional<BackendAnchor> prev_backend_;

  Pose last_frame_pose_;  // cam_from_obj at the previous inspected frame
  bool have_last_frame_ = false;
  TrackerStatus last_status_ = TrackerStatus::finePose;
  bool lost_ = false;
  int responses_since_lost_ = 0;
  std::uint64_t next_request_id_ = 1;
  std::uint64_t refinements_ = 0;
  std::uint64_t lost_events_ = 0;
};

}  // namespace viot::tracker
