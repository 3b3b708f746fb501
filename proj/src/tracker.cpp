#include "viot/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace viot::tracker {

TrackerStatus pia_inspect(const Pose& pose_now, const Pose& pose_last,
                          std::span<const Vec3, 8> bbox_obj, const CameraIntrinsics& k,
                          double frame_rate, const PiaConfig& cfg) {
  if (frame_rate <= 0.0) throw std::invalid_argument("frame_rate must be > 0");

  std::array<geom::Pixel, 8> now_px;
  for (int i = 0; i < 8; ++i) {
    const auto p = geom::project(k, pose_now, bbox_obj[i]);
    if (!p) return TrackerStatus::trackingLost;
    now_px[static_cast<size_t>(i)] = *p;
  }
  const double frame_area = static_cast<double>(k.width) * static_cast<double>(k.height);
  const double thr_area = frame_area / cfg.area_divisor;
  const double area = geom::clipped_hull_area(now_px, k.width, k.height);
  if (area < thr_area) return TrackerStatus::trackingLost;

  double offset = 0.0;
  for (int i = 0; i < 8; ++i) {
    const auto p = geom::project(k, pose_last, bbox_obj[i]);
    if (!p) return TrackerStatus::wrongPose;
    const double du = now_px[static_cast<size_t>(i)].u - p->u;
    const double dv = now_px[static_cast<size_t>(i)].v - p->v;
    offset += std::sqrt(du * du + dv * dv);
  }
  offset /= 8.0;
  if (offset >= thr_2d(cfg, frame_rate)) return TrackerStatus::wrongPose;
  return TrackerStatus::finePose;
}

Vec3 bscm_gyro_bias(const Mat3& r_imu, const Mat3& r_real, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  const Mat3 r_bias = r_imu * r_real.transpose();
  const geom::EulerXYZ e = geom::euler_xyz(r_bias);
  return Vec3(e.x, e.y, e.z) / dt;
}

VelocityBias bscm_accel_bias(const RefinementRecord& rec, const Vec3& v_imu_mid) {
  const double dt = rec.t_curr - rec.t_prev;
  if (dt < 1e-6) throw std::invalid_argument("degenerate refinement interval");
  VelocityBias out;
  out.v_avg = (rec.backend_pose_curr.translation - rec.backend_pose_prev.translation) / dt;
  out.v_bias = v_imu_mid - out.v_avg;
  out.a_bias = out.v_bias / dt;
  return out;
}

std::pair<Vec3, Vec3> init_static(std::span<const ImuSample> samples, const Vec3& gravity,
                                  const Mat3& r_world_from_cam) {
  if (samples.size() < 50) throw std::invalid_argument("init_static needs >= 50 samples");
  Vec3 mean_omega = Vec3::Zero();
  Vec3 mean_accel = Vec3::Zero();
  for (const ImuSample& s : samples) {
    mean_omega += s.omega;
    mean_accel += s.accel;
  }
  mean_omega /= static_cast<double>(samples.size());
  mean_accel /= static_cast<double>(samples.size());
  return {mean_omega, r_world_from_cam * mean_accel - gravity};
}

Tracker::Tracker(const TrackerConfig& cfg, const StateVector& initial)
    : cfg_(cfg), state_(initial) {
  velocity_history_.emplace_back(state_.t, state_.velocity_world);
}

Pose Tracker::cam_from_obj() const {
  return geom::compose(state_.cam_from_world, cfg_.world_from_obj);
}

void Tracker::propagate(const ImuSample& s) {
  const double dt = s.t - state_.t;
  const Mat3 r_wc = state_.cam_from_world.rotation.transpose();
  const Vec3 position = -(r_wc * state_.cam_from_world.translation);

  const Mat3 r_wc_next = geom::integrate_rotation(r_wc, s.omega - state_.gyro_bias, dt);
  const Vec3 v_next = state_.velocity_world +
                      dt * (r_wc_next * s.accel - cfg_.gravity - state_.accel_bias_world);
  const Vec3 p_next = geom::integrate_translation(position, v_next, dt);

  state_.cam_from_world.rotation = r_wc_next.transpose();
  state_.cam_from_world.translation = -(state_.cam_from_world.rotation * p_next);
  state_.velocity_world = v_next;

  // The discrete velocity approximates the mean over the step; stamp it at
  // the interval midpoint for interpolation.
  velocity_history_.emplace_back(0.5 * (state_.t + s.t), v_next);
  state_.t = s.t;
}

void Tracker::on_imu(const ImuSample& s) {
  if (s.t <= state_.t) throw std::invalid_argument("IMU timestamp not increasing");
  buffer_.push_back(s);
  while (buffer_.size() > cfg_.buffer_capacity) buffer_.pop_front();
  propagate(s);
  while (velocity_history_.size() > 2 * cfg_.buffer_capacity) velocity_history_.pop_front();
}

Vec3 Tracker::velocity_at(double t) const {
  if (velocity_history_.empty()) return state_.velocity_world;
  const auto it = std::lower_bound(
      velocity_history_.begin(), velocity_history_.end(), t,
      [](const std::pair<double, Vec3>& e, double v) { return e.first < v; });
  if (it == velocity_history_.begin()) return it->second;
  if (it == velocity_history_.end()) return velocity_history_.back().second;
  const auto& [t1, v1] = *it;
  const auto& [t0, v0] = *(it - 1);
  if (t1 - t0 < 1e-12) return v1;
  const double a = (t - t0) / (t1 - t0);
  return v0 + a * (v1 - v0);
}

std::optional<OutboundRequest> Tracker::issue_request(double t0, bool reinit) {
  if (!cfg_.enable_requests) return std::nullopt;
  PendingRequest p;
  p.request_id = next_request_id_++;
  p.t0 = t0;
  p.state_at_t0 = state_;
  p.reinit = reinit;
  pending_ = p;
  return OutboundRequest{p.request_id, p.t0, reinit};
}

std::optional<OutboundRequest> Tracker::on_frame(const FrameEvent& frame) {
  const Pose pose_now = cam_from_obj();
  TrackerStatus status = TrackerStatus::finePose;
  if (cfg_.enable_pia) {
    const Pose pose_last = have_last_frame_ ? last_frame_pose_ : pose_now;
    status = pia_inspect(pose_now, pose_last, cfg_.bbox_obj, cfg_.intrinsics,
                         cfg_.frame_rate, cfg_.pia);
  }
  last_frame_pose_ = pose_now;
  have_last_frame_ = true;
  if (lost_) status = TrackerStatus::trackingLost;
  last_status_ = status;

  switch (status) {
    case TrackerStatus::finePose:
      if (!pending_) return issue_request(frame.t, false);
      return std::nullopt;
    case TrackerStatus::wrongPose:
      // Cancel whatever is in flight and query immediately.
      pending_.reset();
      return issue_request(frame.t, false);
    case TrackerStatus::trackingLost:
      if (!lost_) {
        lost_ = true;
        ++lost_events_;
        responses_since_lost_ = 0;
        state_.pose_valid = false;
      }
      if (!pending_) return issue_request(frame.t, true);
      return std::nullopt;
  }
  return std::nullopt;
}

bool Tracker::on_response(const PoseResponse& resp) {
  if (!pending_ || resp.request_id != pending_->request_id) return false;  // stale/cancelled
  const PendingRequest pending = *pending_;
  pending_.reset();
  if (!resp.ok) return false;

  const double t0 = pending.t0;
  const Pose backend_pose = resp.pose;
  const Mat3 r_wc_backend = backend_pose.rotation.transpose();
  const Vec3 p_backend = -(r_wc_backend * backend_pose.translation);

  const bool can_correct = prev_backend_ && (t0 - prev_backend_->t0) > 1e-6;
  Vec3 velocity_at_t0 = velocity_at(t0);

  if (can_correct && cfg_.enable_bscm) {
    const double window = t0 - prev_backend_->t0;
    // Body-frame rotation deltas over the window between the two backend
    // capture instants; the frontend delta comes from the state snapshot
    // recorded when the request was issued.
    const Mat3 r_wc_front_t0 = pending.state_at_t0.cam_from_world.rotation.transpose();
    const Mat3 delta_imu = prev_backend_->r_world_from_cam.transpose() * r_wc_front_t0;
    const Mat3 delta_real = prev_backend_->r_world_from_cam.transpose() * r_wc_backend;
    state_.gyro_bias +=
        cfg_.gyro_bias_smoothing * bscm_gyro_bias(delta_imu, delta_real, window);

    RefinementRecord rec;
    rec.t_prev = prev_backend_->t0;
    rec.t_curr = t0;
    rec.backend_pose_prev.rotation = prev_backend_->r_world_from_cam;
    rec.backend_pose_prev.translation = prev_backend_->position_world;
    rec.backend_pose_curr.rotation = r_wc_backend;
    rec.backend_pose_curr.translation = p_backend;
    const Vec3 v_imu_mid = velocity_at(0.5 * (rec.t_prev + rec.t_curr));
    const VelocityBias vb = bscm_accel_bias(rec, v_imu_mid);
    state_.accel_bias_world += cfg_.accel_bias_smoothing * vb.a_bias;
    velocity_at_t0 = cfg_.velocity_blend * vb.v_avg +
                     (1.0 - cfg_.velocity_blend) * velocity_at_t0;
  }

  // Rebase at t0 and replay the buffered samples up to the present.
  state_.cam_from_world = backend_pose;
  state_.velocity_world = velocity_at_t0;
  state_.t = t0;

  while (!buffer_.empty() && buffer_.front().t <= t0 + 1e-12) buffer_.pop_front();
  velocity_history_.clear();
  velocity_history_.emplace_back(t0, velocity_at_t0);
  for (const ImuSample& s : buffer_) propagate(s);

  prev_backend_ = BackendAnchor{t0, backend_pose, r_wc_backend, p_backend};
  ++refinements_;

  if (lost_) {
    ++responses_since_lost_;
    if (responses_since_lost_ >= 2) {
      lost_ = false;
      state_.pose_valid = true;
    }
  } else {
    state_.pose_valid = true;
  }
  return true;
}

}  // namespace viot::tracker
