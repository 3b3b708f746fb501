#pragma once

#include "viot/geom.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace viot::motion {

using geom::Mat3;
using geom::Pose;
using geom::Vec3;

enum class MotionKind { translational, circular };
enum class Difficulty { easy, medium, hard };

struct MotionScript {
  MotionKind kind = MotionKind::translational;
  Difficulty difficulty = Difficulty::easy;
  double duration = 30.0;
  std::uint64_t perturbation_seed = 0;
};

std::string script_name(const MotionScript& s);
MotionScript parse_script(const std::string& name);  // e.g. "trans-easy", "circ-hard"

struct TrajectorySample {
  double t = 0.0;
  Pose cam_from_world;
  Vec3 velocity_world = Vec3::Zero();
  Vec3 accel_world = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();
};

TrajectorySample sample_trajectory(const MotionScript& script, double t);

struct ImuNoiseModel {
  double gyro_density = 6.63e-5;    // rad/s/sqrt(Hz)
  double accel_density = 7.35e-4;   // m/s^2/sqrt(Hz)
  Vec3 gyro_bias = Vec3::Zero();    // rad/s, body frame
  Vec3 accel_bias = Vec3::Zero();   // m/s^2, body frame
  double sample_rate = 200.0;       // Hz
};

struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();  // rad/s, body frame
  Vec3 accel = Vec3::Zero();  // m/s^2, body frame, specific force
};

struct FrameEvent {
  double t = 0.0;
  std::int64_t frame_id = 0;
  Pose true_cam_from_world;
};

/// Generates IMU samples at 1/sample_rate spacing starting at t = 1/rate.
/// Increments are exact: feeding the noise-free stream through the pose
/// propagation equations reproduces the trajectory to machine precision.
class ImuStream {
 public:
  ImuStream(const MotionScript& script, const ImuNoiseModel& noise, std::uint64_t rng_seed);

  ImuSample next();
  bool done() const { return t_next_ > script_.duration + 0.5 * dt_; }
  double dt() const { return dt_; }

 private:
  MotionScript script_;
  ImuNoiseModel noise_;
  std::mt19937_64 rng_;
  double sigma_gyro_ = 0.0;
  double sigma_accel_ = 0.0;
  double dt_ = 0.0;
  double t_next_ = 0.0;
  std::int64_t index_ = 1;
  Vec3 pos_prev_, pos_prev2_;
  Mat3 wc_prev_;
};

std::vector<FrameEvent> schedule_frames(const MotionScript& script, double frame_rate);

struct InitialState {
  Pose cam_from_world;
  Vec3 velocity_world = Vec3::Zero();
};

/// True pose at t = 0 and the velocity consistent with the discrete
/// propagation at the given IMU rate.
InitialState initial_state(const MotionScript& script, double imu_rate);

const Vec3& default_gravity();  // (0, 0, 9.80665), world +z up

}  // namespace viot::motion
