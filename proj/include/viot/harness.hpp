#pragma once

#include "viot/backend.hpp"
#include "viot/motion.hpp"
#include "viot/netlink.hpp"
#include "viot/tracker.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace viot::harness {

using geom::CameraIntrinsics;
using geom::Pose;
using geom::Vec3;

enum class Transport { sim, tcp };

struct ExperimentConfig {
  motion::MotionScript script;
  double frame_rate = 60.0;
  double imu_rate = 200.0;
  double duration = 30.0;
  std::uint64_t seed = 0;

  backend::BackendConfig backend;
  netlink::LatencyModel latency;
  motion::ImuNoiseModel noise{
      .gyro_bias = Vec3(0.002, -0.0015, 0.001),
      .accel_bias = Vec3(0.02, -0.015, 0.01),
  };

  bool disable_bscm = false;
  bool disable_pia = false;
  bool disable_backend = false;

  CameraIntrinsics intrinsics;
  Vec3 bbox_half_extents = Vec3(0.1, 0.1, 0.1);
  Pose world_from_obj;
  tracker::PiaConfig pia;
  double gyro_bias_smoothing = 0.5;
  double accel_bias_smoothing = 0.05;
  double velocity_blend = 0.5;

  Transport transport = Transport::sim;
  std::string tcp_address;   // HOST:PORT when transport == tcp
  std::string record_path;   // write a SequenceRecord when non-empty
};

struct FrameMetric {
  double t = 0.0;
  std::int64_t frame_id = 0;
  double pos_mm = 0.0;
  double orient_deg = 0.0;
  double proj_px = 0.0;
  bool valid = true;  // false when the pose is flagged invalid or not projectable
};

struct RefinementMetric {
  double t = 0.0;             // response application time
  // Both errors are measured at the capture instant the correction rebases
  // onto: err_before_px is the frontend estimate's error at that frame,
  // err_after_px is the applied backend pose's error at the same instant.
  double err_before_px = 0.0;
  double err_after_px = 0.0;
  bool complete = false;
};

struct TimingStats {
  double mean_us = 0.0;
  double max_us = 0.0;
  std::uint64_t count = 0;
};

struct MetricsReport {
  std::string script;
  double frame_rate = 0.0;
  std::string backend_mode;

  std::vector<FrameMetric> frames;
  std::vector<RefinementMetric> refinements;

  double mean_pos_mm = 0.0, max_pos_mm = 0.0;
  double mean_orient_deg = 0.0, max_orient_deg = 0.0;
  double mean_proj_px = 0.0, max_proj_px = 0.0;
  std::uint64_t valid_frame_count = 0;
  std::uint64_t invalid_frame_count = 0;
  std::uint64_t refinement_count = 0;
  std::uint64_t tracking_lost_count = 0;

  TimingStats ppm_us, pim_us, prm_us;
  double pixel2_equiv_pim_us = 0.0;  // measured mean scaled by the 2.46 ratio
  double pixel2_equiv_prm_us = 0.0;
  double wall_time_s = 0.0;
};

/// Mean pixel distance between the 8 bbox corners projected under the
/// estimated vs the true camera pose; nullopt when a vertex does not project.
std::optional<double> projection_error(const Pose& est_cam_from_world,
                                       const Pose& true_cam_from_world,
                                       std::span<const Vec3, 8> bbox_obj,
                                       const Pose& world_from_obj,
                                       const CameraIntrinsics& k);

/// (translation distance in mm, rotation angle in degrees).
std::pair<double, double> pose_error(const Pose& est, const Pose& truth);

MetricsReport run_experiment(const ExperimentConfig& cfg);

MetricsReport replay_sequence(const std::string& path);

enum class ReportFormat { csv, json };

std::string summary_csv(const MetricsReport& report);
std::string series_csv(const MetricsReport& report);
std::string report_json(const MetricsReport& report);

void emit_report(const MetricsReport& report, ReportFormat format, const std::string& path);
void emit_series(const MetricsReport& report, const std::string& path);

/// The full Table-2-shaped sweep: {gt, noisy} x {30, 60, 90, 120} FPS x all
/// six scripts, one summary row each.
std::string run_grid(const ExperimentConfig& base);

}  // namespace viot::harness
