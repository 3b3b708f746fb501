#include <pybind11/pybind11.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include "viot/backend.hpp"
#include "viot/geom.hpp"
#include "viot/harness.hpp"
#include "viot/motion.hpp"
#include "viot/netlink.hpp"
#include "viot/tracker.hpp"

namespace py = pybind11;
using namespace viot;

PYBIND11_MODULE(pyviot, m) {
  m.doc() = "Flexible-frame-rate visual-inertial object pose tracking simulator";

  // --- geometry -----------------------------------------------------------
  py::class_<geom::Pose>(m, "Pose")
      .def(py::init<>())
      .def_readwrite("rotation", &geom::Pose::rotation)
      .def_readwrite("translation", &geom::Pose::translation);

  py::class_<geom::CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("fx", &geom::CameraIntrinsics::fx)
      .def_readwrite("fy", &geom::CameraIntrinsics::fy)
      .def_readwrite("cx", &geom::CameraIntrinsics::cx)
      .def_readwrite("cy", &geom::CameraIntrinsics::cy)
      .def_readwrite("width", &geom::CameraIntrinsics::width)
      .def_readwrite("height", &geom::CameraIntrinsics::height);

  m.def("integrate_rotation", &geom::integrate_rotation, py::arg("r"), py::arg("omega"),
        py::arg("dt"));
  m.def("axis_angle", &geom::axis_angle, py::arg("axis"), py::arg("angle"));
  m.def("rotation_angle", &geom::rotation_angle, py::arg("r"));
  m.def(
      "project",
      [](const geom::CameraIntrinsics& k, const geom::Pose& cam_from_obj,
         const geom::Vec3& point) -> std::optional<std::pair<double, double>> {
        const auto px = geom::project(k, cam_from_obj, point);
        if (!px) return std::nullopt;
        return std::make_pair(px->u, px->v);
      },
      py::arg("intrinsics"), py::arg("cam_from_obj"), py::arg("point"));

  // --- motion scripts -----------------------------------------------------
  py::class_<motion::MotionScript>(m, "MotionScript")
      .def_readwrite("duration", &motion::MotionScript::duration)
      .def_readwrite("perturbation_seed", &motion::MotionScript::perturbation_seed)
      .def("__repr__",
           [](const motion::MotionScript& s) {
             return "<MotionScript " + motion::script_name(s) + ">";
           });
  m.def("parse_script", &motion::parse_script, py::arg("name"));
  m.def("script_name", &motion::script_name, py::arg("script"));
  m.def(
      "sample_trajectory",
      [](const motion::MotionScript& s, double t) {
        const auto ts = motion::sample_trajectory(s, t);
        py::dict d;
        d["t"] = ts.t;
        d["cam_from_world"] = ts.cam_from_world;
        d["velocity_world"] = ts.velocity_world;
        d["omega_body"] = ts.omega_body;
        return d;
      },
      py::arg("script"), py::arg("t"));

  // --- network model ------------------------------------------------------
  py::class_<netlink::LatencyModel>(m, "LatencyModel")
      .def(py::init<>())
      .def_readwrite("bandwidth_mbps", &netlink::LatencyModel::bandwidth_mbps)
      .def_readwrite("propagation_delay_ms", &netlink::LatencyModel::propagation_delay_ms)
      .def_readwrite("extra_delay_lo_ms", &netlink::LatencyModel::extra_delay_lo_ms)
      .def_readwrite("extra_delay_hi_ms", &netlink::LatencyModel::extra_delay_hi_ms)
      .def_readwrite("request_size", &netlink::LatencyModel::request_size)
      .def_readwrite("response_size", &netlink::LatencyModel::response_size);
  m.def("compute_delay", &netlink::compute_delay, py::arg("size_bytes"), py::arg("model"),
        py::arg("draw_ms"));

  // --- backend oracle -----------------------------------------------------
  py::enum_<backend::BackendMode>(m, "BackendMode")
      .value("gt", backend::BackendMode::gt)
      .value("noisy", backend::BackendMode::noisy);

  py::class_<backend::BackendConfig>(m, "BackendConfig")
      .def(py::init<>())
      .def_readwrite("mode", &backend::BackendConfig::mode)
      .def_readwrite("trans_noise_sigma", &backend::BackendConfig::trans_noise_sigma)
      .def_readwrite("rot_noise_sigma", &backend::BackendConfig::rot_noise_sigma)
      .def_readwrite("rng_seed", &backend::BackendConfig::rng_seed);

  m.def(
      "estimate",
      [](const geom::Pose& truth, std::uint64_t request_id, const backend::BackendConfig& cfg) {
        backend::PoseRequest req;
        req.request_id = request_id;
        req.true_pose_hint = truth;
        req.payload = backend::make_payload(truth, 96);
        return backend::estimate(req, cfg).pose;
      },
      py::arg("true_pose"), py::arg("request_id"), py::arg("config"));

  // --- inspection ---------------------------------------------------------
  py::enum_<tracker::TrackerStatus>(m, "TrackerStatus")
      .value("finePose", tracker::TrackerStatus::finePose)
      .value("wrongPose", tracker::TrackerStatus::wrongPose)
      .value("trackingLost", tracker::TrackerStatus::trackingLost);

  m.def(
      "inspect_pose",
      [](const geom::Pose& pose_now, const geom::Pose& pose_last,
         const geom::Vec3& bbox_half_extents, const geom::CameraIntrinsics& k,
         double frame_rate) {
        const auto bbox = geom::cuboid_corners(bbox_half_extents);
        return tracker::pia_inspect(pose_now, pose_last, bbox, k, frame_rate,
                                    tracker::PiaConfig{});
      },
      py::arg("pose_now"), py::arg("pose_last"), py::arg("bbox_half_extents"),
      py::arg("intrinsics"), py::arg("frame_rate"));
  m.def(
      "inspection_threshold_px",
      [](double frame_rate) { return tracker::thr_2d(tracker::PiaConfig{}, frame_rate); },
      py::arg("frame_rate"));

  // --- experiments --------------------------------------------------------
  py::enum_<harness::Transport>(m, "Transport")
      .value("sim", harness::Transport::sim)
      .value("tcp", harness::Transport::tcp);

  py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("script", &harness::ExperimentConfig::script)
      .def_readwrite("frame_rate", &harness::ExperimentConfig::frame_rate)
      .def_readwrite("imu_rate", &harness::ExperimentConfig::imu_rate)
      .def_readwrite("duration", &harness::ExperimentConfig::duration)
      .def_readwrite("seed", &harness::ExperimentConfig::seed)
      .def_readwrite("backend", &harness::ExperimentConfig::backend)
      .def_readwrite("latency", &harness::ExperimentConfig::latency)
      .def_readwrite("disable_bscm", &harness::ExperimentConfig::disable_bscm)
      .def_readwrite("disable_pia", &harness::ExperimentConfig::disable_pia)
      .def_readwrite("disable_backend", &harness::ExperimentConfig::disable_backend)
      .def_readwrite("transport", &harness::ExperimentConfig::transport)
      .def_readwrite("tcp_address", &harness::ExperimentConfig::tcp_address)
      .def_readwrite("record_path", &harness::ExperimentConfig::record_path);

  py::class_<harness::FrameMetric>(m, "FrameMetric")
      .def_readonly("t", &harness::FrameMetric::t)
      .def_readonly("frame_id", &harness::FrameMetric::frame_id)
      .def_readonly("pos_mm", &harness::FrameMetric::pos_mm)
      .def_readonly("orient_deg", &harness::FrameMetric::orient_deg)
      .def_readonly("proj_px", &harness::FrameMetric::proj_px)
      .def_readonly("valid", &harness::FrameMetric::valid);

  py::class_<harness::MetricsReport>(m, "MetricsReport")
      .def_readonly("script", &harness::MetricsReport::script)
      .def_readonly("frame_rate", &harness::MetricsReport::frame_rate)
      .def_readonly("backend_mode", &harness::MetricsReport::backend_mode)
      .def_readonly("frames", &harness::MetricsReport::frames)
      .def_readonly("mean_pos_mm", &harness::MetricsReport::mean_pos_mm)
      .def_readonly("mean_orient_deg", &harness::MetricsReport::mean_orient_deg)
      .def_readonly("mean_proj_px", &harness::MetricsReport::mean_proj_px)
      .def_readonly("max_proj_px", &harness::MetricsReport::max_proj_px)
      .def_readonly("valid_frame_count", &harness::MetricsReport::valid_frame_count)
      .def_readonly("invalid_frame_count", &harness::MetricsReport::invalid_frame_count)
      .def_readonly("refinement_count", &harness::MetricsReport::refinement_count)
      .def_readonly("tracking_lost_count", &harness::MetricsReport::tracking_lost_count)
      .def_readonly("wall_time_s", &harness::MetricsReport::wall_time_s);

  m.def("run_experiment", &harness::run_experiment, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("replay_sequence", &harness::replay_sequence, py::arg("path"),
        py::call_guard<py::gil_scoped_release>());
  m.def("summary_csv", &harness::summary_csv, py::arg("report"));
  m.def("series_csv", &harness::series_csv, py::arg("report"));
  m.def("report_json", &harness::report_json, py::arg("report"));
}
