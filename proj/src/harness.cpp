#include "viot/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace viot::harness {
namespace {

constexpr double kPi = 3.14159265358979323846;
// Measured desktop-to-Pixel-2 scale for the timing columns.
constexpr double kPixel2Scale = 2.46;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TimingAcc {
  double sum = 0.0;
  double max = 0.0;
  std::uint64_t n = 0;
  void add(double us) {
    sum += us;
    max = std::max(max, us);
    ++n;
  }
  TimingStats stats() const { return {n ? sum / double(n) : 0.0, max, n}; }
};

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double micros() const {
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_pose_fields(std::ostream& os, const Pose& p) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) os << ' ' << fmt17(p.rotation(r, c));
  for (int i = 0; i < 3; ++i) os << ' ' << fmt17(p.translation[i]);
}

/// Writes the SequenceRecord stream: `#` header lines, then one line per
/// event in processing order (I = inertial sample, F = frame, B = applied
/// backend response), all floats at full precision.
class Recorder {
 public:
  Recorder(const std::string& path, const ExperimentConfig& cfg,
           const tracker::StateVector& init)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open record file: " + path);
    out_ << "# viot-seq 1\n";
    out_ << "# script " << motion::script_name(cfg.script) << "\n";
    out_ << "# seed " << cfg.seed << "\n";
    out_ << "# duration " << fmt17(cfg.script.duration) << "\n";
    out_ << "# imu_rate " << fmt17(cfg.imu_rate) << "\n";
    out_ << "# frame_rate " << fmt17(cfg.frame_rate) << "\n";
    out_ << "# backend " << (cfg.backend.mode == backend::BackendMode::gt ? "gt" : "noisy")
         << "\n";
    out_ << "# intrinsics " << fmt17(cfg.intrinsics.fx) << ' ' << fmt17(cfg.intrinsics.fy) << ' '
         << fmt17(cfg.intrinsics.cx) << ' ' << fmt17(cfg.intrinsics.cy) << ' '
         << cfg.intrinsics.width << ' ' << cfg.intrinsics.height << "\n";
    out_ << "# bbox " << fmt17(cfg.bbox_half_extents.x()) << ' '
         << fmt17(cfg.bbox_half_extents.y()) << ' ' << fmt17(cfg.bbox_half_extents.z()) << "\n";
    out_ << "# world_from_obj";
    write_pose_fields(out_, cfg.world_from_obj);
    out_ << "\n";
    out_ << "# pia " << fmt17(cfg.pia.px_e) << ' ' << fmt17(cfg.pia.px_m) << ' '
         << fmt17(cfg.pia.base_rate) << ' ' << fmt17(cfg.pia.area_divisor) << "\n";
    out_ << "# flags bscm=" << (cfg.disable_bscm ? 0 : 1) << " pia=" << (cfg.disable_pia ? 0 : 1)
         << " requests=" << (cfg.disable_backend ? 0 : 1) << "\n";
    out_ << "# smoothing " << fmt17(cfg.gyro_bias_smoothing) << ' '
         << fmt17(cfg.accel_bias_smoothing) << ' ' << fmt17(cfg.velocity_blend) << "\n";
    out_ << "# init";
    write_pose_fields(out_, init.cam_from_world);
    for (int i = 0; i < 3; ++i) out_ << ' ' << fmt17(init.velocity_world[i]);
    out_ << "\n";
  }

  void imu(const motion::ImuSample& s) {
    out_ << "I " << fmt17(s.t);
    for (int i = 0; i < 3; ++i) out_ << ' ' << fmt17(s.omega[i]);
    for (int i = 0; i < 3; ++i) out_ << ' ' << fmt17(s.accel[i]);
    out_ << "\n";
  }

  void frame(const motion::FrameEvent& f) {
    out_ << "F " << fmt17(f.t) << ' ' << f.frame_id;
    write_pose_fields(out_, f.true_cam_from_world);
    out_ << "\n";
  }

  void response(double t, const backend::PoseResponse& resp) {
    out_ << "B " << fmt17(t) << ' ' << resp.request_id << ' ' << (resp.ok ? 0 : 1);
    write_pose_fields(out_, resp.pose);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

tracker::TrackerConfig tracker_config(const ExperimentConfig& cfg) {
  tracker::TrackerConfig tc;
  tc.intrinsics = cfg.intrinsics;
  tc.bbox_obj = geom::cuboid_corners(cfg.bbox_half_extents);
  tc.world_from_obj = cfg.world_from_obj;
  tc.pia = cfg.pia;
  tc.frame_rate = cfg.frame_rate;
  tc.imu_rate = cfg.imu_rate;
  tc.gyro_bias_smoothing = cfg.gyro_bias_smoothing;
  tc.accel_bias_smoothing = cfg.accel_bias_smoothing;
  tc.velocity_blend = cfg.velocity_blend;
  tc.enable_pia = !cfg.disable_pia;
  tc.enable_bscm = !cfg.disable_bscm;
  tc.enable_requests = !cfg.disable_backend;
  return tc;
}

/// Shared per-frame / per-response bookkeeping between the live run and the
/// replay path so both produce identical metrics.
class MetricsCollector {
 public:
  MetricsCollector(const ExperimentConfig& cfg)
      : bbox_(geom::cuboid_corners(cfg.bbox_half_extents)),
        world_from_obj_(cfg.world_from_obj),
        intrinsics_(cfg.intrinsics) {}

  void on_frame(const motion::FrameEvent& f, const tracker::StateVector& est,
                MetricsReport& report) {
    auto [pos_mm, orient_deg] = pose_error(est.cam_from_world, f.true_cam_from_world);
    auto proj = projection_error(est.cam_from_world, f.true_cam_from_world, bbox_,
                                 world_from_obj_, intrinsics_);
    FrameMetric m;
    m.t = f.t;
    m.frame_id = f.frame_id;
    m.pos_mm = pos_mm;
    m.orient_deg = orient_deg;
    m.valid = est.pose_valid && proj.has_value();
    m.proj_px = proj.value_or(std::numeric_limits<double>::quiet_NaN());
    report.frames.push_back(m);
    last_frame_ = m;
    last_truth_ = f.true_cam_from_world;
  }

  // Called right after on_frame when that frame issued a backend request.
  // The tracker keeps at most one request in flight, so a new request
  // supersedes any earlier one that is still unanswered.
  void on_request(std::uint64_t request_id) {
    pending_.reset();
    if (!last_frame_.valid) return;
    pending_ = Pending{request_id, last_frame_.proj_px, last_truth_};
  }

  void on_response_applied(double t, const backend::PoseResponse& resp,
                           MetricsReport& report) {
    if (!pending_ || pending_->request_id != resp.request_id) return;
    // Both errors are taken at the request's capture instant: the frontend
    // estimate scored there when the frame was processed, and the backend
    // pose the correction rebases onto.
    const auto after = projection_error(resp.pose, pending_->truth, bbox_,
                                        world_from_obj_, intrinsics_);
    if (after) {
      RefinementMetric rm;
      rm.t = t;
      rm.err_before_px = pending_->before_px;
      rm.err_after_px = *after;
      rm.complete = true;
      report.refinements.push_back(rm);
    }
    pending_.reset();
  }

 private:
  struct Pending {
    std::uint64_t request_id = 0;
    double before_px = 0.0;
    Pose truth;
  };

  std::array<Vec3, 8> bbox_;
  Pose world_from_obj_;
  CameraIntrinsics intrinsics_;
  FrameMetric last_frame_;
  Pose last_truth_;
  std::optional<Pending> pending_;
};

void finalize(MetricsReport& report, const TimingAcc& ppm, const TimingAcc& pim,
              const TimingAcc& prm) {
  double sp = 0, so = 0, sj = 0;
  report.valid_frame_count = 0;
  report.invalid_frame_count = 0;
  for (const auto& f : report.frames) {
    if (!f.valid) {
      ++report.invalid_frame_count;
      continue;
    }
    ++report.valid_frame_count;
    sp += f.pos_mm;
    so += f.orient_deg;
    sj += f.proj_px;
    report.max_pos_mm = std::max(report.max_pos_mm, f.pos_mm);
    report.max_orient_deg = std::max(report.max_orient_deg, f.orient_deg);
    report.max_proj_px = std::max(report.max_proj_px, f.proj_px);
  }
  if (report.valid_frame_count > 0) {
    double n = double(report.valid_frame_count);
    report.mean_pos_mm = sp / n;
    report.mean_orient_deg = so / n;
    report.mean_proj_px = sj / n;
  }
  report.refinement_count = report.refinements.size();
  report.ppm_us = ppm.stats();
  report.pim_us = pim.stats();
  report.prm_us = prm.stats();
  report.pixel2_equiv_pim_us = report.pim_us.mean_us * kPixel2Scale;
  report.pixel2_equiv_prm_us = report.prm_us.mean_us * kPixel2Scale;
}

// Virtual-clock event kinds; ties at equal time resolve in this order.
enum EventKind : int { kImu = 0, kFrame = 1, kNetwork = 2, kBackend = 3 };

struct Event {
  double t = 0.0;
  int kind = kImu;
  std::uint64_t seq = 0;
  std::variant<motion::ImuSample, std::size_t, backend::PoseRequest, backend::PoseResponse>
      payload;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

}  // namespace

std::optional<double> projection_error(const Pose& est_cam_from_world,
                                       const Pose& true_cam_from_world,
                                       std::span<const Vec3, 8> bbox_obj,
                                       const Pose& world_from_obj, const CameraIntrinsics& k) {
  const Pose est = geom::compose(est_cam_from_world, world_from_obj);
  const Pose truth = geom::compose(true_cam_from_world, world_from_obj);
  double sum = 0.0;
  for (const Vec3& v : bbox_obj) {
    auto pe = geom::project(k, est, v);
    auto pt = geom::project(k, truth, v);
    if (!pe || !pt) return std::nullopt;
    sum += std::hypot(pe->u - pt->u, pe->v - pt->v);
  }
  return sum / 8.0;
}

std::pair<double, double> pose_error(const Pose& est, const Pose& truth) {
  const double mm = (est.translation - truth.translation).norm() * 1000.0;
  const double deg =
      geom::rotation_angle(est.rotation * truth.rotation.transpose()) * 180.0 / kPi;
  return {mm, deg};
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.frame_rate <= 0 || cfg.imu_rate <= 0 || cfg.script.duration <= 0)
    throw std::invalid_argument("frame_rate, imu_rate, and duration must be positive");

  const StopWatch wall;
  MetricsReport report;
  report.script = motion::script_name(cfg.script);
  report.frame_rate = cfg.frame_rate;
  report.backend_mode = cfg.backend.mode == backend::BackendMode::gt ? "gt" : "noisy";

  motion::MotionScript script = cfg.script;
  motion::ImuNoiseModel noise = cfg.noise;
  noise.sample_rate = cfg.imu_rate;

  const motion::InitialState init = motion::initial_state(script, cfg.imu_rate);
  tracker::StateVector state;
  state.cam_from_world = init.cam_from_world;
  state.velocity_world = init.velocity_world;
  tracker::Tracker trk(tracker_config(cfg), state);

  motion::ImuStream imu(script, noise, cfg.seed);
  const std::vector<motion::FrameEvent> frames = motion::schedule_frames(script, cfg.frame_rate);

  netlink::LatencyModel latency = cfg.latency;
  latency.rng_seed = cfg.seed ^ 0x6368616e6e656cull;
  netlink::SimChannel channel(latency);

  backend::BackendConfig bconf = cfg.backend;
  bconf.rng_seed = cfg.seed ^ 0x6261636bull;

  netlink::Socket remote;
  if (cfg.transport == Transport::tcp) {
    auto [host, port] = netlink::parse_address(cfg.tcp_address);
    remote = netlink::connect_to(host, port);
  }

  std::optional<Recorder> rec;
  if (!cfg.record_path.empty()) rec.emplace(cfg.record_path, cfg, state);

  MetricsCollector metrics(cfg);
  TimingAcc ppm, pim, prm;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
  std::uint64_t seq = 0;
  auto push = [&](double t, int kind, auto&& payload) {
    queue.push(Event{t, kind, seq++, std::forward<decltype(payload)>(payload)});
  };

  if (!imu.done()) {
    motion::ImuSample first = imu.next();
    push(first.t, kImu, first);
  }
  if (!frames.empty()) push(frames[0].t, kFrame, std::size_t{0});

  while (!queue.empty()) {
    Event ev = queue.top();
    queue.pop();

    switch (ev.kind) {
      case kImu: {
        const auto& s = std::get<motion::ImuSample>(ev.payload);
        {
          StopWatch sw;
          trk.on_imu(s);
          ppm.add(sw.micros());
        }
        if (rec) rec->imu(s);
        if (!imu.done()) {
          motion::ImuSample nxt = imu.next();
          push(nxt.t, kImu, nxt);
        }
        break;
      }
      case kFrame: {
        const std::size_t idx = std::get<std::size_t>(ev.payload);
        const motion::FrameEvent& f = frames[idx];
        metrics.on_frame(f, trk.state(), report);
        std::optional<tracker::OutboundRequest> out;
        {
          StopWatch sw;
          out = trk.on_frame(f);
          pim.add(sw.micros());
        }
        if (rec) rec->frame(f);
        if (out) {
          metrics.on_request(out->request_id);
          backend::PoseRequest req;
          req.request_id = out->request_id;
          req.t0 = out->t0;
          req.true_pose_hint = f.true_cam_from_world;
          req.payload = backend::make_payload(req.true_pose_hint, latency.request_size);
          if (auto arrive = channel.send_client_to_server(f.t))
            push(*arrive, kNetwork, std::move(req));
        }
        if (idx + 1 < frames.size()) push(frames[idx + 1].t, kFrame, idx + 1);
        break;
      }
      case kNetwork: {
        if (auto* req = std::get_if<backend::PoseRequest>(&ev.payload)) {
          backend::PoseResponse resp;
          if (cfg.transport == Transport::tcp) {
            remote.send_message(backend::to_wire(*req));
            auto m = remote.recv_message();
            if (!m) throw netlink::TransportError("backend closed the connection");
            resp = backend::response_from_wire(*m);
          } else {
            resp = backend::estimate(*req, bconf);
          }
          push(ev.t + bconf.compute_delay_s, kBackend, std::move(resp));
        } else {
          const auto& resp = std::get<backend::PoseResponse>(ev.payload);
          bool applied = false;
          {
            StopWatch sw;
            applied = trk.on_response(resp);
            prm.add(sw.micros());
          }
          if (applied) {
            if (rec) rec->response(ev.t, resp);
            metrics.on_response_applied(ev.t, resp, report);
          }
        }
        break;
      }
      case kBackend: {
        const auto& resp = std::get<backend::PoseResponse>(ev.payload);
        if (auto deliver = channel.send_server_to_client(ev.t)) push(*deliver, kNetwork, resp);
        break;
      }
    }
  }

  report.tracking_lost_count = trk.lost_count();
  finalize(report, ppm, pim, prm);
  report.wall_time_s = wall.micros() * 1e-6;
  return report;
}

namespace {

struct ReplayHeader {
  ExperimentConfig cfg;
  tracker::StateVector init;
};

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

Pose read_pose_fields(std::istream& is) {
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) is >> p.rotation(r, c);
  for (int i = 0; i < 3; ++i) is >> p.translation[i];
  return p;
}

}  // namespace

MetricsReport replay_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sequence file: " + path);

  ReplayHeader hdr;
  hdr.cfg.disable_backend = true;  // responses come from the file, not a link
  bool have_init = false;

  std::string line;
  std::size_t line_no = 0;
  std::optional<tracker::Tracker> trk;
  std::optional<MetricsCollector> metrics;
  MetricsReport report;
  TimingAcc ppm, pim, prm;
  double last_t = -std::numeric_limits<double>::infinity();

  auto ensure_tracker = [&]() {
    if (trk) return;
    if (!have_init) parse_fail(path, line_no, "data row before the # init header");
    tracker::TrackerConfig tc = tracker_config(hdr.cfg);
    tc.enable_requests = true;  // keep request ids in lockstep with the recording
    trk.emplace(tc, hdr.init);
    metrics.emplace(hdr.cfg);
    report.script = motion::script_name(hdr.cfg.script);
    report.frame_rate = hdr.cfg.frame_rate;
    report.backend_mode =
        hdr.cfg.backend.mode == backend::BackendMode::gt ? "gt" : "noisy";
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    if (line[0] == '#') {
      std::string hash, key;
      is >> hash >> key;
      if (key == "viot-seq") {
        int version = 0;
        is >> version;
        if (version != 1) parse_fail(path, line_no, "unsupported sequence version");
      } else if (key == "script") {
        std::string name;
        is >> name;
        try {
          hdr.cfg.script = motion::parse_script(name);
        } catch (const std::exception& e) {
          parse_fail(path, line_no, e.what());
        }
      } else if (key == "seed") {
        is >> hdr.cfg.seed;
      } else if (key == "duration") {
        is >> hdr.cfg.script.duration;
      } else if (key == "imu_rate") {
        is >> hdr.cfg.imu_rate;
      } else if (key == "frame_rate") {
        is >> hdr.cfg.frame_rate;
      } else if (key == "backend") {
        std::string mode;
        is >> mode;
        if (mode == "gt")
          hdr.cfg.backend.mode = backend::BackendMode::gt;
        else if (mode == "noisy")
          hdr.cfg.backend.mode = backend::BackendMode::noisy;
        else
          parse_fail(path, line_no, "unknown backend mode: " + mode);
      } else if (key == "intrinsics") {
        auto& k = hdr.cfg.intrinsics;
        is >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height;
      } else if (key == "bbox") {
        is >> hdr.cfg.bbox_half_extents.x() >> hdr.cfg.bbox_half_extents.y() >>
            hdr.cfg.bbox_half_extents.z();
      } else if (key == "world_from_obj") {
        hdr.cfg.world_from_obj = read_pose_fields(is);
      } else if (key == "pia") {
        auto& p = hdr.cfg.pia;
        is >> p.px_e >> p.px_m >> p.base_rate >> p.area_divisor;
      } else if (key == "flags") {
        std::string tok;
        while (is >> tok) {
          auto eq = tok.find('=');
          if (eq == std::string::npos) parse_fail(path, line_no, "malformed flag: " + tok);
          const std::string name = tok.substr(0, eq);
          const bool on = tok.substr(eq + 1) == "1";
          if (name == "bscm")
            hdr.cfg.disable_bscm = !on;
          else if (name == "pia")
            hdr.cfg.disable_pia = !on;
          else if (name == "requests")
            ;  // replay always mirrors recorded requests
          else
            parse_fail(path, line_no, "unknown flag: " + name);
        }
        is.clear();  // the flag loop reads to end-of-line
      } else if (key == "smoothing") {
        is >> hdr.cfg.gyro_bias_smoothing >> hdr.cfg.accel_bias_smoothing >>
            hdr.cfg.velocity_blend;
      } else if (key == "init") {
        hdr.init.cam_from_world = read_pose_fields(is);
        for (int i = 0; i < 3; ++i) is >> hdr.init.velocity_world[i];
        have_init = true;
      } else {
        parse_fail(path, line_no, "unknown header key: " + key);
      }
      if (is.fail()) parse_fail(path, line_no, "malformed header line");
      continue;
    }

    ensure_tracker();
    char tag = 0;
    is >> tag;
    double t = 0.0;
    is >> t;
    if (is.fail()) parse_fail(path, line_no, "missing timestamp");
    if (t < last_t) parse_fail(path, line_no, "timestamps must be non-decreasing");
    last_t = t;

    if (tag == 'I') {
      motion::ImuSample s;
      s.t = t;
      for (int i = 0; i < 3; ++i) is >> s.omega[i];
      for (int i = 0; i < 3; ++i) is >> s.accel[i];
      if (is.fail()) parse_fail(path, line_no, "malformed I row");
      StopWatch sw;
      trk->on_imu(s);
      ppm.add(sw.micros());
    } else if (tag == 'F') {
      motion::FrameEvent f;
      f.t = t;
      is >> f.frame_id;
      f.true_cam_from_world = read_pose_fields(is);
      if (is.fail()) parse_fail(path, line_no, "malformed F row");
      metrics->on_frame(f, trk->state(), report);
      std::optional<tracker::OutboundRequest> out;
      {
        StopWatch sw;
        out = trk->on_frame(f);
        pim.add(sw.micros());
      }
      if (out) metrics->on_request(out->request_id);
    } else if (tag == 'B') {
      backend::PoseResponse resp;
      int status = 0;
      is >> resp.request_id >> status;
      resp.pose = read_pose_fields(is);
      if (is.fail()) parse_fail(path, line_no, "malformed B row");
      resp.ok = status == 0;
      resp.t0 = t;
      bool applied = false;
      {
        StopWatch sw;
        applied = trk->on_response(resp);
        prm.add(sw.micros());
      }
      if (applied) metrics->on_response_applied(t, resp, report);
    } else {
      parse_fail(path, line_no, std::string("unknown row tag: ") + tag);
    }
  }

  if (trk) report.tracking_lost_count = trk->lost_count();
  finalize(report, ppm, pim, prm);
  return report;
}

std::string summary_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "script,frame_rate,backend,pos_mm,orient_deg,proj_px\n";
  if (report.valid_frame_count == 0) return os.str();
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%g,%s,%.6f,%.6f,%.6f\n", report.script.c_str(),
                report.frame_rate, report.backend_mode.c_str(), report.mean_pos_mm,
                report.mean_orient_deg, report.mean_proj_px);
  os << buf;
  return os.str();
}

std::string series_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "t,pos_mm,orient_deg,proj_px\n";
  char buf[200];
  for (const auto& f : report.frames) {
    if (f.valid) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", f.t, f.pos_mm, f.orient_deg,
                    f.proj_px);
    } else {
      std::snprintf(buf, sizeof buf, "%.9g,nan,nan,nan\n", f.t);
    }
    os << buf;
  }
  return os.str();
}

std::string report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["script"] = report.script;
  j["frame_rate"] = report.frame_rate;
  j["backend"] = report.backend_mode;
  j["pos_mm"] = {{"mean", report.mean_pos_mm}, {"max", report.max_pos_mm}};
  j["orient_deg"] = {{"mean", report.mean_orient_deg}, {"max", report.max_orient_deg}};
  j["proj_px"] = {{"mean", report.mean_proj_px}, {"max", report.max_proj_px}};
  j["frames"] = {{"valid", report.valid_frame_count}, {"invalid", report.invalid_frame_count}};
  j["refinements"] = report.refinement_count;
  j["tracking_lost"] = report.tracking_lost_count;
  double before = 0, after = 0;
  std::size_t n = 0;
  for (const auto& r : report.refinements)
    if (r.complete) {
      before += r.err_before_px;
      after += r.err_after_px;
      ++n;
    }
  j["refinement_px"] = {{"mean_before", n ? before / double(n) : 0.0},
                        {"mean_after", n ? after / double(n) : 0.0}};
  auto timing = [](const TimingStats& s) {
    return nlohmann::json{{"mean_us", s.mean_us}, {"max_us", s.max_us}, {"count", s.count}};
  };
  j["timing"] = {{"ppm", timing(report.ppm_us)},
                 {"pim", timing(report.pim_us)},
                 {"prm", timing(report.prm_us)},
                 {"pixel2_equiv_pim_us", report.pixel2_equiv_pim_us},
                 {"pixel2_equiv_prm_us", report.pixel2_equiv_prm_us}};
  j["wall_time_s"] = report.wall_time_s;
  return j.dump(2) + "\n";
}

void emit_report(const MetricsReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << (format == ReportFormat::csv ? summary_csv(report) : report_json(report));
}

void emit_series(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << series_csv(report);
}

std::string run_grid(const ExperimentConfig& base) {
  static const std::array<backend::BackendMode, 2> kModes = {backend::BackendMode::gt,
                                                             backend::BackendMode::noisy};
  static const std::array<double, 4> kRates = {30, 60, 90, 120};
  static const std::array<const char*, 6> kScripts = {"trans-easy", "trans-medium", "trans-hard",
                                                      "circ-easy",  "circ-medium",  "circ-hard"};
  std::ostringstream os;
  os << "script,frame_rate,backend,pos_mm,orient_deg,proj_px\n";
  for (auto mode : kModes)
    for (double rate : kRates)
      for (const char* name : kScripts) {
        ExperimentConfig cfg = base;
        cfg.backend.mode = mode;
        cfg.frame_rate = rate;
        double duration = cfg.script.duration;
        cfg.script = motion::parse_script(name);
        cfg.script.duration = duration;
        cfg.script.perturbation_seed = cfg.seed;
        cfg.transport = Transport::sim;
        cfg.record_path.clear();
        MetricsReport r = run_experiment(cfg);
        // drop the per-run header, keep the row
        std::string row = summary_csv(r);
        os << row.substr(row.find('\n') + 1);
      }
  return os.str();
}

}  // namespace viot::harness
