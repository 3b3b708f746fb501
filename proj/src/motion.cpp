#include "viot/motion.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace viot::motion {

namespace {

const Vec3 kGravity(0.0, 0.0, 9.80665);

// offset + rate*t + sum of amp * sin(freq*t + phase)
struct ScalarFn {
  double offset = 0.0;
  double rate = 0.0;
  struct Term {
    double amp, freq, phase;
  };
  std::vector<Term> terms;

  double value(double t) const {
    double v = offset + rate * t;
    for (const Term& s : terms) v += s.amp * std::sin(s.freq * t + s.phase);
    return v;
  }
  double d1(double t) const {
    double v = rate;
    for (const Term& s : terms) v += s.amp * s.freq * std::cos(s.freq * t + s.phase);
    return v;
  }
  double d2(double t) const {
    double v = 0.0;
    for (const Term& s : terms) v -= s.amp * s.freq * s.freq * std::sin(s.freq * t + s.phase);
    return v;
  }
};

// One factor of the orientation chain: either a fixed rotation or a
// rotation about a fixed axis by an analytic angle.
struct RotFactor {
  bool fixed = false;
  Mat3 constant = Mat3::Identity();
  Vec3 axis = Vec3::UnitZ();
  ScalarFn angle;
};

struct MatDerivs {
  Mat3 m, d1, d2;
};

MatDerivs eval_factor(const RotFactor& f, double t) {
  if (f.fixed) return {f.constant, Mat3::Zero(), Mat3::Zero()};
  const double th = f.angle.value(t);
  const double th1 = f.angle.d1(t);
  const double th2 = f.angle.d2(t);
  const Mat3 k = geom::skew(f.axis);
  const Mat3 k2 = k * k;
  const double s = std::sin(th), c = std::cos(th);
  const Mat3 m = Mat3::Identity() + s * k + (1.0 - c) * k2;
  const Mat3 dm_dth = c * k + s * k2;
  const Mat3 d2m_dth2 = -s * k + c * k2;
  return {m, dm_dth * th1, d2m_dth2 * th1 * th1 + dm_dth * th2};
}

struct VecTerm {
  Vec3 dir;
  ScalarFn fn;
};

struct TrajectoryModel {
  Vec3 base = Vec3::Zero();
  std::vector<VecTerm> world_terms;           // added in the world frame
  Vec3 r_cam0 = Vec3::Zero();                 // camera-frame offset, subtracted via R
  std::vector<VecTerm> cam_terms;
  std::vector<RotFactor> factors;             // world-from-camera chain
};

struct Kinematics {
  Mat3 wc;        // world from camera
  Mat3 wc_d1, wc_d2;
  Vec3 pos, vel, acc;   // camera position in world
  Vec3 omega_body;
};

Kinematics evaluate(const TrajectoryModel& m, double t) {
  MatDerivs acc{Mat3::Identity(), Mat3::Zero(), Mat3::Zero()};
  for (const RotFactor& f : m.factors) {
    const MatDerivs g = eval_factor(f, t);
    const Mat3 nm = acc.m * g.m;
    const Mat3 nd1 = acc.d1 * g.m + acc.m * g.d1;
    const Mat3 nd2 = acc.d2 * g.m + 2.0 * acc.d1 * g.d1 + acc.m * g.d2;
    acc = {nm, nd1, nd2};
  }

  Vec3 w = Vec3::Zero(), w1 = Vec3::Zero(), w2 = Vec3::Zero();
  for (const VecTerm& vt : m.world_terms) {
    w += vt.dir * vt.fn.value(t);
    w1 += vt.dir * vt.fn.d1(t);
    w2 += vt.dir * vt.fn.d2(t);
  }
  Vec3 r = m.r_cam0, r1 = Vec3::Zero(), r2 = Vec3::Zero();
  for (const VecTerm& vt : m.cam_terms) {
    r += vt.dir * vt.fn.value(t);
    r1 += vt.dir * vt.fn.d1(t);
    r2 += vt.dir * vt.fn.d2(t);
  }

  Kinematics out;
  out.wc = acc.m;
  out.wc_d1 = acc.d1;
  out.wc_d2 = acc.d2;
  out.pos = m.base + w - acc.m * r;
  out.vel = w1 - acc.d1 * r - acc.m * r1;
  out.acc = w2 - acc.d2 * r - 2.0 * acc.d1 * r1 - acc.m * r2;
  const Mat3 ob = acc.m.transpose() * acc.d1;
  out.omega_body = Vec3(ob(2, 1) - ob(1, 2), ob(0, 2) - ob(2, 0), ob(1, 0) - ob(0, 1)) * 0.5;
  return out;
}

// Camera axes at t = 0: optical axis along world +y, image x along world +x,
// image y along world -z (world +z up).
Mat3 base_orientation() {
  Mat3 r0;
  r0 << 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, -1.0, 0.0;
  return r0;
}

struct ScriptParams {
  // translational: position wobble with constant-magnitude acceleration
  double pos_accel, pos_freq;
  // translational rotation: rotating angular-velocity vector (rate, freq),
  // or a constant roll rate when rot_freq == 0
  double rot_rate, rot_freq;
  // circular: orbit rate about the object, constant roll rate, bobbing
  double orbit_rate, roll_rate, bob_accel, bob_freq;
  // perturbation budgets
  double perturb_accel, perturb_rate;
};

ScriptParams params_for(const MotionScript& s) {
  if (s.kind == MotionKind::translational) {
    switch (s.difficulty) {
      case Difficulty::easy:
        return {0.0900, 0.0900 / 0.062, 0.001, 0.0, 0, 0, 0, 0, 0.030, 0.000};
      case Difficulty::medium:
        return {0.2685, 0.2685 / 0.123, 0.014, 5.0, 0, 0, 0, 0, 0.030, 0.004};
      case Difficulty::hard:
        return {0.4415, 0.4415 / 0.182, 0.041, 0.227 / 0.041, 0, 0, 0, 0, 0.030, 0.006};
    }
  }
  switch (s.difficulty) {
    case Difficulty::easy:
      return {0, 0, 0, 0, 0.0585, 0.0, 0.012334, 3.0, 0.0010, 0.003};
    case Difficulty::medium:
      return {0, 0, 0, 0, 0.1225, 0.306417, 0.047715, 4.0, 0.0030, 0.010};
    case Difficulty::hard:
      return {0, 0, 0, 0, 0.190833, 0.353817, 0.105289, 5.0, 0.0060, 0.015};
  }
  throw std::logic_error("unreachable");
}

TrajectoryModel build_model(const MotionScript& s) {
  const ScriptParams p = params_for(s);
  const Mat3 r0 = base_orientation();
  const double dist = 1.2;
  TrajectoryModel m;

  std::mt19937_64 rng(s.perturbation_seed * 0x9e3779b97f4a7c15ull +
                      static_cast<std::uint64_t>(s.kind) * 131 +
                      static_cast<std::uint64_t>(s.difficulty) * 7 + 1);
  std::uniform_real_distribution<double> freq_dist(2.0, 6.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);

  if (s.kind == MotionKind::translational) {
    m.base = Vec3(0.0, -dist, 0.0);
    m.factors.push_back({true, r0, Vec3::UnitZ(), {}});

    // Main wobble: rotating acceleration vector in the world x-z plane,
    // |a| = pos_accel, mean speed = pos_accel / pos_freq. Starts at the
    // anchor with velocity along +x.
    const double amp = p.pos_accel / (p.pos_freq * p.pos_freq);
    m.world_terms.push_back({Vec3::UnitX(), {0.0, 0.0, {{amp, p.pos_freq, 0.0}}}});
    m.world_terms.push_back({Vec3::UnitZ(), {-amp, 0.0, {{amp, p.pos_freq, M_PI_2}}}});

    if (p.rot_freq == 0.0) {
      // Constant slow roll about the optical axis.
      if (p.rot_rate != 0.0)
        m.factors.push_back({false, {}, Vec3::UnitZ(), {0.0, p.rot_rate, {}}});
    } else {
      // Rotating angular-velocity vector of magnitude rot_rate.
      const double a = p.rot_rate / p.rot_freq;
      m.factors.push_back({false, {}, Vec3::UnitX(), {0.0, 0.0, {{a, p.rot_freq, 0.0}}}});
      m.factors.push_back({false, {}, Vec3::UnitY(), {0.0, 0.0, {{a, p.rot_freq, M_PI_2}}}});
    }

    // Perturbation: three rotating acceleration pairs in the same plane.
    for (int i = 0; i < 3; ++i) {
      const double f = freq_dist(rng);
      const double ph = phase_dist(rng);
      const double a = (p.perturb_accel / 3.0) / (f * f);
      m.world_terms.push_back({Vec3::UnitX(), {0.0, 0.0, {{a, f, ph}}}});
      m.world_terms.push_back({Vec3::UnitZ(), {0.0, 0.0, {{a, f, ph + M_PI_2}}}});
    }
  } else {
    // Orbit about the object (world z axis through the origin) with the
    // camera kept on target; roll adds body rate without translation.
    m.base = Vec3::Zero();
    m.r_cam0 = Vec3(0.0, 0.0, dist);
    m.factors.push_back({false, {}, Vec3::UnitZ(), {0.0, p.orbit_rate, {}}});
    m.factors.push_back({true, r0, Vec3::UnitZ(), {}});
    if (p.roll_rate != 0.0)
      m.factors.push_back({false, {}, Vec3::UnitZ(), {0.0, p.roll_rate, {}}});

    // Bobbing in the camera x-y plane, perpendicular to the centripetal
    // acceleration, keeps |a| inside the Table ranges.
    const double bob_amp = p.bob_accel / (p.bob_freq * p.bob_freq);
    m.cam_terms.push_back({Vec3::UnitX(), {0.0, 0.0, {{bob_amp, p.bob_freq, 0.0}}}});
    m.cam_terms.push_back({Vec3::UnitY(), {0.0, 0.0, {{bob_amp, p.bob_freq, M_PI_2}}}});

    for (int i = 0; i < 3; ++i) {
      const double f = freq_dist(rng);
      const double ph = phase_dist(rng);
      const double a = (p.perturb_accel / 3.0) / (f * f);
      m.cam_terms.push_back({Vec3::UnitX(), {0.0, 0.0, {{a, f, ph}}}});
      m.cam_terms.push_back({Vec3::UnitY(), {0.0, 0.0, {{a, f, ph + M_PI_2}}}});
    }
  }

  // Rotational shake about the camera x and y axes.
  if (p.perturb_rate > 0.0) {
    for (const Vec3& axis : {Vec3(Vec3::UnitX()), Vec3(Vec3::UnitY())}) {
      const double f = freq_dist(rng);
      const double ph = phase_dist(rng);
      m.factors.push_back({false, {}, axis, {0.0, 0.0, {{p.perturb_rate / f, f, ph}}}});
    }
  }
  return m;
}

const TrajectoryModel& model_for(const MotionScript& s) {
  using Key = std::tuple<int, int, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, TrajectoryModel> cache;
  std::lock_guard<std::mutex> lock(mu);
  const Key key{static_cast<int>(s.kind), static_cast<int>(s.difficulty), s.perturbation_seed};
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_model(s)).first;
  return it->second;
}

TrajectorySample to_sample(const Kinematics& k, double t) {
  TrajectorySample out;
  out.t = t;
  out.cam_from_world.rotation = k.wc.transpose();
  out.cam_from_world.translation = -(out.cam_from_world.rotation * k.pos);
  out.velocity_world = k.vel;
  out.accel_world = k.acc;
  out.omega_body = k.omega_body;
  return out;
}

}  // namespace

std::string script_name(const MotionScript& s) {
  std::string out = s.kind == MotionKind::translational ? "trans-" : "circ-";
  switch (s.difficulty) {
    case Difficulty::easy: return out + "easy";
    case Difficulty::medium: return out + "medium";
    case Difficulty::hard: return out + "hard";
  }
  return out + "?";
}

MotionScript parse_script(const std::string& name) {
  MotionScript s;
  const auto dash = name.find('-');
  if (dash == std::string::npos) throw std::invalid_argument("bad script name: " + name);
  const std::string kind = name.substr(0, dash);
  const std::string diff = name.substr(dash + 1);
  if (kind == "trans" || kind == "translational") s.kind = MotionKind::translational;
  else if (kind == "circ" || kind == "circular") s.kind = MotionKind::circular;
  else throw std::invalid_argument("bad script kind: " + name);
  if (diff == "easy") s.difficulty = Difficulty::easy;
  else if (diff == "medium") s.difficulty = Difficulty::medium;
  else if (diff == "hard") s.difficulty = Difficulty::hard;
  else throw std::invalid_argument("bad script difficulty: " + name);
  return s;
}

TrajectorySample sample_trajectory(const MotionScript& script, double t) {
  if (t < 0.0 || t > script.duration)
    throw std::out_of_range("sample_trajectory: t outside [0, duration]");
  return to_sample(evaluate(model_for(script), t), t);
}

ImuStream::ImuStream(const MotionScript& script, const ImuNoiseModel& noise,
                     std::uint64_t rng_seed)
    : script_(script), noise_(noise), rng_(rng_seed) {
  if (noise.sample_rate <= 0.0) throw std::invalid_argument("sample_rate must be > 0");
  dt_ = 1.0 / noise_.sample_rate;
  t_next_ = dt_;
  sigma_gyro_ = noise_.gyro_density * std::sqrt(noise_.sample_rate);
  sigma_accel_ = noise_.accel_density * std::sqrt(noise_.sample_rate);
  const TrajectoryModel& m = model_for(script_);
  pos_prev2_ = evaluate(m, -dt_).pos;
  const Kinematics k0 = evaluate(m, 0.0);
  pos_prev_ = k0.pos;
  wc_prev_ = k0.wc;
}

ImuSample ImuStream::next() {
  const double t = static_cast<double>(index_) * dt_;
  const Kinematics k = evaluate(model_for(script_), t);

  ImuSample s;
  s.t = t;
  // Exact increments: the noise-free stream reproduces the trajectory when
  // pushed through the discrete propagation equations.
  s.omega = geom::log_rotation(wc_prev_.transpose() * k.wc) / dt_;
  const Vec3 veff = (k.pos - pos_prev_) / dt_;
  const Vec3 veff_prev = (pos_prev_ - pos_prev2_) / dt_;
  s.accel = k.wc.transpose() * ((veff - veff_prev) / dt_ + kGravity);

  s.omega += noise_.gyro_bias;
  s.accel += noise_.accel_bias;
  if (sigma_gyro_ > 0.0 || sigma_accel_ > 0.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 3; ++i) s.omega[i] += sigma_gyro_ * n(rng_);
    for (int i = 0; i < 3; ++i) s.accel[i] += sigma_accel_ * n(rng_);
  }

  pos_prev2_ = pos_prev_;
  pos_prev_ = k.pos;
  wc_prev_ = k.wc;
  ++index_;
  t_next_ = static_cast<double>(index_) * dt_;
  return s;
}

std::vector<FrameEvent> schedule_frames(const MotionScript& script, double frame_rate) {
  if (frame_rate <= 0.0) throw std::invalid_argument("frame_rate must be > 0");
  const auto count = static_cast<std::int64_t>(std::llround(script.duration * frame_rate));
  std::vector<FrameEvent> out;
  out.reserve(static_cast<size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    FrameEvent e;
    e.t = static_cast<double>(i) / frame_rate;
    e.frame_id = i;
    e.true_cam_from_world = sample_trajectory(script, e.t).cam_from_world;
    out.push_back(e);
  }
  return out;
}

InitialState initial_state(const MotionScript& script, double imu_rate) {
  if (imu_rate <= 0.0) throw std::invalid_argument("imu_rate must be > 0");
  const double dt = 1.0 / imu_rate;
  const TrajectoryModel& m = model_for(script);
  const Kinematics k0 = evaluate(m, 0.0);
  const Kinematics km = evaluate(m, -dt);
  InitialState out;
  out.cam_from_world.rotation = k0.wc.transpose();
  out.cam_from_world.translation = -(out.cam_from_world.rotation * k0.pos);
  out.velocity_world = (k0.pos - km.pos) / dt;
  return out;
}

const Vec3& default_gravity() {
  static const Vec3 g = kGravity;
  return g;
}

}  // namespace viot::motion
