#include "viot/backend.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <unordered_set>

namespace viot::backend {

namespace {

constexpr std::size_t kHintBytes = 96;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::uint8_t> make_payload(const Pose& hint, std::size_t size) {
  std::vector<std::uint8_t> out(std::max(size, kHintBytes), 0);
  double vals[12];
  int k = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) vals[k++] = hint.rotation(r, c);
  for (int i = 0; i < 3; ++i) vals[k++] = hint.translation[i];
  std::memcpy(out.data(), vals, sizeof(vals));
  return out;
}

std::optional<Pose> parse_payload(std::span<const std::uint8_t> payload) {
  if (payload.size() < kHintBytes) return std::nullopt;
  double vals[12];
  std::memcpy(vals, payload.data(), sizeof(vals));
  Pose p;
  int k = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = vals[k++];
  for (int i = 0; i < 3; ++i) p.translation[i] = vals[k++];
  if (!geom::is_rotation(p.rotation, 1e-6)) return std::nullopt;
  return p;
}

PoseResponse estimate(const PoseRequest& req, const BackendConfig& cfg) {
  PoseResponse resp;
  resp.request_id = req.request_id;
  resp.t0 = req.t0;
  resp.pose = req.true_pose_hint;
  if (cfg.mode == BackendMode::noisy &&
      (cfg.trans_noise_sigma > 0.0 || cfg.rot_noise_sigma > 0.0)) {
    std::mt19937_64 rng(splitmix64(cfg.rng_seed ^ splitmix64(req.request_id)));
    std::normal_distribution<double> n(0.0, 1.0);
    geom::Vec3 dt(n(rng), n(rng), n(rng));
    geom::Vec3 axis(n(rng), n(rng), n(rng));
    const double angle = std::abs(n(rng)) * cfg.rot_noise_sigma;
    resp.pose.translation += cfg.trans_noise_sigma * dt;
    // World-side composition: an orientation misestimate that leaves the
    // object's camera-frame position untouched, matching an estimator that
    // localizes the object well but is slightly off on its attitude.
    if (axis.norm() > 1e-12 && angle > 0.0)
      resp.pose.rotation = resp.pose.rotation * geom::axis_angle(axis, angle);
  }
  return resp;
}

netlink::WireMessage to_wire(const PoseRequest& req) {
  netlink::WireMessage m;
  m.kind = netlink::MessageKind::request;
  m.request_id = req.request_id;
  m.t0_nanos = static_cast<std::uint64_t>(std::llround(req.t0 * 1e9));
  m.payload = req.payload;
  return m;
}

netlink::WireMessage to_wire(const PoseResponse& resp) {
  netlink::WireMessage m;
  m.kind = netlink::MessageKind::response;
  m.request_id = resp.request_id;
  m.t0_nanos = static_cast<std::uint64_t>(std::llround(resp.t0 * 1e9));
  m.status = resp.ok ? 0 : 1;
  m.pose = resp.pose;
  return m;
}

PoseRequest request_from_wire(const netlink::WireMessage& m) {
  PoseRequest req;
  req.request_id = m.request_id;
  req.t0 = static_cast<double>(m.t0_nanos) * 1e-9;
  req.payload = m.payload;
  if (auto hint = parse_payload(req.payload)) req.true_pose_hint = *hint;
  return req;
}

PoseResponse response_from_wire(const netlink::WireMessage& m) {
  PoseResponse resp;
  resp.request_id = m.request_id;
  resp.t0 = static_cast<double>(m.t0_nanos) * 1e-9;
  resp.ok = m.status == 0;
  resp.pose = m.pose;
  return resp;
}

void serve_connection(netlink::Socket& sock, const BackendConfig& cfg) {
  std::unordered_set<std::uint64_t> seen;
  while (true) {
    std::optional<netlink::WireMessage> msg;
    try {
      msg = sock.recv_message();
    } catch (const netlink::WireError&) {
      return;  // framing violation: drop the connection
    }
    if (!msg) return;
    if (msg->kind != netlink::MessageKind::request) return;

    PoseRequest req = request_from_wire(*msg);
    PoseResponse resp;
    if (!seen.insert(req.request_id).second) {
      resp.request_id = req.request_id;
      resp.t0 = req.t0;
      resp.ok = false;
    } else if (!parse_payload(req.payload)) {
      resp.request_id = req.request_id;
      resp.t0 = req.t0;
      resp.ok = false;
    } else {
      resp = estimate(req, cfg);
    }
    sock.send_message(to_wire(resp));
  }
}

void serve(netlink::Listener& listener, const BackendConfig& cfg,
           const std::atomic<bool>* stop) {
  while (stop == nullptr || !stop->load()) {
    netlink::Socket conn;
    try {
      conn = listener.accept();
    } catch (const netlink::TransportError&) {
      return;  // listener closed
    }
    try {
      serve_connection(conn, cfg);
    } catch (const netlink::TransportError&) {
      // dropped connection: back to accepting
    }
  }
}

}  // namespace viot::backend
