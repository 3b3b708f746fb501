#pragma once

#include "viot/geom.hpp"
#include "viot/netlink.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <vector>

namespace viot::backend {

using geom::Pose;

enum class BackendMode { gt, noisy };

struct BackendConfig {
  BackendMode mode = BackendMode::gt;
  double trans_noise_sigma = 0.003;  // meters, per axis
  double rot_noise_sigma = 0.006;    // radians
  std::uint64_t rng_seed = 0;
  double compute_delay_s = 0.0;
};

struct PoseRequest {
  std::uint64_t request_id = 0;
  double t0 = 0.0;
  std::vector<std::uint8_t> payload;
  Pose true_pose_hint;  // simulation-only side channel, duplicated in payload
};

struct PoseResponse {
  std::uint64_t request_id = 0;
  double t0 = 0.0;
  Pose pose;
  bool ok = true;
};

/// Payload blob: the pose hint in the first 96 bytes (12 LE doubles,
/// row-major rotation then translation), zero-filled to `size`.
std::vector<std::uint8_t> make_payload(const Pose& hint, std::size_t size);
std::optional<Pose> parse_payload(std::span<const std::uint8_t> payload);

/// gt mode echoes the hint; noisy mode adds per-axis Gaussian translation
/// noise and a random-axis rotation of angle |N(0, sigma^2)|. Deterministic
/// given (seed, request_id).
PoseResponse estimate(const PoseRequest& req, const BackendConfig& cfg);

/// Request-response loop over one connection; duplicate request ids on a
/// connection are answered with a failed status. Returns when the peer
/// disconnects.
void serve_connection(netlink::Socket& sock, const BackendConfig& cfg);

/// Accept loop; serves connections sequentially until `stop` is set (checked
/// between connections) or the listener is closed.
void serve(netlink::Listener& listener, const BackendConfig& cfg,
           const std::atomic<bool>* stop = nullptr);

netlink::WireMessage to_wire(const PoseRequest& req);
netlink::WireMessage to_wire(const PoseResponse& resp);
PoseRequest request_from_wire(const netlink::WireMessage& m);
PoseResponse response_from_wire(const netlink::WireMessage& m);

}  // namespace viot::backend
