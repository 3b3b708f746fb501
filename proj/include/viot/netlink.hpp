#pragma once

#include "viot/geom.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace viot::netlink {

using geom::Pose;

struct LatencyModel {
  double bandwidth_mbps = 50.0;
  double propagation_delay_ms = 10.0;
  double extra_delay_lo_ms = 0.0;
  double extra_delay_hi_ms = 30.0;
  std::size_t request_size = 102400;   // bytes
  std::size_t response_size = 10240;   // bytes
  std::uint64_t rng_seed = 0;
  // Default (aggregate) mode charges the whole round trip on the request
  // leg, mirroring the single-number delay formula; split mode charges each
  // leg its own transmission + propagation + draw.
  bool split = false;
  double drop_probability = 0.0;
};

/// (size/1024 kB) * 8 / (1024 * bandwidth) * 1e3 + 2 * propagation + draw, in ms.
double compute_delay(std::size_t size_bytes, const LatencyModel& model, double draw_ms);

enum class MessageKind : std::uint8_t { request = 1, response = 2 };

inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr char kWireMagic[4] = {'V', 'I', 'O', 'T'};
inline constexpr std::size_t kMaxFrameBytes = 16ull * 1024 * 1024;

struct WireMessage {
  std::uint16_t version = kWireVersion;
  MessageKind kind = MessageKind::request;
  std::uint64_t request_id = 0;
  std::uint64_t t0_nanos = 0;
  // request body
  std::vector<std::uint8_t> payload;
  // response body
  std::uint8_t status = 0;  // 0 = ok, 1 = failed
  Pose pose;
};

enum class WireErrorCode { bad_magic, bad_version, bad_kind, truncated, frame_too_large };

struct WireError : std::runtime_error {
  WireErrorCode code;
  WireError(WireErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
};

std::vector<std::uint8_t> encode_message(const WireMessage& m);
WireMessage decode_message(std::span<const std::uint8_t> bytes);  // throws WireError

/// Deterministic per-message delivery times over a virtual clock.
/// FIFO is enforced per direction: a delivery never lands before the
/// previously scheduled one.
class SimChannel {
 public:
  explicit SimChannel(const LatencyModel& model);

  /// Returns the virtual delivery time, or nullopt when the message is
  /// dropped (drop_probability > 0).
  std::optional<double> send_client_to_server(double now_s);
  std::optional<double> send_server_to_client(double now_s);

  const LatencyModel& model() const { return model_; }

 private:
  std::optional<double> schedule(double now_s, std::size_t size, bool charge_full,
                                 double& fifo_floor);

  LatencyModel model_;
  std::mt19937_64 rng_;
  double last_c2s_ = -1.0;
  double last_s2c_ = -1.0;
};

/// Blocking length-prefixed framing over a TCP socket (RAII fd).
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  bool valid() const { return fd_ >= 0; }
  void close();

  void send_frame(std::span<const std::uint8_t> bytes);
  /// nullopt on orderly peer shutdown between frames.
  std::optional<std::vector<std::uint8_t>> recv_frame();

  void send_message(const WireMessage& m) { send_frame(encode_message(m)); }
  std::optional<WireMessage> recv_message();

 private:
  int fd_ = -1;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Socket connect_to(const std::string& host, std::uint16_t port);

class Listener {
 public:
  Listener(const std::string& host, std::uint16_t port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  Socket accept();
  std::uint16_t port() const { return port_; }
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// "host:port" -> pair; throws std::invalid_argument.
std::pair<std::string, std::uint16_t> parse_address(const std::string& addr);

inline constexpr std::uint16_t kDefaultPort = 47474;

}  // namespace viot::netlink
