#include "viot/netlink.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <utility>

namespace viot::netlink {

double compute_delay(std::size_t size_bytes, const LatencyModel& model, double draw_ms) {
  if (size_bytes == 0) throw std::invalid_argument("compute_delay: size must be > 0");
  double transmission = 0.0;
  if (model.bandwidth_mbps > 0.0) {
    const double size_kb = static_cast<double>(size_bytes) / 1024.0;
    transmission = size_kb * 8.0 / (1024.0 * model.bandwidth_mbps) * 1e3;
  }
  return transmission + 2.0 * model.propagation_delay_ms + draw_ms;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw WireError(WireErrorCode::truncated, "truncated message");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(data[pos]) |
                            static_cast<std::uint16_t>(data[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_message(const WireMessage& m) {
  std::vector<std::uint8_t> out;
  out.reserve(27 + (m.kind == MessageKind::request ? m.payload.size() : 97));
  out.insert(out.end(), kWireMagic, kWireMagic + 4);
  put_u16(out, m.version);
  out.push_back(static_cast<std::uint8_t>(m.kind));
  put_u64(out, m.request_id);
  put_u64(out, m.t0_nanos);
  if (m.kind == MessageKind::request) {
    out.insert(out.end(), m.payload.begin(), m.payload.end());
  } else {
    out.push_back(m.status);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put_f64(out, m.pose.rotation(r, c));
    for (int i = 0; i < 3; ++i) put_f64(out, m.pose.translation[i]);
  }
  return out;
}

WireMessage decode_message(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kWireMagic, 4) != 0)
    throw WireError(WireErrorCode::bad_magic, "bad magic");
  r.pos = 4;
  WireMessage m;
  m.version = r.u16();
  if (m.version != kWireVersion)
    throw WireError(WireErrorCode::bad_version, "unknown wire version");
  const std::uint8_t kind = r.u8();
  if (kind != 1 && kind != 2) throw WireError(WireErrorCode::bad_kind, "unknown message kind");
  m.kind = static_cast<MessageKind>(kind);
  m.request_id = r.u64();
  m.t0_nanos = r.u64();
  if (m.kind == MessageKind::request) {
    m.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), bytes.end());
  } else {
    m.status = r.u8();
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) m.pose.rotation(row, col) = r.f64();
    for (int i = 0; i < 3; ++i) m.pose.translation[i] = r.f64();
    if (r.pos != bytes.size())
      throw WireError(WireErrorCode::truncated, "trailing bytes in response");
  }
  return m;
}

SimChannel::SimChannel(const LatencyModel& model) : model_(model), rng_(model.rng_seed) {
  if (model.extra_delay_lo_ms > model.extra_delay_hi_ms)
    throw std::invalid_argument("extra delay range inverted");
}

std::optional<double> SimChannel::schedule(double now_s, std::size_t size, bool charge_full,
                                           double& fifo_floor) {
  if (model_.drop_probability > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng_) < model_.drop_probability) return std::nullopt;
  }
  double delay_ms = 0.0;
  if (charge_full) {
    double draw = model_.extra_delay_lo_ms;
    if (model_.extra_delay_hi_ms > model_.extra_delay_lo_ms) {
      std::uniform_real_distribution<double> u(model_.extra_delay_lo_ms, model_.extra_delay_hi_ms);
      draw = u(rng_);
    }
    delay_ms = compute_delay(std::max<std::size_t>(size, 1), model_, draw);
  }
  double at = now_s + delay_ms * 1e-3;
  if (at < fifo_floor) at = fifo_floor;
  fifo_floor = at;
  return at;
}

std::optional<double> SimChannel::send_client_to_server(double now_s) {
  // Aggregate mode charges the request leg the whole round-trip formula.
  return schedule(now_s, model_.request_size, true, last_c2s_);
}

std::optional<double> SimChannel::send_server_to_client(double now_s) {
  if (!model_.split) {
    // Already paid for on the request leg.
    double at = now_s;
    if (at < last_s2c_) at = last_s2c_;
    last_s2c_ = at;
    return at;
  }
  return schedule(now_s, model_.response_size, true, last_s2c_);
}

Socket::Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Socket::~Socket() { close(); }

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::send_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() > kMaxFrameBytes) throw WireError(WireErrorCode::frame_too_large, "frame too large");
  std::uint8_t header[4];
  const std::uint32_t len = static_cast<std::uint32_t>(bytes.size());
  for (int i = 0; i < 4; ++i) header[i] = static_cast<std::uint8_t>((len >> (8 * i)) & 0xff);
  auto send_all = [this](const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
      const ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send: ") + std::strerror(errno));
      }
      p += w;
      n -= static_cast<std::size_t>(w);
    }
  };
  send_all(header, 4);
  send_all(bytes.data(), bytes.size());
}

std::optional<std::vector<std::uint8_t>> Socket::recv_frame() {
  auto recv_all = [this](std::uint8_t* p, std::size_t n, bool allow_eof) -> bool {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, p + got, n - got, 0);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("recv: ") + std::strerror(errno));
      }
      if (r == 0) {
        if (allow_eof && got == 0) return false;
        throw WireError(WireErrorCode::truncated, "connection closed mid-frame");
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  };
  std::uint8_t header[4];
  if (!recv_all(header, 4, true)) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(header[i]) << (8 * i);
  if (len > kMaxFrameBytes) throw WireError(WireErrorCode::frame_too_large, "frame too large");
  std::vector<std::uint8_t> body(len);
  if (len > 0) recv_all(body.data(), len, false);
  return body;
}

std::optional<WireMessage> Socket::recv_message() {
  auto frame = recv_frame();
  if (!frame) return std::nullopt;
  return decode_message(*frame);
}

Socket connect_to(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0) throw TransportError(std::string("getaddrinfo: ") + gai_strerror(rc));
  int fd = -1;
  std::string last_err = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_err = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("connect to " + host + ":" + service + ": " + last_err);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(fd);
}

Listener::Listener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    hostent* he = ::gethostbyname(host.c_str());
    if (he == nullptr || he->h_addrtype != AF_INET) {
      ::close(fd_);
      fd_ = -1;
      throw TransportError("cannot resolve bind address: " + host);
    }
    std::memcpy(&addr.sin_addr, he->h_addr, sizeof(addr.sin_addr));
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw TransportError("bind: " + err);
  }
  if (::listen(fd_, 8) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw TransportError("listen: " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    // shutdown() wakes any thread blocked in accept(); close() alone does not
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

Socket Listener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno == EINTR) continue;
    throw TransportError(std::string("accept: ") + std::strerror(errno));
  }
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 >= addr.size())
    throw std::invalid_argument("address must be HOST:PORT: " + addr);
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));
  if (port <= 0 || port > 65535) throw std::invalid_argument("bad port in address: " + addr);
  return {host.empty() ? std::string("127.0.0.1") : host, static_cast<std::uint16_t>(port)};
}

}  // namespace viot::netlink
