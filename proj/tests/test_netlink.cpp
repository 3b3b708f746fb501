#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "viot/geom.hpp"
#include "viot/netlink.hpp"

#include <cstring>
#include <random>
#include <thread>
#include <vector>

using namespace viot;
using netlink::LatencyModel;
using netlink::MessageKind;
using netlink::SimChannel;
using netlink::WireError;
using netlink::WireErrorCode;
using netlink::WireMessage;

namespace {

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

TEST_CASE("round-trip delay formula hits its documented endpoints") {
  LatencyModel m;  // 50 Mbps, 10 ms propagation, U(0, 30) ms extra
  // 100 kB at 50 Mbps: 100 * 8 / (1024 * 50) s = 15.625 ms; + 2*10 ms
  CHECK(netlink::compute_delay(102400, m, 0.0) == doctest::Approx(35.625));
  CHECK(netlink::compute_delay(102400, m, 30.0) == doctest::Approx(65.625));
  // 10 kB response leg: 1.5625 + 20
  CHECK(netlink::compute_delay(10240, m, 0.0) == doctest::Approx(21.5625));
  CHECK_THROWS(netlink::compute_delay(0, m, 0.0));
}

TEST_CASE("codec round trips random messages") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> u64;
  std::uniform_int_distribution<int> len(0, 300);
  std::uniform_int_distribution<int> byte(0, 255);
  std::normal_distribution<double> n(0.0, 1.0);

  for (int i = 0; i < 10000; ++i) {
    WireMessage m;
    m.kind = (i % 2 == 0) ? MessageKind::request : MessageKind::response;
    m.request_id = u64(rng);
    m.t0_nanos = u64(rng);
    if (m.kind == MessageKind::request) {
      m.payload.resize(static_cast<size_t>(len(rng)));
      for (auto& b : m.payload) b = static_cast<std::uint8_t>(byte(rng));
    } else {
      m.status = static_cast<std::uint8_t>(i % 2);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m.pose.rotation(r, c) = n(rng);
      m.pose.translation = geom::Vec3(n(rng), n(rng), n(rng));
    }
    const WireMessage back = netlink::decode_message(netlink::encode_message(m));
    CHECK(back.version == m.version);
    CHECK(back.kind == m.kind);
    CHECK(back.request_id == m.request_id);
    CHECK(back.t0_nanos == m.t0_nanos);
    if (m.kind == MessageKind::request) {
      CHECK(back.payload == m.payload);
    } else {
      CHECK(back.status == m.status);
      CHECK((back.pose.rotation - m.pose.rotation).norm() == 0.0);
      CHECK((back.pose.translation - m.pose.translation).norm() == 0.0);
    }
  }
}

// Golden-bytes fixture: the exact wire layout of a small request. Any codec
// change that breaks compatibility must break this test.
TEST_CASE("request encoding matches the golden byte layout") {
  WireMessage m;
  m.kind = MessageKind::request;
  m.request_id = 0x0102030405060708ull;
  m.t0_nanos = 123456789ull;
  m.payload = {0xde, 0xad, 0xbe, 0xef};

  std::vector<std::uint8_t> golden = {'V', 'I', 'O', 'T', 0x01, 0x00, 0x01};
  append_u64_le(golden, m.request_id);
  append_u64_le(golden, m.t0_nanos);
  golden.insert(golden.end(), {0xde, 0xad, 0xbe, 0xef});

  CHECK(netlink::encode_message(m) == golden);
}

TEST_CASE("response encoding matches the golden byte layout") {
  WireMessage m;
  m.kind = MessageKind::response;
  m.request_id = 7;
  m.t0_nanos = 0;
  m.status = 1;
  // identity pose: rotation rows (1,0,0),(0,1,0),(0,0,1); zero translation

  std::vector<std::uint8_t> golden = {'V', 'I', 'O', 'T', 0x01, 0x00, 0x02};
  append_u64_le(golden, 7);
  append_u64_le(golden, 0);
  golden.push_back(1);  // status
  const std::uint64_t one_bits = 0x3ff0000000000000ull;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) append_u64_le(golden, r == c ? one_bits : 0ull);
  for (int i = 0; i < 3; ++i) append_u64_le(golden, 0ull);

  CHECK(netlink::encode_message(m) == golden);
  const WireMessage back = netlink::decode_message(golden);
  CHECK(back.status == 1);
  CHECK((back.pose.rotation - geom::Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("decoder rejects malformed frames with typed errors") {
  WireMessage m;
  m.kind = MessageKind::response;
  auto bytes = netlink::encode_message(m);

  auto code_of = [](const std::vector<std::uint8_t>& b) {
    try {
      netlink::decode_message(b);
    } catch (const WireError& e) {
      return e.code;
    }
    throw std::runtime_error("expected WireError");
  };

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of(bad_magic) == WireErrorCode::bad_magic);

  auto bad_version = bytes;
  bad_version[4] = 0x63;
  CHECK(code_of(bad_version) == WireErrorCode::bad_version);

  auto bad_kind = bytes;
  bad_kind[6] = 9;
  CHECK(code_of(bad_kind) == WireErrorCode::bad_kind);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 5);
  CHECK(code_of(truncated) == WireErrorCode::truncated);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(code_of(trailing) == WireErrorCode::truncated);

  std::vector<std::uint8_t> tiny = {'V', 'I'};
  CHECK(code_of(tiny) == WireErrorCode::truncated);
}

TEST_CASE("simulated channel delays land in range and respect FIFO order") {
  LatencyModel m;
  m.rng_seed = 5;
  SimChannel ch(m);

  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    // sends spaced 1 s apart so the FIFO clamp never binds
    const double now = static_cast<double>(i);
    const auto at = ch.send_client_to_server(now);
    REQUIRE(at.has_value());
    const double delay_ms = (*at - now) * 1e3;
    CHECK(delay_ms >= 35.625 - 1e-9);
    CHECK(delay_ms <= 65.625 + 1e-9);
    sum += delay_ms;
  }
  // U(0,30) extra delay: mean total ≈ 35.625 + 15
  CHECK(sum / n == doctest::Approx(50.625).epsilon(0.01));
}

TEST_CASE("simulated channel FIFO clamp binds across send times") {
  LatencyModel m;
  m.extra_delay_lo_ms = 0.0;
  m.extra_delay_hi_ms = 30.0;
  m.rng_seed = 1;
  SimChannel ch(m);
  // a message sent now with a large draw can outlast one sent slightly later
  // with a small draw; the second must be clamped to the first's delivery
  double last = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double now = i * 1e-4;
    const auto at = ch.send_client_to_server(now);
    REQUIRE(at.has_value());
    CHECK(*at >= last);
    last = *at;
  }
}

TEST_CASE("simulated channel is deterministic and drops when asked") {
  LatencyModel m;
  m.rng_seed = 77;
  SimChannel a(m), b(m);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.send_client_to_server(0.1 * i) == b.send_client_to_server(0.1 * i));
    CHECK(a.send_server_to_client(0.1 * i) == b.send_server_to_client(0.1 * i));
  }

  LatencyModel dropall = m;
  dropall.drop_probability = 1.0;
  SimChannel d(dropall);
  CHECK(!d.send_client_to_server(0.0).has_value());
}

TEST_CASE("socket loopback carries frames both ways") {
  netlink::Listener listener("127.0.0.1", 0);
  netlink::Socket server;
  std::thread t([&] { server = listener.accept(); });
  netlink::Socket client = netlink::connect_to("127.0.0.1", listener.port());
  t.join();

  const std::vector<std::uint8_t> blob = {1, 2, 3, 4, 5};
  client.send_frame(blob);
  auto got = server.recv_frame();
  REQUIRE(got.has_value());
  CHECK(*got == blob);

  WireMessage m;
  m.kind = MessageKind::response;
  m.request_id = 9;
  server.send_message(m);
  const auto back = client.recv_message();
  REQUIRE(back.has_value());
  CHECK(back->request_id == 9);

  client.close();
  CHECK(!server.recv_frame().has_value());  // orderly shutdown
}

TEST_CASE("address parsing accepts host:port and rejects junk") {
  const auto [h1, p1] = netlink::parse_address("127.0.0.1:8080");
  CHECK(h1 == "127.0.0.1");
  CHECK(p1 == 8080);

  const auto [h2, p2] = netlink::parse_address(":443");
  CHECK(h2 == "127.0.0.1");
  CHECK(p2 == 443);

  CHECK_THROWS_AS((void)netlink::parse_address("no-port"), std::invalid_argument);
  CHECK_THROWS_AS((void)netlink::parse_address("host:0"), std::invalid_argument);
  CHECK_THROWS_AS((void)netlink::parse_address("host:99999"), std::invalid_argument);
  CHECK_THROWS_AS((void)netlink::parse_address("host:"), std::invalid_argument);
}
