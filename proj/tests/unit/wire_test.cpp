#include <gtest/gtest.h>

#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "v2h/wire/client.hpp"
#include "v2h/wire/codec.hpp"
#include "v2h/wire/frame.hpp"
#include "v2h/wire/register_map.hpp"
#include "v2h/wire/register_store.hpp"
#include "v2h/wire/tcp.hpp"
#include "support/properties.hpp"

using namespace v2h::wire;

using v2h::testing::Bytes;

TEST(Frame, ReadRequestBytesMatchProtocolTables) {
  const auto bytes = encode_frame(read_request(1, 1, 0x0000, 2));
  const Bytes expected{0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x03, 0x00, 0x00, 0x00, 0x02};
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(decode_frame(bytes, FrameKind::Request), read_request(1, 1, 0x0000, 2));
}

TEST(Frame, WriteMultipleBytes) {
  const auto bytes = encode_frame(write_request(0x1234, 2, 0x0102, {0xFFFF, 0xE900}));
  const Bytes expected{0x12, 0x34, 0x00, 0x00, 0x00, 0x0B, 0x02, 0x10, 0x01, 0x02,
                       0x00, 0x02, 0x04, 0xFF, 0xFF, 0xE9, 0x00};
  EXPECT_EQ(bytes, expected);
}

TEST(Frame, CountBoundsRejected) {
  auto code_of = [](const RegisterFrame& f) {
    try {
      encode_frame(f);
    } catch (const WireError& e) {
      return e.code();
    }
    return WireErrc::MalformedPdu;
  };
  EXPECT_EQ(code_of(write_request(1, 2, 0x100, {})), WireErrc::InvalidCount);
  EXPECT_EQ(code_of(read_request(1, 1, 0, 0)), WireErrc::InvalidCount);
  EXPECT_EQ(code_of(read_request(1, 1, 0, kMaxReadCount + 1)), WireErrc::InvalidCount);
  EXPECT_EQ(code_of(write_request(1, 2, 0, std::vector<std::uint16_t>(kMaxWriteCount + 1))), WireErrc::InvalidCount);
  EXPECT_NO_THROW(encode_frame(read_request(1, 1, 0, kMaxReadCount)));
  EXPECT_NO_THROW(encode_frame(write_request(1, 1, 0, std::vector<std::uint16_t>(kMaxWriteCount))));
}

TEST(Frame, UnsupportedFunction) {
  Bytes bytes{0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x06, 0x00, 0x10, 0x00, 0x01};
  try {
    decode_frame(bytes, FrameKind::Request);
    FAIL() << "decoded function 0x06";
  } catch (const WireError& e) {
    EXPECT_EQ(e.code(), WireErrc::UnsupportedFunction);
  }
}

TEST(Frame, TruncatedLength) {
  Bytes bytes = encode_frame(read_request(1, 1, 0, 2));
  ASSERT_EQ(bytes.size(), 12u);
  bytes[4] = 0xFF;
  bytes[5] = 0xFF;
  try {
    decode_frame(bytes, FrameKind::Request);
    FAIL() << "accepted a truncated frame";
  } catch (const WireError& e) {
    EXPECT_EQ(e.code(), WireErrc::Truncated);
  }
}

TEST(Frame, MalformedPdu) {
  Bytes bytes = encode_frame(write_request(1, 2, 0x100, {1, 2}));
  bytes[12] = 3;  // byte count disagrees with register count
  EXPECT_THROW(decode_frame(bytes, FrameKind::Request), WireError);
  Bytes bad_protocol = encode_frame(read_request(1, 1, 0, 2));
  bad_protocol[3] = 1;
  EXPECT_THROW(decode_frame(bad_protocol, FrameKind::Request), WireError);
}

TEST(FrameProperty, RandomFramesMatchReferenceAndRoundTrip) {
  const auto r = v2h::testing::frame_roundtrip(20000, 0xC0FFEE);
  EXPECT_EQ(r.failures, 0) << "of " << r.cases;
}

TEST(FrameProperty, ReferenceEncoderAgreesOnKnownFrame) {
  const auto f = read_request(1, 1, 0, 2);
  EXPECT_EQ(v2h::testing::reference_bytes(f), encode_frame(f));
}

TEST(Codec, PowerExamples) {
  EXPECT_EQ(encode_power(6.3), (WordPair{0x0000, 0x189C}));
  EXPECT_EQ(encode_power(-6.3), (WordPair{0xFFFF, 0xE764}));
  EXPECT_EQ(encode_power(0.0), (WordPair{0x0000, 0x0000}));
  EXPECT_EQ(join_i32(encode_power(0.328)), 328);
  // two's complement of 5888 in 32 bits, split into words
  const std::uint32_t u = 0x100000000ULL - 5888;
  EXPECT_EQ(encode_power(-5.888), (WordPair{static_cast<std::uint16_t>(u >> 16), static_cast<std::uint16_t>(u & 0xFFFF)}));
  EXPECT_THROW(encode_power(2.5e6), std::out_of_range);
}

TEST(CodecProperty, PowerRoundTripOnWattGrid) {
  const auto r = v2h::testing::codec_roundtrip(20000, 7);
  EXPECT_EQ(r.failures, 0) << "of " << r.cases;
  int failures = 0;
  for (int w = -10000; w <= 10000; ++w) {
    const double kw = w / 1000.0;
    if (decode_power(encode_power(kw)) != kw) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(Codec, OtherEncodings) {
  EXPECT_EQ(encode_soc(50.0), 500);
  EXPECT_EQ(encode_soc(150.0), 1000);
  EXPECT_EQ(encode_soc(-3.0), 0);
  EXPECT_DOUBLE_EQ(decode_soc(853), 85.3);
  EXPECT_EQ(encode_volts(375.0), 3750);
  EXPECT_DOUBLE_EQ(decode_volts(3750), 375.0);
  EXPECT_EQ(join_i32(encode_current(-12.5)), -12500);
  EXPECT_DOUBLE_EQ(decode_current(encode_current(17.0)), 17.0);
  EXPECT_EQ(scale(Encoding::Soc_tenthPct_u16, 1000).value, 100.0);
  EXPECT_EQ(scale(Encoding::PowerWatts_i32, -6300).unit, "kW");
}

TEST(RegisterMapTest, NormativeLayout) {
  const auto m = meter::register_map();
  ASSERT_NE(m.at(0x0000), nullptr);
  EXPECT_EQ(m.at(0x0000)->width(), 2);
  EXPECT_EQ(m.at(0x0001), nullptr);
  const auto c = charger::register_map();
  EXPECT_EQ(c.at(0x0100)->access, Access::RW);
  EXPECT_EQ(c.at(0x0102)->encoding, Encoding::PowerWatts_i32);
  EXPECT_EQ(c.at(0x0104)->access, Access::RO);
  EXPECT_EQ(c.at(0x0107)->encoding, Encoding::Enum_u16);
  EXPECT_EQ(c.end_address(), 0x0109u);
  EXPECT_THROW(RegisterMap({{0, Encoding::PowerWatts_i32, Access::RO, "a"}, {1, Encoding::Enum_u16, Access::RO, "b"}}),
               std::invalid_argument);
}

TEST(RegisterMapTest, RangeChecks) {
  const auto c = charger::register_map();
  EXPECT_EQ(c.check_range(0x0100, 9, false), std::nullopt);
  EXPECT_EQ(c.check_range(0x0103, 1, false), ExceptionCode::IllegalDataAddress);  // splits the setpoint
  EXPECT_EQ(c.check_range(0x0100, 10, false), ExceptionCode::IllegalDataAddress);
  EXPECT_EQ(c.check_range(0x0102, 2, true), std::nullopt);
  EXPECT_EQ(c.check_range(0x0102, 4, true), ExceptionCode::IllegalFunction);
}

namespace {

struct MeterFixture : ::testing::Test {
  RegisterStore store{meter::register_map()};
  RegisterSlave slave{meter::kUnitId, store};

  void set_net_power(double kw) {
    RegisterImage img(store.map());
    img.set_power_kw(meter::kNetPower, kw);
    store.publish(img);
  }
};

}  // namespace

TEST_F(MeterFixture, ServesNetPowerOverTcp) {
  set_net_power(0.328);
  TcpRegisterServer server(slave, Endpoint{"127.0.0.1", 0});
  TcpRegisterClient client(server.endpoint(), meter::kUnitId, "meter");
  const auto words = client.read_holding(meter::kNetPower, 2);
  EXPECT_EQ(join_i32({words[0], words[1]}), 328);
}

TEST_F(MeterFixture, ExceptionsOverTcp) {
  TcpRegisterServer server(slave, Endpoint{"127.0.0.1", 0});
  TcpRegisterClient client(server.endpoint(), meter::kUnitId, "meter");
  const std::uint16_t words[] = {0, 1};
  try {
    client.write_multiple(meter::kNetPower, words);
    FAIL() << "write to a read-only register succeeded";
  } catch (const DeviceException& e) {
    EXPECT_EQ(e.code(), ExceptionCode::IllegalFunction);
  }
  try {
    client.read_holding(0x7FFF, 1);
    FAIL() << "read of an unmapped register succeeded";
  } catch (const DeviceException& e) {
    EXPECT_EQ(e.code(), ExceptionCode::IllegalDataAddress);
  }
  // the connection survives exceptions
  EXPECT_NO_THROW(client.read_holding(0, 4));
}

TEST_F(MeterFixture, WrongUnitAndUnsupportedFunction) {
  const auto reply = slave.handle(read_request(9, 7, 0, 2));
  ASSERT_TRUE(reply.exception);
  EXPECT_EQ(*reply.exception, ExceptionCode::GatewayTargetFailed);

  const Bytes fc06{0x00, 0x09, 0x00, 0x00, 0x00, 0x06, 0x01, 0x06, 0x00, 0x00, 0x00, 0x01};
  const auto raw = slave.handle_bytes(fc06);
  ASSERT_TRUE(raw);
  EXPECT_EQ((*raw)[7], 0x86);
  EXPECT_EQ((*raw)[8], static_cast<std::uint8_t>(ExceptionCode::IllegalFunction));
}

TEST(Server, NoTornReadsUnderConcurrentWrites) {
  RegisterStore store(charger::register_map());
  RegisterSlave slave(charger::kUnitId, store);
  TcpRegisterServer server(slave, Endpoint{"127.0.0.1", 0});

  // Writers alternate between two setpoints whose words differ in both halves.
  const auto a = encode_power(-6.3), b = encode_power(70000.0);
  std::atomic<bool> stop{false};
  std::vector<std::thread> writers;
  for (int k = 0; k < 2; ++k) {
    writers.emplace_back([&, k] {
      TcpRegisterClient w(server.endpoint(), charger::kUnitId, "writer");
      bool flip = k == 0;
      while (!stop) {
        const auto& v = flip ? a : b;
        const std::uint16_t words[] = {v.hi, v.lo};
        w.write_multiple(charger::kSetpoint, words);
        flip = !flip;
      }
    });
  }
  TcpRegisterClient reader(server.endpoint(), charger::kUnitId, "reader");
  int torn = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto words = reader.read_holding(charger::kSetpoint, 2);
    const WordPair got{words[0], words[1]};
    if (!(got == a || got == b || got == WordPair{})) ++torn;
  }
  stop = true;
  for (auto& t : writers) t.join();
  EXPECT_EQ(torn, 0);
}

TEST(Server, DeferredWritesQueueUntilTaken) {
  RegisterStore store(charger::register_map(), WritePolicy::Deferred);
  RegisterSlave slave(charger::kUnitId, store);
  SlaveClient client(slave, "charger");
  const std::uint16_t run[] = {1};
  client.write_multiple(charger::kRunCommand, run);
  EXPECT_EQ(client.read_holding(charger::kRunCommand, 1)[0], 0);
  const auto writes = store.take_writes();
  ASSERT_EQ(writes.size(), 1u);
  EXPECT_EQ(writes[0].address, charger::kRunCommand);
  EXPECT_TRUE(store.take_writes().empty());
}

TEST(Client, ConnectionRefusedIsTimeout) {
  TcpRegisterClient client(Endpoint{"127.0.0.1", 1}, meter::kUnitId, "meter");
  EXPECT_THROW(client.read_holding(0, 2), DeviceTimeout);
}

TEST(EndpointTest, Parse) {
  const auto ep = Endpoint::parse("10.0.0.5:1502");
  EXPECT_EQ(ep.host, "10.0.0.5");
  EXPECT_EQ(ep.port, 1502);
  EXPECT_EQ(ep.str(), "10.0.0.5:1502");
  EXPECT_THROW(Endpoint::parse("nohost"), std::invalid_argument);
  EXPECT_THROW(Endpoint::parse("h:70000"), std::invalid_argument);
}
