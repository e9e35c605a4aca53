#pragma once

// Modbus/TCP application-layer subset: MBAP header + ReadHolding (0x03) and
// WriteMultiple (0x10) PDUs, plus exception responses.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2h::wire {

enum class FunctionCode : std::uint8_t {
  ReadHolding = 0x03,
  WriteMultiple = 0x10,
};

enum class ExceptionCode : std::uint8_t {
  IllegalFunction = 0x01,
  IllegalDataAddress = 0x02,
  IllegalDataValue = 0x03,
  ServerDeviceFailure = 0x04,
  GatewayTargetFailed = 0x0B,
};

enum class FrameKind : std::uint8_t { Request, Response };

inline constexpr std::uint16_t kMaxReadCount = 123;
inline constexpr std::uint16_t kMaxWriteCount = 120;
inline constexpr std::size_t kMbapSize = 7;
inline constexpr std::uint8_t kExceptionFlag = 0x80;

enum class WireErrc { InvalidCount, Truncated, UnsupportedFunction, MalformedPdu };

inline const char* to_string(WireErrc e) {
  switch (e) {
    case WireErrc::InvalidCount: return "InvalidCount";
    case WireErrc::Truncated: return "Truncated";
    case WireErrc::UnsupportedFunction: return "UnsupportedFunction";
    case WireErrc::MalformedPdu: return "MalformedPdu";
  }
  return "?";
}

inline const char* to_string(ExceptionCode e) {
  switch (e) {
    case ExceptionCode::IllegalFunction: return "IllegalFunction";
    case ExceptionCode::IllegalDataAddress: return "IllegalDataAddress";
    case ExceptionCode::IllegalDataValue: return "IllegalDataValue";
    case ExceptionCode::ServerDeviceFailure: return "ServerDeviceFailure";
    case ExceptionCode::GatewayTargetFailed: return "GatewayTargetFailed";
  }
  return "?";
}

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

/// One MBAP-framed message.
///
/// Read responses do not carry a start address on the wire; for those frames
/// `start_address` is always 0. Exception responses carry only the function
/// and the exception code, so `count` is 0 and `payload` is empty.
struct RegisterFrame {
  std::uint16_t transaction_id = 0;
  std::uint8_t unit_id = 0;
  FunctionCode function = FunctionCode::ReadHolding;
  FrameKind kind = FrameKind::Request;
  std::uint16_t start_address = 0;
  std::uint16_t count = 0;
  std::vector<std::uint16_t> payload;
  std::optional<ExceptionCode> exception;

  bool operator==(const RegisterFrame&) const = default;
};

inline RegisterFrame read_request(std::uint16_t txn, std::uint8_t unit, std::uint16_t addr,
                                  std::uint16_t count) {
  return {txn, unit, FunctionCode::ReadHolding, FrameKind::Request, addr, count, {}, std::nullopt};
}

inline RegisterFrame write_request(std::uint16_t txn, std::uint8_t unit, std::uint16_t addr,
                                   std::vector<std::uint16_t> words) {
  const auto n = static_cast<std::uint16_t>(words.size());
  return {txn, unit, FunctionCode::WriteMultiple, FrameKind::Request, addr, n, std::move(words),
          std::nullopt};
}

inline RegisterFrame exception_response(const RegisterFrame& req, ExceptionCode code) {
  return {req.transaction_id, req.unit_id, req.function, FrameKind::Response, 0, 0, {}, code};
}

inline RegisterFrame read_response(const RegisterFrame& req, std::vector<std::uint16_t> words) {
  const auto n = static_cast<std::uint16_t>(words.size());
  return {req.transaction_id, req.unit_id, FunctionCode::ReadHolding, FrameKind::Response, 0, n,
          std::move(words), std::nullopt};
}

inline RegisterFrame write_response(const RegisterFrame& req) {
  return {req.transaction_id, req.unit_id, FunctionCode::WriteMultiple, FrameKind::Response,
          req.start_address, req.count, {}, std::nullopt};
}

/// Throws WireError if the frame violates the count/payload invariants.
inline void validate(const RegisterFrame& f) {
  if (f.exception) {
    if (f.kind != FrameKind::Response) {
      throw WireError(WireErrc::MalformedPdu, "exception code on a request");
    }
    if (f.count != 0 || !f.payload.empty() || f.start_address != 0) {
      throw WireError(WireErrc::MalformedPdu, "exception response carries data");
    }
    return;
  }
  const bool is_read = f.function == FunctionCode::ReadHolding;
  const std::uint16_t max = is_read ? kMaxReadCount : kMaxWriteCount;
  if (f.count < 1 || f.count > max) {
    throw WireError(WireErrc::InvalidCount, "count " + std::to_string(f.count) +
                                                " outside [1, " + std::to_string(max) + "]");
  }
  const bool carries_payload = (is_read && f.kind == FrameKind::Response) ||
                               (!is_read && f.kind == FrameKind::Request);
  const std::size_t expected = carries_payload ? f.count : 0;
  if (f.payload.size() != expected) {
    throw WireError(WireErrc::MalformedPdu, "payload has " + std::to_string(f.payload.size()) +
                                                " words, expected " + std::to_string(expected));
  }
  if (is_read && f.kind == FrameKind::Response && f.start_address != 0) {
    throw WireError(WireErrc::MalformedPdu, "read response cannot carry a start address");
  }
}

namespace detail {

inline void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_frame(const RegisterFrame& f) {
  validate(f);
  std::vector<std::uint8_t> pdu;
  pdu.reserve(6 + 2 * f.payload.size());
  const auto fc = static_cast<std::uint8_t>(f.function);
  if (f.exception) {
    pdu.push_back(static_cast<std::uint8_t>(fc | kExceptionFlag));
    pdu.push_back(static_cast<std::uint8_t>(*f.exception));
  } else {
    pdu.push_back(fc);
    const bool is_read = f.function == FunctionCode::ReadHolding;
    if (is_read && f.kind == FrameKind::Response) {
      pdu.push_back(static_cast<std::uint8_t>(2 * f.count));
    } else {
      detail::put16(pdu, f.start_address);
      detail::put16(pdu, f.count);
      if (!is_read && f.kind == FrameKind::Request) {
        pdu.push_back(static_cast<std::uint8_t>(2 * f.count));
      }
    }
    for (auto w : f.payload) detail::put16(pdu, w);
  }

  std::vector<std::uint8_t> out;
  out.reserve(kMbapSize + pdu.size());
  detail::put16(out, f.transaction_id);
  detail::put16(out, 0);  // protocol id
  detail::put16(out, static_cast<std::uint16_t>(pdu.size() + 1));
  out.push_back(f.unit_id);
  out.insert(out.end(), pdu.begin(), pdu.end());
  return out;
}

/// Total message size announced by an MBAP header, or nullopt if fewer than
/// six bytes are available yet.
inline std::optional<std::size_t> announced_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6) return std::nullopt;
  return 6 + static_cast<std::size_t>(detail::get16(bytes, 4));
}

inline RegisterFrame decode_frame(std::span<const std::uint8_t> bytes, FrameKind kind) {
  using detail::get16;
  if (bytes.size() < kMbapSize + 1) {
    throw WireError(WireErrc::Truncated, "need at least 8 bytes, got " +
                                             std::to_string(bytes.size()));
  }
  const std::size_t total = *announced_size(bytes);
  if (total > bytes.size()) {
    throw WireError(WireErrc::Truncated, "length field announces " + std::to_string(total) +
                                             " bytes, " + std::to_string(bytes.size()) +
                                             " available");
  }
  if (total < bytes.size()) {
    throw WireError(WireErrc::MalformedPdu, "trailing bytes after message");
  }
  if (get16(bytes, 2) != 0) throw WireError(WireErrc::MalformedPdu, "protocol id is not 0");

  RegisterFrame f;
  f.transaction_id = get16(bytes, 0);
  f.unit_id = bytes[6];
  f.kind = kind;
  const auto pdu = bytes.subspan(kMbapSize);
  const std::uint8_t raw_fc = pdu[0];
  const auto base_fc = static_cast<std::uint8_t>(raw_fc & ~kExceptionFlag);
  if (base_fc != 0x03 && base_fc != 0x10) {
    throw WireError(WireErrc::UnsupportedFunction, "function code " + std::to_string(raw_fc));
  }
  f.function = static_cast<FunctionCode>(base_fc);

  if (raw_fc & kExceptionFlag) {
    if (kind != FrameKind::Response || pdu.size() != 2) {
      throw WireError(WireErrc::MalformedPdu, "bad exception response");
    }
    f.exception = static_cast<ExceptionCode>(pdu[1]);
    return f;
  }

  auto read_words = [&](std::size_t at, std::size_t n) {
    if (pdu.size() != at + 2 * n) {
      throw WireError(WireErrc::MalformedPdu, "PDU size does not match register count");
    }
    f.payload.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.payload[i] = get16(pdu, at + 2 * i);
  };

  const bool is_read = f.function == FunctionCode::ReadHolding;
  if (is_read && kind == FrameKind::Response) {
    if (pdu.size() < 2 || pdu[1] % 2 != 0) {
      throw WireError(WireErrc::MalformedPdu, "bad byte count");
    }
    f.count = static_cast<std::uint16_t>(pdu[1] / 2);
    read_words(2, f.count);
  } else {
    if (pdu.size() < 5) throw WireError(WireErrc::MalformedPdu, "PDU too short");
    f.start_address = get16(pdu, 1);
    f.count = get16(pdu, 3);
    if (!is_read && kind == FrameKind::Request) {
      if (pdu.size() < 6 || pdu[5] != 2 * f.count) {
        throw WireError(WireErrc::MalformedPdu, "byte count does not match register count");
      }
      read_words(6, f.count);
    } else if (pdu.size() != 5) {
      throw WireError(WireErrc::MalformedPdu, "unexpected bytes after count");
    }
  }
  validate(f);
  return f;
}

}  // namespace v2h::wire
