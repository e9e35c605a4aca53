#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "v2h/wire/codec.hpp"
#include "v2h/wire/frame.hpp"
#include "v2h/wire/register_map.hpp"

namespace v2h::wire {

/// Plain word image of a device's register space. Not synchronized.
class RegisterImage {
 public:
  RegisterImage() = default;
  explicit RegisterImage(const RegisterMap& map)
      : base_(map.first_address()), words_(map.end_address() - map.first_address(), 0) {}

  std::uint16_t word(std::uint16_t addr) const { return words_.at(addr - base_); }
  void set_word(std::uint16_t addr, std::uint16_t v) { words_.at(addr - base_) = v; }

  std::int32_t i32(std::uint16_t addr) const { return join_i32({word(addr), word(addr + 1)}); }
  void set_i32(std::uint16_t addr, std::int32_t raw) {
    const auto w = split_i32(raw);
    set_word(addr, w.hi);
    set_word(addr + 1, w.lo);
  }

  double power_kw(std::uint16_t addr) const { return i32(addr) / 1000.0; }
  void set_power_kw(std::uint16_t addr, double kw) {
    const auto w = encode_power(kw);
    set_word(addr, w.hi);
    set_word(addr + 1, w.lo);
  }

  std::span<const std::uint16_t> range(std::uint16_t addr, std::uint16_t count) const {
    return std::span<const std::uint16_t>(words_).subspan(addr - base_, count);
  }
  void assign(std::uint16_t addr, std::span<const std::uint16_t> words) {
    for (std::size_t i = 0; i < words.size(); ++i) words_.at(addr - base_ + i) = words[i];
  }

 private:
  std::uint16_t base_ = 0;
  std::vector<std::uint16_t> words_;
};

struct PendingWrite {
  std::uint16_t address = 0;
  std::vector<std::uint16_t> words;
};

enum class WritePolicy {
  Immediate,  // writes land in the image as soon as the frame is handled
  Deferred,   // writes queue until the owning device drains them
};

/// Thread-safe register space shared between a device model and its server.
/// Every read and write is atomic per frame, so multi-word values are never torn.
class RegisterStore {
 public:
  explicit RegisterStore(RegisterMap map, WritePolicy policy = WritePolicy::Immediate)
      : map_(std::move(map)), image_(map_), policy_(policy) {}

  const RegisterMap& map() const { return map_; }

  std::optional<ExceptionCode> read(std::uint16_t addr, std::uint16_t count,
                                    std::vector<std::uint16_t>& out) const {
    if (auto err = map_.check_range(addr, count, false)) return err;
    std::lock_guard lock(mu_);
    const auto words = image_.range(addr, count);
    out.assign(words.begin(), words.end());
    return std::nullopt;
  }

  std::optional<ExceptionCode> write(std::uint16_t addr, std::span<const std::uint16_t> words) {
    if (words.empty() || words.size() > 0xFFFF) return ExceptionCode::IllegalDataValue;
    if (auto err = map_.check_range(addr, static_cast<std::uint16_t>(words.size()), true)) {
      return err;
    }
    std::lock_guard lock(mu_);
    if (policy_ == WritePolicy::Immediate) {
      image_.assign(addr, words);
    } else {
      pending_.push_back({addr, {words.begin(), words.end()}});
    }
    return std::nullopt;
  }

  /// Replaces the whole image; device side.
  void publish(const RegisterImage& image) {
    std::lock_guard lock(mu_);
    image_ = image;
  }

  RegisterImage snapshot() const {
    std::lock_guard lock(mu_);
    return image_;
  }

  std::vector<PendingWrite> take_writes() {
    std::lock_guard lock(mu_);
    return std::exchange(pending_, {});
  }

 private:
  RegisterMap map_;
  mutable std::mutex mu_;
  RegisterImage image_;
  std::vector<PendingWrite> pending_;
  WritePolicy policy_;
};

/// Answers decoded request frames from one register store.
class RegisterSlave {
 public:
  RegisterSlave(std::uint8_t unit_id, RegisterStore& store) : unit_id_(unit_id), store_(store) {}

  std::uint8_t unit_id() const { return unit_id_; }
  RegisterStore& store() { return store_; }

  RegisterFrame handle(const RegisterFrame& req) {
    if (req.unit_id != unit_id_) return exception_response(req, ExceptionCode::GatewayTargetFailed);
    if (req.function == FunctionCode::ReadHolding) {
      std::vector<std::uint16_t> words;
      if (auto err = store_.read(req.start_address, req.count, words)) {
        return exception_response(req, *err);
      }
      return read_response(req, std::move(words));
    }
    if (auto err = store_.write(req.start_address, req.payload)) return exception_response(req, *err);
    return write_response(req);
  }

  /// Full byte-level round trip. Returns nullopt when the request cannot be
  /// answered at all (truncated or malformed framing); unsupported function
  /// codes are answered with IllegalFunction.
  std::optional<std::vector<std::uint8_t>> handle_bytes(std::span<const std::uint8_t> bytes) {
    try {
      return encode_frame(handle(decode_frame(bytes, FrameKind::Request)));
    } catch (const WireError& e) {
      if (bytes.size() < kMbapSize + 1) return std::nullopt;
      ExceptionCode code;
      if (e.code() == WireErrc::UnsupportedFunction) {
        code = ExceptionCode::IllegalFunction;
      } else if (e.code() == WireErrc::InvalidCount) {
        code = ExceptionCode::IllegalDataValue;
      } else {
        return std::nullopt;
      }
      std::vector<std::uint8_t> out(bytes.begin(), bytes.begin() + kMbapSize);
      out[4] = 0;
      out[5] = 3;
      out.push_back(static_cast<std::uint8_t>(bytes[kMbapSize] | kExceptionFlag));
      out.push_back(static_cast<std::uint8_t>(code));
      return out;
    }
  }

 private:
  std::uint8_t unit_id_;
  RegisterStore& store_;
};

}  // namespace v2h::wire
