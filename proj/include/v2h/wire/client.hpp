#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2h/wire/frame.hpp"
#include "v2h/wire/register_store.hpp"

namespace v2h::wire {

/// No (valid) answer from a device within the client's timeout.
class DeviceTimeout : public std::runtime_error {
 public:
  DeviceTimeout(std::string device, const std::string& why)
      : std::runtime_error("DeviceTimeout [" + device + "]: " + why), device_(std::move(device)) {}
  const std::string& device() const { return device_; }

 private:
  std::string device_;
};

/// The device answered with a protocol exception.
class DeviceException : public std::runtime_error {
 public:
  DeviceException(const std::string& device, ExceptionCode code)
      : std::runtime_error("device " + device + " raised " + to_string(code)), code_(code) {}
  ExceptionCode code() const { return code_; }

 private:
  ExceptionCode code_;
};

/// Register-level access to one device.
class RegisterClient {
 public:
  virtual ~RegisterClient() = default;
  virtual std::vector<std::uint16_t> read_holding(std::uint16_t addr, std::uint16_t count) = 0;
  virtual void write_multiple(std::uint16_t addr, std::span<const std::uint16_t> words) = 0;
  virtual std::string name() const = 0;
};

namespace detail {

inline std::vector<std::uint16_t> check_read(const std::string& name, const RegisterFrame& resp,
                                             const RegisterFrame& req) {
  if (resp.exception) throw DeviceException(name, *resp.exception);
  if (resp.transaction_id != req.transaction_id || resp.function != req.function ||
      resp.count != req.count) {
    throw DeviceTimeout(name, "mismatched response");
  }
  return resp.payload;
}

inline void check_write(const std::string& name, const RegisterFrame& resp,
                        const RegisterFrame& req) {
  if (resp.exception) throw DeviceException(name, *resp.exception);
  if (resp.transaction_id != req.transaction_id || resp.function != req.function ||
      resp.start_address != req.start_address || resp.count != req.count) {
    throw DeviceTimeout(name, "mismatched response");
  }
}

}  // namespace detail

/// In-process client that still goes through the byte encoding, for tests and
/// embedded use without sockets.
class SlaveClient : public RegisterClient {
 public:
  SlaveClient(RegisterSlave& slave, std::string name)
      : slave_(slave), name_(std::move(name)) {}

  std::vector<std::uint16_t> read_holding(std::uint16_t addr, std::uint16_t count) override {
    const auto req = read_request(next_txn(), slave_.unit_id(), addr, count);
    return detail::check_read(name_, exchange(req), req);
  }

  void write_multiple(std::uint16_t addr, std::span<const std::uint16_t> words) override {
    const auto req = write_request(next_txn(), slave_.unit_id(), addr, {words.begin(), words.end()});
    detail::check_write(name_, exchange(req), req);
  }

  std::string name() const override { return name_; }

 private:
  RegisterFrame exchange(const RegisterFrame& req) {
    const auto bytes = encode_frame(req);
    auto reply = slave_.handle_bytes(bytes);
    if (!reply) throw DeviceTimeout(name_, "request dropped");
    return decode_frame(*reply, FrameKind::Response);
  }

  std::uint16_t next_txn() { return ++txn_; }

  RegisterSlave& slave_;
  std::string name_;
  std::uint16_t txn_ = 0;
};

}  // namespace v2h::wire
