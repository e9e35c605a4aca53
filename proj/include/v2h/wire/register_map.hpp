#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v2h/wire/codec.hpp"
#include "v2h/wire/frame.hpp"

namespace v2h::wire {

enum class Access : std::uint8_t { RO, RW };

struct RegisterEntry {
  std::uint16_t address = 0;
  Encoding encoding = Encoding::Enum_u16;
  Access access = Access::RO;
  std::string_view name;

  std::uint16_t width() const { return width_words(encoding); }
  std::uint32_t end() const { return std::uint32_t{address} + width(); }
};

/// Sorted, non-overlapping set of register entries.
class RegisterMap {
 public:
  RegisterMap() = default;

  explicit RegisterMap(std::vector<RegisterEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw std::invalid_argument("register map is empty");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].end() > 0x10000) {
        throw std::invalid_argument("register entry runs past 0xFFFF");
      }
      if (i > 0 && entries_[i].address < entries_[i - 1].end()) {
        throw std::invalid_argument("register entries overlap or are unsorted at " +
                                    std::to_string(entries_[i].address));
      }
    }
  }

  const std::vector<RegisterEntry>& entries() const { return entries_; }
  std::uint16_t first_address() const { return entries_.front().address; }
  std::uint32_t end_address() const { return entries_.back().end(); }

  /// Entry starting exactly at `address`.
  const RegisterEntry* at(std::uint16_t address) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), address,
                               [](const RegisterEntry& e, std::uint16_t a) { return e.address < a; });
    return (it != entries_.end() && it->address == address) ? &*it : nullptr;
  }

  /// Checks that [address, address+count) is made of whole mapped entries.
  /// Returns IllegalDataAddress on gaps or split multi-word values, and
  /// IllegalFunction when `for_write` and any covered entry is read-only.
  std::optional<ExceptionCode> check_range(std::uint16_t address, std::uint16_t count,
                                           bool for_write) const {
    std::uint32_t cursor = address;
    const std::uint32_t end = std::uint32_t{address} + count;
    bool read_only_hit = false;
    while (cursor < end) {
      const RegisterEntry* e = cursor <= 0xFFFF ? at(static_cast<std::uint16_t>(cursor)) : nullptr;
      if (e == nullptr || e->end() > end) return ExceptionCode::IllegalDataAddress;
      read_only_hit = read_only_hit || e->access == Access::RO;
      cursor = e->end();
    }
    if (for_write && read_only_hit) return ExceptionCode::IllegalFunction;
    return std::nullopt;
  }

 private:
  std::vector<RegisterEntry> entries_;
};

namespace meter {

inline constexpr std::uint8_t kUnitId = 1;
inline constexpr std::uint16_t kNetPower = 0x0000;
inline constexpr std::uint16_t kLineCurrent = 0x0002;
inline constexpr std::uint16_t kBlockStart = 0x0000;
inline constexpr std::uint16_t kBlockCount = 4;

inline RegisterMap register_map() {
  return RegisterMap({
      {kNetPower, Encoding::PowerWatts_i32, Access::RO, "net_active_power"},
      {kLineCurrent, Encoding::Current_mA_i32, Access::RO, "line_current"},
  });
}

}  // namespace meter

namespace charger {

inline constexpr std::uint8_t kUnitId = 2;
inline constexpr std::uint16_t kRemoteEnable = 0x0100;
inline constexpr std::uint16_t kRunCommand = 0x0101;
inline constexpr std::uint16_t kSetpoint = 0x0102;
inline constexpr std::uint16_t kMeasuredPower = 0x0104;
inline constexpr std::uint16_t kSoc = 0x0106;
inline constexpr std::uint16_t kState = 0x0107;
inline constexpr std::uint16_t kDcVoltage = 0x0108;
inline constexpr std::uint16_t kBlockStart = 0x0100;
inline constexpr std::uint16_t kBlockCount = 9;

inline RegisterMap register_map() {
  return RegisterMap({
      {kRemoteEnable, Encoding::Enum_u16, Access::RW, "remote_enable"},
      {kRunCommand, Encoding::Enum_u16, Access::RW, "run_command"},
      {kSetpoint, Encoding::PowerWatts_i32, Access::RW, "power_setpoint"},
      {kMeasuredPower, Encoding::PowerWatts_i32, Access::RO, "measured_ev_power"},
      {kSoc, Encoding::Soc_tenthPct_u16, Access::RO, "soc"},
      {kState, Encoding::Enum_u16, Access::RO, "charger_state"},
      {kDcVoltage, Encoding::Volts_tenthV_u16, Access::RO, "battery_dc_voltage"},
  });
}

}  // namespace charger

}  // namespace v2h::wire
