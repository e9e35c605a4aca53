#pragma once

// Register value encodings. Multi-word values are two's-complement, most
// significant word at the lower address.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace v2h::wire {

enum class Encoding : std::uint8_t {
  PowerWatts_i32,
  Current_mA_i32,
  Soc_tenthPct_u16,
  Volts_tenthV_u16,
  Enum_u16,
};

constexpr std::uint16_t width_words(Encoding e) {
  switch (e) {
    case Encoding::PowerWatts_i32:
    case Encoding::Current_mA_i32:
      return 2;
    default:
      return 1;
  }
}

struct WordPair {
  std::uint16_t hi = 0;
  std::uint16_t lo = 0;
  bool operator==(const WordPair&) const = default;
};

constexpr WordPair split_i32(std::int32_t raw) {
  const auto u = static_cast<std::uint32_t>(raw);
  return {static_cast<std::uint16_t>(u >> 16), static_cast<std::uint16_t>(u & 0xFFFF)};
}

constexpr std::int32_t join_i32(WordPair w) {
  return static_cast<std::int32_t>((static_cast<std::uint32_t>(w.hi) << 16) | w.lo);
}

inline constexpr double kMaxCodecKw = 2.0e6;

inline WordPair encode_power(double kw) {
  if (!(std::abs(kw) <= kMaxCodecKw)) throw std::out_of_range("power outside codec range");
  return split_i32(static_cast<std::int32_t>(std::lround(kw * 1000.0)));
}

inline double decode_power(WordPair w) { return join_i32(w) / 1000.0; }

inline WordPair encode_current(double amps) {
  if (!(std::abs(amps) <= 2.0e6)) throw std::out_of_range("current outside codec range");
  return split_i32(static_cast<std::int32_t>(std::lround(amps * 1000.0)));
}

inline double decode_current(WordPair w) { return join_i32(w) / 1000.0; }

/// SOC in tenths of a percent, saturated to [0, 1000].
inline std::uint16_t encode_soc(double pct) {
  const long raw = std::lround(pct * 10.0);
  return static_cast<std::uint16_t>(raw < 0 ? 0 : (raw > 1000 ? 1000 : raw));
}

inline double decode_soc(std::uint16_t raw) { return raw / 10.0; }

inline std::uint16_t encode_volts(double v) {
  const long raw = std::lround(v * 10.0);
  if (raw < 0 || raw > 0xFFFF) throw std::out_of_range("voltage outside codec range");
  return static_cast<std::uint16_t>(raw);
}

inline double decode_volts(std::uint16_t raw) { return raw / 10.0; }

/// Raw register content paired with its engineering value.
struct ScaledValue {
  Encoding kind = Encoding::Enum_u16;
  std::int32_t raw = 0;
  double value = 0.0;
  std::string_view unit;
};

inline ScaledValue scale(Encoding kind, std::int32_t raw) {
  switch (kind) {
    case Encoding::PowerWatts_i32: return {kind, raw, raw / 1000.0, "kW"};
    case Encoding::Current_mA_i32: return {kind, raw, raw / 1000.0, "A"};
    case Encoding::Soc_tenthPct_u16: return {kind, raw, raw / 10.0, "%"};
    case Encoding::Volts_tenthV_u16: return {kind, raw, raw / 10.0, "V"};
    case Encoding::Enum_u16: return {kind, raw, static_cast<double>(raw), ""};
  }
  return {};
}

}  // namespace v2h::wire
