#pragma once

// Sectioned key = value text format shared by scenario and engine config files.
//
//   # comment
//   [section]
//   key = value        # trailing comments allowed
//   [appliance kettle] # sections may carry a label

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace v2h {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& field, const std::string& msg)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " +
                           (field.empty() ? "" : "field '" + field + "': ") + msg),
        line_(line), field_(field) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigValue {
  std::string text;
  int line = 0;
};

struct ConfigSection {
  std::string kind;   // e.g. "appliance"
  std::string label;  // e.g. "kettle"; empty for plain sections
  int line = 0;
  std::map<std::string, ConfigValue> values;
};

class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(std::string_view text, std::string source) {
    ConfigFile file;
    file.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    ConfigSection* current = nullptr;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(file.source_, line_no, "", "unterminated section header");
        const auto inner = trim(line.substr(1, line.size() - 2));
        if (inner.empty()) throw ParseError(file.source_, line_no, "", "empty section name");
        ConfigSection sec;
        const auto space = inner.find_first_of(" \t");
        sec.kind = std::string(inner.substr(0, space));
        if (space != std::string_view::npos) sec.label = std::string(trim(inner.substr(space)));
        sec.line = line_no;
        file.sections_.push_back(std::move(sec));
        current = &file.sections_.back();
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(file.source_, line_no, "", "expected key = value");
      const auto key = std::string(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError(file.source_, line_no, "", "missing key");
      if (current == nullptr) throw ParseError(file.source_, line_no, key, "key outside of any section");
      if (current->values.count(key) != 0) throw ParseError(file.source_, line_no, key, "duplicate key");
      current->values[key] = {std::string(trim(line.substr(eq + 1))), line_no};
    }
    return file;
  }

  const std::string& source() const { return source_; }
  const std::vector<ConfigSection>& sections() const { return sections_; }

  const ConfigSection* section(std::string_view kind) const {
    for (const auto& s : sections_) {
      if (s.kind == kind && s.label.empty()) return &s;
    }
    return nullptr;
  }

  std::vector<const ConfigSection*> sections_of(std::string_view kind) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections_) {
      if (s.kind == kind) out.push_back(&s);
    }
    return out;
  }

  double number(const ConfigSection& sec, const std::string& key) const {
    const auto it = sec.values.find(key);
    if (it == sec.values.end()) throw ParseError(source_, sec.line, key, "required field missing");
    return to_number(it->second, key);
  }

  double number_or(const ConfigSection* sec, const std::string& key, double fallback) const {
    if (sec == nullptr) return fallback;
    const auto it = sec->values.find(key);
    return it == sec->values.end() ? fallback : to_number(it->second, key);
  }

  std::optional<ConfigValue> text(const ConfigSection* sec, const std::string& key) const {
    if (sec == nullptr) return std::nullopt;
    const auto it = sec->values.find(key);
    if (it == sec->values.end()) return std::nullopt;
    return it->second;
  }

  double to_number(const ConfigValue& v, const std::string& key) const {
    double out = 0.0;
    const auto* first = v.text.data();
    const auto* last = first + v.text.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
      throw ParseError(source_, v.line, key, "not a number: '" + v.text + "'");
    }
    return out;
  }

  /// "HH:MM" or "HH:MM:SS" to seconds after midnight.
  double time_of_day(const ConfigValue& v, const std::string& key) const {
    int h = 0, m = 0, s = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(v.text);
    in >> h >> c1 >> m;
    if (!in || c1 != ':') throw ParseError(source_, v.line, key, "expected HH:MM, got '" + v.text + "'");
    if (in >> c2) {
      if (c2 != ':' || !(in >> s)) throw ParseError(source_, v.line, key, "bad seconds in '" + v.text + "'");
    }
    if (h < 0 || h > 24 || m < 0 || m > 59 || s < 0 || s > 59 || (h == 24 && (m != 0 || s != 0))) {
      throw ParseError(source_, v.line, key, "time out of range: '" + v.text + "'");
    }
    return h * 3600.0 + m * 60.0 + s;
  }

  [[noreturn]] void fail(const ConfigSection& sec, const std::string& key, const std::string& msg) const {
    const auto it = sec.values.find(key);
    throw ParseError(source_, it == sec.values.end() ? sec.line : it->second.line, key, msg);
  }

 private:
  std::string source_;
  std::vector<ConfigSection> sections_;
};

}  // namespace v2h
