#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2h/config_file.hpp"
#include "v2h/engine/types.hpp"

namespace v2h::engine {

struct TraceRow {
  double t = 0.0;
  double p_net_kw = 0.0;
  double p_ev_kw = 0.0;
  double soc_pct = 0.0;
  std::string mode;
  double setpoint_kw = 0.0;

  Sample sample() const { return Sample::make(t, p_net_kw, p_ev_kw, soc_pct); }
  bool operator==(const TraceRow&) const = default;
};

inline constexpr const char* kTraceCsvHeader = "t,p_net_kw,p_ev_kw,soc_pct,mode,setpoint_kw";

inline std::string to_csv(const TraceRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.3f,%.4f,%.4f,%.2f,%s,%.4f", r.t, r.p_net_kw, r.p_ev_kw, r.soc_pct,
                r.mode.c_str(), r.setpoint_kw);
  return buf;
}

inline nlohmann::json to_json(const TraceRow& r) {
  return {{"t", r.t},           {"p_net_kw", r.p_net_kw}, {"p_ev_kw", r.p_ev_kw},
          {"soc_pct", r.soc_pct}, {"mode", r.mode},        {"setpoint_kw", r.setpoint_kw}};
}

inline TraceRow row_from_json(const nlohmann::json& j) {
  return {j.at("t").get<double>(),       j.at("p_net_kw").get<double>(), j.at("p_ev_kw").get<double>(),
          j.at("soc_pct").get<double>(), j.at("mode").get<std::string>(), j.at("setpoint_kw").get<double>()};
}

inline bool is_jsonl_path(const std::string& path) {
  auto ends = [&](const char* s) {
    const std::string suffix(s);
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends(".jsonl") || ends(".json");
}

/// Reads a trace saved as CSV or JSON lines.
inline std::vector<TraceRow> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  std::vector<TraceRow> rows;
  std::string line;
  int line_no = 0;
  const bool jsonl = is_jsonl_path(path);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (jsonl) {
      try {
        rows.push_back(row_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, line_no, "", e.what());
      }
      continue;
    }
    if (line_no == 1 && line.rfind("t,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::string(trim(cell)));
    if (cells.size() != 6) throw ParseError(path, line_no, "", "expected 6 columns");
    try {
      rows.push_back({std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                      cells[4], std::stod(cells[5])});
    } catch (const std::exception&) {
      throw ParseError(path, line_no, "", "bad number");
    }
  }
  return rows;
}

/// Append-only trace shared between the control loop and readers.
class TraceLog {
 public:
  TraceLog() = default;
  explicit TraceLog(const std::string& path) { open(path); }

  void open(const std::string& path) {
    std::lock_guard lock(mu_);
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw std::runtime_error("cannot open trace log " + path);
    jsonl_ = is_jsonl_path(path);
    if (!jsonl_) *file_ << kTraceCsvHeader << '\n';
  }

  void append(TraceRow row) {
    {
      std::lock_guard lock(mu_);
      if (file_) {
        *file_ << (jsonl_ ? to_json(row).dump() : to_csv(row)) << '\n';
        if (++unflushed_ >= 100) {
          file_->flush();
          unflushed_ = 0;
        }
      }
      rows_.push_back(std::move(row));
    }
    cv_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return rows_.size();
  }

  std::vector<TraceRow> rows() const {
    std::lock_guard lock(mu_);
    return rows_;
  }

  /// Rows with t >= from_t.
  std::vector<TraceRow> since(double from_t) const {
    std::lock_guard lock(mu_);
    std::vector<TraceRow> out;
    for (const auto& r : rows_) {
      if (r.t >= from_t) out.push_back(r);
    }
    return out;
  }

  /// Rows from index `from` on, waiting up to `timeout` for at least one.
  std::vector<TraceRow> wait_from(std::size_t from, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return rows_.size() > from; });
    if (rows_.size() <= from) return {};
    return {rows_.begin() + static_cast<std::ptrdiff_t>(from), rows_.end()};
  }

  void flush() {
    std::lock_guard lock(mu_);
    if (file_) file_->flush();
  }

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<TraceRow> rows_;
  std::unique_ptr<std::ofstream> file_;
  bool jsonl_ = false;
  int unflushed_ = 0;
};

}  // namespace v2h::engine
