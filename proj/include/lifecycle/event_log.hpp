#pragma once

// One append-only JSON-lines file per session.

#include "lifecycle/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <string>
#include <vector>

namespace lifecycle::event_log {

using json = nlohmann::json;

inline std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// 2026-01-31T12:00:00.123Z
inline std::string iso8601(std::int64_t ms) {
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_{path}, out_{path, std::ios::binary | std::ios::app} {
    if (!out_) throw Error(ErrorKind::Data, "cannot open event log '" + path.string() + "'");
  }

  // Returns once the record has been handed to the OS.
  void append(const json& record) {
    std::lock_guard lock{mutex_};
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::Data, "write to event log '" + path_.string() + "' failed");
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

// Cuts a torn final record so later appends start on a fresh line.
inline bool drop_torn_tail(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (data.empty() || data.back() == '\n') return false;
  const auto keep = data.rfind('\n');
  in.close();
  std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
  return true;
}

// A last line without its newline is a torn write and is dropped; damage
// anywhere else is a data error.
inline std::vector<json> read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open event log '" + path.string() + "'");
  std::vector<json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const bool complete = !in.eof();
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      if (!complete) break;
      throw Error(ErrorKind::Data, path.string() + ":" + std::to_string(lineno) + ": corrupt log record");
    }
    if (!complete) {
      records.pop_back();
      break;
    }
  }
  return records;
}

}  // namespace lifecycle::event_log
