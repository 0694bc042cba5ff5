#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "core/jsonutil.hpp"

namespace dcur {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

LogLevel log_level_from_env();  // reads DRIVE_CURATE_LOG, defaults to Warn

// JSON-lines run log. Events carry a wall-clock timestamp, which is why the
// log is the one per-run artifact excluded from byte-for-byte reproducibility
// comparisons; everything else a command writes is deterministic.
class RunLog {
 public:
  // sink_path may be empty (stderr echo only).
  RunLog(std::string sink_path, LogLevel stderr_level);
  ~RunLog();

  void event(LogLevel level, const std::string& name, Json fields = Json::object());

  void debug(const std::string& name, Json fields = Json::object()) {
    event(LogLevel::Debug, name, std::move(fields));
  }
  void info(const std::string& name, Json fields = Json::object()) {
    event(LogLevel::Info, name, std::move(fields));
  }
  void warn(const std::string& name, Json fields = Json::object()) {
    event(LogLevel::Warn, name, std::move(fields));
  }

 private:
  std::string sink_path_;
  LogLevel stderr_level_;
  std::mutex mutex_;
  std::unique_ptr<std::ofstream> sink_;
};

}  // namespace dcur
