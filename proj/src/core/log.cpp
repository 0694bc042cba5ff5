#include "core/log.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>

namespace dcur {

LogLevel log_level_from_env() {
  const char* env = std::getenv("DRIVE_CURATE_LOG");
  if (!env) return LogLevel::Warn;
  const std::string v(env);
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "warn") return LogLevel::Warn;
  if (v == "error") return LogLevel::Error;
  if (v == "off") return LogLevel::Off;
  return LogLevel::Warn;
}

namespace {
const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info:  return "info";
    case LogLevel::Warn:  return "warn";
    case LogLevel::Error: return "error";
    case LogLevel::Off:   return "off";
  }
  return "info";
}
}  // namespace

RunLog::RunLog(std::string sink_path, LogLevel stderr_level)
    : sink_path_(std::move(sink_path)), stderr_level_(stderr_level) {
  if (!sink_path_.empty()) {
    sink_ = std::make_unique<std::ofstream>(sink_path_, std::ios::app);
  }
}

RunLog::~RunLog() = default;

void RunLog::event(LogLevel level, const std::string& name, Json fields) {
  Json line = Json::object();
  line["ts"] = std::chrono::duration<double>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  line["level"] = level_name(level);
  line["event"] = name;
  for (auto& [k, v] : fields.items()) line[k] = v;

  std::lock_guard<std::mutex> lock(mutex_);
  if (sink_ && sink_->is_open()) {
    *sink_ << line.dump() << "\n";
    sink_->flush();
  }
  if (level >= stderr_level_ && stderr_level_ != LogLevel::Off) {
    std::cerr << line.dump() << "\n";
  }
}

}  // namespace dcur
