#include "cristal/clock.hpp"

#include <cstdio>
#include <ctime>

#include "cristal/errors.hpp"
#include "cristal/values.hpp"

namespace cristal {

std::string format_unix_ms(int64_t unix_ms) {
  std::time_t secs = static_cast<std::time_t>(unix_ms / 1000);
  int ms = static_cast<int>(unix_ms % 1000);
  if (ms < 0) {
    ms += 1000;
    secs -= 1;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, ms);
  return buf;
}

std::string format_timestamp_ms(std::chrono::system_clock::time_point tp) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                tp.time_since_epoch())
                .count();
  return format_unix_ms(ms);
}

std::string SystemClock::now() {
  return format_timestamp_ms(std::chrono::system_clock::now());
}

FixedClock::FixedClock(std::string timestamp) : timestamp_(std::move(timestamp)) {
  if (!lex_timestamp(timestamp_)) {
    fail("BadTimestamp", "fixed clock value is not ISO-8601 UTC ms: " + timestamp_);
  }
}

SteppingClock::SteppingClock(int64_t start_unix_ms) : next_ms_(start_unix_ms) {}

std::string SteppingClock::now() { return format_unix_ms(next_ms_++); }

std::shared_ptr<Clock> make_system_clock() {
  return std::make_shared<SystemClock>();
}

std::shared_ptr<Clock> make_fixed_clock(const std::string& timestamp) {
  return std::make_shared<FixedClock>(timestamp);
}

}  // namespace cristal
