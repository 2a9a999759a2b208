#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

namespace cristal {

// Time source injected into the store. Every journal timestamp comes from
// here, so a deterministic clock makes whole journals byte-reproducible.
class Clock {
public:
  virtual ~Clock() = default;
  // ISO-8601 UTC with milliseconds: YYYY-MM-DDThh:mm:ss.sssZ
  virtual std::string now() = 0;
};

class SystemClock final : public Clock {
public:
  std::string now() override;
};

class FixedClock final : public Clock {
public:
  explicit FixedClock(std::string timestamp);
  std::string now() override { return timestamp_; }

private:
  std::string timestamp_;
};

// Starts at a fixed instant and advances one millisecond per call. Used by
// tests that need distinct but reproducible timestamps.
class SteppingClock final : public Clock {
public:
  explicit SteppingClock(int64_t start_unix_ms = 1'000'000'000'000);
  std::string now() override;

private:
  int64_t next_ms_;
};

std::string format_timestamp_ms(std::chrono::system_clock::time_point tp);
std::string format_unix_ms(int64_t unix_ms);

std::shared_ptr<Clock> make_system_clock();
std::shared_ptr<Clock> make_fixed_clock(const std::string& timestamp);

}  // namespace cristal
