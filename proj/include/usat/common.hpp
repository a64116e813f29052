#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace usat {

// Malformed or invariant-violating input data (exit code 1 at the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or usage (exit code 2 at the CLI).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Selects the OpenMP kernel or its serial reference. Both produce
// bit-identical results; the serial path exists for tests and benchmarks.
enum class Execution { kSerial, kParallel };

// Warnings go to stderr by default. Tests install a sink to capture them.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

// Suppresses warnings on the current thread for the guard's lifetime.
// Used by bootstrap loops so degenerate resamples do not flood the log.
class ScopedWarningSilencer {
 public:
  ScopedWarningSilencer();
  ~ScopedWarningSilencer();
  ScopedWarningSilencer(const ScopedWarningSilencer&) = delete;
  ScopedWarningSilencer& operator=(const ScopedWarningSilencer&) = delete;

 private:
  bool previous_;
};

// splitmix64 step; used to derive independent sub-seeds from a master seed
// so parallel work is schedule-independent.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace usat
