#include "agentmem/common.hpp"

#include <cstdio>
#include <ctime>

namespace agentmem {

std::string to_string(MemoryId id) { return std::to_string(to_u64(id)); }

double days_between(Timestamp earlier, Timestamp later) noexcept {
  constexpr double kMsPerDay = 86'400'000.0;
  return static_cast<double>((later - earlier).count()) / kMsPerDay;
}

std::string format_iso8601(Timestamp t) {
  const std::int64_t ms = to_epoch_ms(t);
  std::int64_t secs = ms / 1000;
  std::int64_t frac = ms % 1000;
  if (frac < 0) {
    frac += 1000;
    secs -= 1;
  }
  const std::time_t tt = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(frac));
  return buf;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  std::string s(text);
  int year = 0, mon = 0, day = 0, hour = 0, min = 0, sec = 0, frac = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &year, &mon, &day, &hour, &min, &sec,
                  &consumed) != 6) {
    return std::nullopt;
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) frac = frac * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    for (int d = digits; d < 3; ++d) frac *= 10;
  }
  if (pos >= s.size() || s[pos] != 'Z' || pos + 1 != s.size()) return std::nullopt;
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = mon - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = min;
  tm.tm_sec = sec;
  const std::time_t secs = timegm(&tm);
  return from_epoch_ms(static_cast<std::int64_t>(secs) * 1000 + frac);
}

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::MCP: return "MCP";
    case Protocol::CLI: return "CLI";
    case Protocol::REST: return "REST";
    case Protocol::A2A: return "A2A";
  }
  return "CLI";
}

std::optional<Protocol> parse_protocol(std::string_view text) noexcept {
  if (text == "MCP") return Protocol::MCP;
  if (text == "CLI") return Protocol::CLI;
  if (text == "REST") return Protocol::REST;
  if (text == "A2A") return Protocol::A2A;
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TrustDenied: return "TrustDenied";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::InvalidImportance: return "InvalidImportance";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::SelfFlag: return "SelfFlag";
    case ErrorCode::InsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyInput: return "EmptyInput";
  }
  return "Error";
}

}  // namespace agentmem
