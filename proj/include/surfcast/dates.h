#ifndef SURFCAST_DATES_H
#define SURFCAST_DATES_H

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "surfcast/errors.h"

namespace surfcast {

inline std::chrono::year_month_day parse_iso_date(const std::string& text) {
  int y = 0, m = 0, d = 0;
  char tail = '\0';
  if (std::sscanf(text.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3) {
    throw SchemaError("expected an ISO date (YYYY-MM-DD), got '" + text + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{unsigned(m)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) throw SchemaError("invalid calendar date '" + text + "'");
  return ymd;
}

inline std::string format_iso_date(std::chrono::year_month_day ymd) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

inline std::vector<std::string> date_range(const std::string& start, int count) {
  std::chrono::sys_days day{parse_iso_date(start)};
  std::vector<std::string> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(format_iso_date(std::chrono::year_month_day{day}));
    day += std::chrono::days{1};
  }
  return out;
}

}  // namespace surfcast

#endif  // SURFCAST_DATES_H
