#include "han/timeparse.hpp"

#include <cstdio>

#include "han/error.hpp"

namespace han {

namespace {

// Days from civil date algorithm (Howard Hinnant's public derivation).
std::int64_t days_from_civil(std::int64_t y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += (m <= 2);
}

bool is_leap(std::int64_t y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int days_in_month(std::int64_t y, int m) {
  static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

std::int64_t parse_utc(const std::string& s) {
  const auto fail = [&s]() -> std::int64_t {
    throw ParseError("bad timestamp (want YYYY-MM-DDThh:mm:ssZ): '" + s + "'");
  };
  if (s.size() != 20) return fail();
  for (std::size_t i = 0; i < 20; ++i) {
    const char c = s[i];
    switch (i) {
      case 4:
      case 7:
        if (c != '-') return fail();
        break;
      case 10:
        if (c != 'T') return fail();
        break;
      case 13:
      case 16:
        if (c != ':') return fail();
        break;
      case 19:
        if (c != 'Z') return fail();
        break;
      default:
        if (c < '0' || c > '9') return fail();
    }
  }
  const auto num = [&s](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = 0; i < len; ++i) v = v * 10 + (s[pos + i] - '0');
    return v;
  };
  const int year = num(0, 4), month = num(5, 2), day = num(8, 2);
  const int hh = num(11, 2), mm = num(14, 2), ss = num(17, 2);
  if (month < 1 || month > 12) return fail();
  if (day < 1 || day > days_in_month(year, month)) return fail();
  if (hh > 23 || mm > 59 || ss > 59) return fail();
  return days_from_civil(year, month, day) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_utc(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t y;
  int m, d;
  civil_from_days(days, y, m, d);
  if (y < 0 || y > 9999) throw ParseError("timestamp year out of range");
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04lld-%02d-%02dT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return std::string(buf);
}

}  // namespace han
