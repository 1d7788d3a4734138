#include "meterwatch/civil_time.hpp"

#include <cstdio>
#include <stdexcept>

namespace meterwatch {

using namespace std::chrono;

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

std::optional<Date> try_date(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, m) || !read_int(s, 8, 2, d)) return std::nullopt;
  Date date{year{y}, month{unsigned(m)}, day{unsigned(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

// EU rule: summer time from 01:00 UTC on the last Sunday of March until
// 01:00 UTC on the last Sunday of October.
Instant last_sunday_0100(year y, month m) {
  const sys_days month_end{y / m / std::chrono::last};
  const sys_days sunday = month_end - (weekday{month_end} - Sunday);
  return sunday + hours{1};
}

}  // namespace

std::optional<Instant> try_parse_rfc3339(std::string_view s) {
  auto date = try_date(s);
  if (!date || s.size() < 19 || (s[10] != 'T' && s[10] != 't' && s[10] != ' ')) return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!read_int(s, 11, 2, hh) || s[13] != ':' || !read_int(s, 14, 2, mm) || s[16] != ':' ||
      !read_int(s, 17, 2, ss)) {
    return std::nullopt;
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  minutes offset{0};
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh = 0, om = 0;
    if (!read_int(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' || !read_int(s, pos + 4, 2, om)) {
      return std::nullopt;
    }
    offset = hours{oh} + minutes{om};
    if (s[pos] == '-') offset = -offset;
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  return Instant{sys_days{*date}} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

Instant parse_rfc3339(std::string_view text) {
  auto t = try_parse_rfc3339(text);
  if (!t) throw std::invalid_argument("invalid RFC 3339 timestamp: '" + std::string(text) + "'");
  return *t;
}

std::string format_rfc3339(Instant t) {
  const sys_days day = floor<days>(t);
  const Date d{day};
  const hh_mm_ss<seconds> tod{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(d.year()), unsigned(d.month()),
                unsigned(d.day()), int(tod.hours().count()), int(tod.minutes().count()),
                int(tod.seconds().count()));
  return buf;
}

Date parse_date(std::string_view text) {
  auto d = try_date(text);
  if (!d || text.size() != 10) throw std::invalid_argument("invalid date (want YYYY-MM-DD): '" + std::string(text) + "'");
  return *d;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()), unsigned(d.day()));
  return buf;
}

bool warsaw_is_dst(Instant t) {
  const year y = Date{floor<days>(t)}.year();
  return t >= last_sunday_0100(y, March) && t < last_sunday_0100(y, October);
}

minutes warsaw_utc_offset(Instant t) {
  return warsaw_is_dst(t) ? minutes{120} : minutes{60};
}

Instant warsaw_midnight(Date d) {
  // Local midnight never falls inside a transition hour, so trying the
  // winter offset and correcting once is enough.
  const Instant local{sys_days{d}};
  Instant guess = local - minutes{60};
  return local - warsaw_utc_offset(guess);
}

Date warsaw_date(Instant t) {
  return Date{floor<days>(t + warsaw_utc_offset(t))};
}

int warsaw_slots_in_day(Date d) {
  const Instant start = warsaw_midnight(d);
  const Instant end = warsaw_midnight(Date{sys_days{d} + days{1}});
  return int((end - start) / kSlot);
}

int warsaw_slot_index(Instant t) {
  return int((t - warsaw_midnight(warsaw_date(t))) / kSlot);
}

int warsaw_wall_slot(Instant t) {
  const Instant local = t + warsaw_utc_offset(t);
  return int((local - floor<days>(local)) / kSlot);
}

unsigned weekday_index(Date d) {
  return weekday{sys_days{d}}.c_encoding();
}

Instant floor_to_slot(Instant t) {
  return floor<minutes>(t) - minutes{((floor<minutes>(t).time_since_epoch().count() % 15) + 15) % 15};
}

}  // namespace meterwatch
