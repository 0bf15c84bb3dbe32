// Copyright 2026 The sicql Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sicql/value.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "sicql/error.hpp"

namespace sicql {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kPlan: return "plan_error";
    case ErrorCode::kEstimate: return "estimation_error";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kCheck: return "check_error";
    case ErrorCode::kModel: return "model_error";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kAborted: return "aborted";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

const char* type_name(Type t) {
  switch (t) {
    case Type::kAny: return "ANY";
    case Type::kString: return "STRING";
    case Type::kInt: return "INT";
    case Type::kFloat: return "FLOAT";
    case Type::kBool: return "BOOL";
    case Type::kDate: return "DATE";
    case Type::kInterval: return "INTERVAL";
  }
  return "ANY";
}

std::optional<Type> type_from_keyword(std::string_view keyword) {
  std::string up;
  for (char c : keyword) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "STRING") return Type::kString;
  if (up == "INT") return Type::kInt;
  if (up == "FLOAT") return Type::kFloat;
  if (up == "BOOL") return Type::kBool;
  if (up == "DATE") return Type::kDate;
  return std::nullopt;
}

int days_in_month(int year, int month) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2) {
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return leap ? 29 : 28;
  }
  return kDays[month - 1];
}

bool Date::valid() const {
  return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

std::optional<Date> Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](size_t pos, size_t len, int& out) {
    for (size_t i = pos; i < pos + len; ++i)
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return true;
  };
  Date d;
  if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
  if (!d.valid()) return std::nullopt;
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::string Interval::to_string() const {
  return std::to_string(years) + " years " + std::to_string(months) + " mons " + std::to_string(days) + " days";
}

Interval age(const Date& later, const Date& earlier) {
  bool negative = later < earlier;
  const Date& hi = negative ? earlier : later;
  const Date& lo = negative ? later : earlier;
  int years = hi.year - lo.year;
  int months = hi.month - lo.month;
  int days = hi.day - lo.day;
  if (days < 0) {
    // borrow the length of the month preceding `hi`
    int pm = hi.month == 1 ? 12 : hi.month - 1;
    int py = hi.month == 1 ? hi.year - 1 : hi.year;
    days += days_in_month(py, pm);
    --months;
  }
  if (months < 0) {
    months += 12;
    --years;
  }
  if (negative) return {-years, -months, -days};
  return {years, months, days};
}

Type Value::type() const {
  switch (v_.index()) {
    case 1: return Type::kBool;
    case 2: return Type::kInt;
    case 3: return Type::kFloat;
    case 4: return Type::kString;
    case 5: return Type::kDate;
    case 6: return Type::kInterval;
    default: return Type::kAny;
  }
}

std::string format_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string Value::to_text() const {
  switch (v_.index()) {
    case 0: return "NULL";
    case 1: return as_bool() ? "true" : "false";
    case 2: return std::to_string(as_int());
    case 3: return format_double(as_float());
    case 4: return as_text();
    case 5: return as_date().to_string();
    case 6: return as_interval().to_string();
  }
  return {};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace

std::optional<Value> parse_typed(std::string_view text, Type target, std::string* reason) {
  auto fail = [&](const char* what) -> std::optional<Value> {
    if (reason) *reason = std::string("expected ") + what + ", got '" + std::string(text) + "'";
    return std::nullopt;
  };
  switch (target) {
    case Type::kAny:
    case Type::kString:
      return Value(std::string(text));
    case Type::kInt: {
      auto t = trim(text);
      int64_t v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) return fail("INT");
      return Value(v);
    }
    case Type::kFloat: {
      auto t = trim(text);
      double v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) return fail("FLOAT");
      return Value(v);
    }
    case Type::kBool: {
      auto t = trim(text);
      if (iequals(t, "true")) return Value(true);
      if (iequals(t, "false")) return Value(false);
      return fail("BOOL");
    }
    case Type::kDate: {
      auto d = Date::parse(trim(text));
      if (!d) return fail("DATE (YYYY-MM-DD)");
      return Value(*d);
    }
    case Type::kInterval:
      return fail("INTERVAL");
  }
  return std::nullopt;
}

}  // namespace sicql
