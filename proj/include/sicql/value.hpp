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

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace sicql {

/// Column and expression types. `kAny` marks a source column whose type was
/// never declared (open schemas); `kInterval` only arises from AGE().
enum class Type { kAny, kString, kInt, kFloat, kBool, kDate, kInterval };

const char* type_name(Type t);
std::optional<Type> type_from_keyword(std::string_view keyword);

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date&, const Date&) = default;

  /// Strict `YYYY-MM-DD` with calendar validation.
  static std::optional<Date> parse(std::string_view text);
  std::string to_string() const;
  bool valid() const;
};

int days_in_month(int year, int month);

struct Interval {
  int years = 0;
  int months = 0;
  int days = 0;

  friend bool operator==(const Interval&, const Interval&) = default;
  std::string to_string() const;
};

/// PostgreSQL-style symbolic difference `later - earlier` in years, months
/// and days (days borrowed from the month preceding `later`).
Interval age(const Date& later, const Date& earlier);

class Value {
 public:
  using Storage = std::variant<std::monostate, bool, int64_t, double, std::string, Date, Interval>;

  Value() = default;
  Value(bool b) : v_(b) {}
  Value(int v) : v_(static_cast<int64_t>(v)) {}
  Value(int64_t v) : v_(v) {}
  Value(double d) : v_(d) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(Date d) : v_(d) {}
  Value(Interval i) : v_(i) {}

  static Value null() { return Value(); }

  bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_int() const { return std::holds_alternative<int64_t>(v_); }
  bool is_float() const { return std::holds_alternative<double>(v_); }
  bool is_number() const { return is_int() || is_float(); }
  bool is_text() const { return std::holds_alternative<std::string>(v_); }
  bool is_date() const { return std::holds_alternative<Date>(v_); }
  bool is_interval() const { return std::holds_alternative<Interval>(v_); }

  bool as_bool() const { return std::get<bool>(v_); }
  int64_t as_int() const { return std::get<int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  double as_number() const { return is_int() ? static_cast<double>(as_int()) : as_float(); }
  const std::string& as_text() const { return std::get<std::string>(v_); }
  const Date& as_date() const { return std::get<Date>(v_); }
  const Interval& as_interval() const { return std::get<Interval>(v_); }

  Type type() const;
  const Storage& storage() const { return v_; }

  /// Rendering used for prompt substitution and text-valued checks.
  std::string to_text() const;

  friend bool operator==(const Value&, const Value&) = default;

 private:
  Storage v_;
};

/// Shortest decimal form that parses back to the same double; always carries
/// a '.' or exponent so it is never re-read as an integer.
std::string format_double(double d);

/// Parses model or dataset text into `target`; on failure fills `reason`.
std::optional<Value> parse_typed(std::string_view text, Type target, std::string* reason = nullptr);

}  // namespace sicql
