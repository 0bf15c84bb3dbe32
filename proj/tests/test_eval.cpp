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

#include <string>
#include <tuple>

#include "doctest.h"
#include "sicql/error.hpp"
#include "sicql/eval.hpp"
#include "sicql/parser.hpp"
#include "support/generators.hpp"

using namespace sicql;
using sicql::testing::Rng;

namespace {

Value ev(const std::string& text, const Row& row = {}, Date today = {2025, 1, 1}) {
  return eval_expr(*lang::parse_expr(text), row, EvalContext{today});
}

// Completed years between two dates by field comparison.
int full_years(Date later, Date earlier) {
  int y = later.year - earlier.year;
  if (std::tie(later.month, later.day) < std::tie(earlier.month, earlier.day)) --y;
  return y;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in(int y, int m) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

Date random_date(Rng& rng) {
  int y = rng.uniform(1900, 2030);
  int m = rng.uniform(1, 12);
  return {y, m, rng.uniform(1, days_in(y, m))};
}

}  // namespace

TEST_CASE("age in years of the listing example") {
  CHECK(ev("DATE_PART('year', AGE(CURRENT_DATE, dob::DATE))", {{"dob", Value("1985-03-12")}}) == Value(int64_t{39}));
  CHECK(ev("DATE_PART('year', AGE('2025-03-12'::DATE, '1985-03-12'::DATE))") == Value(int64_t{40}));
  CHECK(ev("DATE_PART('year', AGE('2025-03-11'::DATE, '1985-03-12'::DATE))") == Value(int64_t{39}));
}

TEST_CASE("age year part matches field comparison on random dates") {
  Rng rng(4242);
  for (int i = 0; i < 2000; ++i) {
    Date a = random_date(rng);
    Date b = random_date(rng);
    if (a < b) std::swap(a, b);
    Row row = {{"a", Value(a)}, {"b", Value(b)}};
    INFO(a.to_string() << " " << b.to_string());
    REQUIRE(ev("DATE_PART('year', AGE(a, b))", row) == Value(int64_t{full_years(a, b)}));
  }
}

TEST_CASE("string builtins") {
  CHECK(ev("LENGTH('')") == Value(int64_t{0}));
  CHECK(ev("LENGTH('h\xC3\xA9llo')") == Value(int64_t{5}));
  CHECK(utf8_length("\xE2\x82\xAC") == 1);
  CHECK(ev("REGEXP_CONTAINS('1985-03-12', r'^\\d{4}-\\d{2}-\\d{2}$')") == Value(true));
  CHECK(ev("REGEXP_CONTAINS('12/03/1985', r'^\\d{4}')") == Value(false));
  CHECK(regex_contains("abc", "b"));
}

TEST_CASE("casts") {
  CHECK(ev("'1985-03-12'::DATE") == Value(Date{1985, 3, 12}));
  CHECK(ev("'abc'::INT").is_null());
  CHECK(ev("'42'::INT") == Value(int64_t{42}));
  CHECK(cast_value(Value(int64_t{3}), Type::kFloat) == Value(3.0));
  CHECK(cast_value(Value::null(), Type::kInt).is_null());
}

TEST_CASE("null propagation and three-valued logic") {
  Row row = {{"n", Value::null()}, {"x", Value(int64_t{5})}};
  CHECK(ev("n + 1", row).is_null());
  CHECK(ev("n = 1", row).is_null());
  CHECK(ev("n > 1 AND x > 1", row).is_null());
  CHECK(ev("n > 1 AND x > 9", row) == Value(false));
  CHECK(ev("n > 1 OR x > 1", row) == Value(true));
  CHECK(ev("NOT (n > 1)", row).is_null());
  CHECK(ev("x / 0", row).is_null());
  CHECK(ev("x IN (1, 5, 7)", row) == Value(true));
  CHECK(ev("x * 2 + 1 = 11", row) == Value(true));
  CHECK(ev("x > 4.5", row) == Value(true));
}

TEST_CASE("type errors are check errors") {
  try {
    ev("s + 1", {{"s", Value("a")}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCheck);
  }
}
