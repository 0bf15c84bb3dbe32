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

#include "sicql/eval.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "sicql/automaton.hpp"
#include "sicql/error.hpp"
#include "sicql/format.hpp"

namespace sicql {

using lang::BinaryOp;
using lang::Expr;
using lang::ExprKind;
using lang::UnaryOp;

namespace {

[[noreturn]] void type_error(const Expr& e, const std::string& msg) {
  throw Error(ErrorCode::kCheck, msg + " in " + lang::format_expr(e));
}

std::optional<Date> as_date_like(const Value& v) {
  if (v.is_date()) return v.as_date();
  if (v.is_text()) return Date::parse(v.as_text());
  return std::nullopt;
}

// Three-way comparison; nullopt when the operands are incomparable.
std::optional<int> compare(const Value& a, const Value& b) {
  auto sign = [](auto x, auto y) { return x < y ? -1 : (y < x ? 1 : 0); };
  if (a.is_number() && b.is_number()) {
    if (a.is_int() && b.is_int()) return sign(a.as_int(), b.as_int());
    return sign(a.as_number(), b.as_number());
  }
  if (a.is_text() && b.is_text()) return sign(a.as_text(), b.as_text());
  if (a.is_bool() && b.is_bool()) return sign(a.as_bool(), b.as_bool());
  if (a.is_date() || b.is_date()) {
    auto da = as_date_like(a);
    auto db = as_date_like(b);
    if (da && db) return sign(*da, *db);
    return std::nullopt;
  }
  if (a.is_interval() && b.is_interval()) {
    const auto& x = a.as_interval();
    const auto& y = b.as_interval();
    return sign(std::tuple(x.years, x.months, x.days), std::tuple(y.years, y.months, y.days));
  }
  return std::nullopt;
}

std::optional<bool> truth(const Value& v, const Expr& e) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_bool()) type_error(e, std::string("expected BOOL, got ") + type_name(v.type()));
  return v.as_bool();
}

Value arithmetic(BinaryOp op, const Value& a, const Value& b, const Expr& e) {
  if (!a.is_number() || !b.is_number())
    type_error(e, std::string("arithmetic on ") + type_name(a.type()) + " and " + type_name(b.type()));
  if (a.is_int() && b.is_int()) {
    int64_t x = a.as_int(), y = b.as_int();
    switch (op) {
      case BinaryOp::kAdd: return Value(x + y);
      case BinaryOp::kSub: return Value(x - y);
      case BinaryOp::kMul: return Value(x * y);
      case BinaryOp::kDiv: return y == 0 ? Value() : Value(x / y);
      case BinaryOp::kMod: return y == 0 ? Value() : Value(x % y);
      default: break;
    }
  }
  double x = a.as_number(), y = b.as_number();
  switch (op) {
    case BinaryOp::kAdd: return Value(x + y);
    case BinaryOp::kSub: return Value(x - y);
    case BinaryOp::kMul: return Value(x * y);
    case BinaryOp::kDiv: return y == 0 ? Value() : Value(x / y);
    case BinaryOp::kMod: return y == 0 ? Value() : Value(std::fmod(x, y));
    default: break;
  }
  type_error(e, "unsupported arithmetic operator");
}

Value date_part(const std::string& field, const Value& v, const Expr& e) {
  std::string f;
  for (char c : field) f += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v.is_interval()) {
    const auto& i = v.as_interval();
    if (f == "year" || f == "years") return Value(static_cast<int64_t>(i.years));
    if (f == "month" || f == "months") return Value(static_cast<int64_t>(i.months));
    if (f == "day" || f == "days") return Value(static_cast<int64_t>(i.days));
  } else if (auto d = as_date_like(v)) {
    if (f == "year") return Value(static_cast<int64_t>(d->year));
    if (f == "month") return Value(static_cast<int64_t>(d->month));
    if (f == "day") return Value(static_cast<int64_t>(d->day));
  } else {
    type_error(e, std::string("DATE_PART over ") + type_name(v.type()));
  }
  type_error(e, "unknown DATE_PART field '" + field + "'");
}

Value call(const Expr& e, const Row& row, const EvalContext& ctx) {
  std::vector<Value> args;
  args.reserve(e.args.size());
  for (const auto& a : e.args) args.push_back(eval_expr(*a, row, ctx));
  auto arity = [&](size_t lo, size_t hi) {
    if (args.size() < lo || args.size() > hi) type_error(e, "wrong number of arguments to " + e.name);
  };
  auto any_null = [&] {
    for (const auto& a : args)
      if (a.is_null()) return true;
    return false;
  };

  if (e.name == "CURRENT_DATE") {
    arity(0, 0);
    return Value(ctx.current_date);
  }
  if (e.name == "LENGTH") {
    arity(1, 1);
    if (args[0].is_null()) return Value();
    return Value(utf8_length(args[0].to_text()));
  }
  if (e.name == "REGEXP_CONTAINS") {
    arity(2, 2);
    if (any_null()) return Value();
    if (!args[1].is_text()) type_error(e, "REGEXP_CONTAINS pattern must be text");
    return Value(regex_contains(args[0].to_text(), args[1].as_text()));
  }
  if (e.name == "AGE") {
    arity(1, 2);
    if (any_null()) return Value();
    auto later = args.size() == 2 ? as_date_like(args[0]) : std::optional<Date>(ctx.current_date);
    auto earlier = as_date_like(args.back());
    if (!later || !earlier) return Value();
    return Value(age(*later, *earlier));
  }
  if (e.name == "DATE_PART") {
    arity(2, 2);
    if (any_null()) return Value();
    if (!args[0].is_text()) type_error(e, "DATE_PART field must be text");
    return date_part(args[0].as_text(), args[1], e);
  }
  if (e.name == "IN") {
    if (args.size() < 2) type_error(e, "IN needs a list");
    if (args[0].is_null()) return Value();
    bool saw_null = false;
    for (size_t i = 1; i < args.size(); ++i) {
      if (args[i].is_null()) {
        saw_null = true;
        continue;
      }
      auto c = compare(args[0], args[i]);
      if (c && *c == 0) return Value(true);
    }
    return saw_null ? Value() : Value(false);
  }
  type_error(e, "unknown function " + e.name);
}

}  // namespace

int64_t utf8_length(std::string_view text) {
  int64_t n = 0;
  for (size_t i = 0; i < text.size();) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > text.size()) len = 1;
    for (size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) len = 1;
    i += len;
    ++n;
  }
  return n;
}

bool regex_contains(std::string_view text, const std::string& pattern) {
  static std::mutex mu;
  static std::unordered_map<std::string, std::shared_ptr<const automata::RegexDfa>> cache;
  std::shared_ptr<const automata::RegexDfa> dfa;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(pattern);
    if (it != cache.end()) dfa = it->second;
  }
  if (!dfa) {
    dfa = std::make_shared<const automata::RegexDfa>(automata::RegexDfa::compile(pattern));
    std::lock_guard<std::mutex> lock(mu);
    if (cache.size() > 4096) cache.clear();
    cache.emplace(pattern, dfa);
  }
  return dfa->matches(text);
}

Value cast_value(const Value& v, Type target) {
  if (v.is_null() || target == Type::kAny) return v;
  if (v.type() == target) return v;
  if (target == Type::kFloat && v.is_int()) return Value(static_cast<double>(v.as_int()));
  if (target == Type::kInt && v.is_float()) {
    double d = v.as_float();
    if (!std::isfinite(d)) return Value();
    return Value(static_cast<int64_t>(std::trunc(d)));
  }
  if (target == Type::kString) return Value(v.to_text());
  if (!v.is_text()) return Value();
  auto parsed = parse_typed(v.as_text(), target);
  return parsed ? *parsed : Value();
}

Value eval_expr(const Expr& e, const Row& row, const EvalContext& ctx) {
  switch (e.kind) {
    case ExprKind::kLiteral:
      return e.literal;
    case ExprKind::kAttr: {
      auto it = row.find(e.name);
      if (it == row.end()) throw Error(ErrorCode::kCheck, "attribute '" + e.name + "' is not in the tuple");
      return it->second;
    }
    case ExprKind::kUnary: {
      Value v = eval_expr(*e.args[0], row, ctx);
      if (e.unary == UnaryOp::kNot) {
        auto t = truth(v, e);
        return t ? Value(!*t) : Value();
      }
      if (v.is_null()) return v;
      if (v.is_int()) return Value(-v.as_int());
      if (v.is_float()) return Value(-v.as_float());
      type_error(e, std::string("negation of ") + type_name(v.type()));
    }
    case ExprKind::kBinary: {
      if (e.binary == BinaryOp::kAnd || e.binary == BinaryOp::kOr) {
        auto l = truth(eval_expr(*e.args[0], row, ctx), e);
        bool is_and = e.binary == BinaryOp::kAnd;
        if (l && *l != is_and) return Value(*l);
        auto r = truth(eval_expr(*e.args[1], row, ctx), e);
        if (r && *r != is_and) return Value(*r);
        if (!l || !r) return Value();
        return Value(is_and);
      }
      Value a = eval_expr(*e.args[0], row, ctx);
      Value b = eval_expr(*e.args[1], row, ctx);
      if (a.is_null() || b.is_null()) return Value();
      switch (e.binary) {
        case BinaryOp::kConcat:
          return Value(a.to_text() + b.to_text());
        case BinaryOp::kEq:
        case BinaryOp::kNe:
        case BinaryOp::kLt:
        case BinaryOp::kLe:
        case BinaryOp::kGt:
        case BinaryOp::kGe: {
          auto c = compare(a, b);
          if (!c) type_error(e, std::string("cannot compare ") + type_name(a.type()) + " with " + type_name(b.type()));
          switch (e.binary) {
            case BinaryOp::kEq: return Value(*c == 0);
            case BinaryOp::kNe: return Value(*c != 0);
            case BinaryOp::kLt: return Value(*c < 0);
            case BinaryOp::kLe: return Value(*c <= 0);
            case BinaryOp::kGt: return Value(*c > 0);
            default: return Value(*c >= 0);
          }
        }
        default:
          return arithmetic(e.binary, a, b, e);
      }
    }
    case ExprKind::kCall:
      return call(e, row, ctx);
    case ExprKind::kCast:
      return cast_value(eval_expr(*e.args[0], row, ctx), e.cast_type);
  }
  type_error(e, "unknown expression");
}

}  // namespace sicql
