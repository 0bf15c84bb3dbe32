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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <set>

#include "sicql/automaton.hpp"
#include "sicql/parser.hpp"

namespace sicql::lang {
namespace {

enum class Tok {
  kEnd,
  kIdent,
  kString,
  kRaw,
  kPrompt,
  kInt,
  kFloat,
  kPipe,
  kLParen,
  kRParen,
  kComma,
  kEq,
  kNe,
  kLt,
  kLe,
  kGt,
  kGe,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kPercent,
  kConcat,
  kCast,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;   // identifier spelling or unescaped string contents
  std::string upper;  // identifiers only
  int64_t ival = 0;
  double fval = 0;
  int line = 1;
  int column = 1;
};

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "FROM",     "SET",       "EXTEND",     "WHERE",       "AGGREGATE", "ASSERT",   "AS",
      "AND",      "OR",        "NOT",        "IN",          "RETRY",     "ON",       "FAIL",
      "CONTINUE", "IGNORE",    "ABORT",      "GROUNDED",    "INCLUDES",  "EXCLUDES", "SOUND",
      "RELEVANT", "EXTRACTIVE", "ABSTRACTIVE", "GROUP",     "BY",        "TRUE",     "FALSE",
      "NULL",     "CURRENT_DATE"};
  return words;
}

const std::set<std::string>& builtin_functions() {
  static const std::set<std::string> fns = {"LENGTH", "REGEXP_CONTAINS", "DATE_PART", "AGE", "CURRENT_DATE"};
  return fns;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        std::string word(src_.substr(start, pos_ - start));
        if (word.size() == 1 && pos_ < src_.size() && src_[pos_] == '\'' && std::strchr("pPrR", word[0])) {
          bool raw = word[0] == 'r' || word[0] == 'R';
          t.kind = raw ? Tok::kRaw : Tok::kPrompt;
          t.text = read_quoted(!raw, t);
        } else {
          t.kind = Tok::kIdent;
          t.upper = to_upper(word);
          t.text = std::move(word);
        }
      } else if (c == '\'') {
        t.kind = Tok::kString;
        t.text = read_quoted(true, t);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        read_number(t);
      } else {
        read_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string read_quoted(bool doubled_quote_escape, const Token& start) {
    advance();  // opening quote
    std::string out;
    for (;;) {
      if (pos_ >= src_.size()) throw ParseError(start.line, start.column, "unterminated string literal");
      char c = src_[pos_];
      if (c == '\'') {
        if (doubled_quote_escape && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
          out.push_back('\'');
          advance();
          advance();
          continue;
        }
        advance();
        return out;
      }
      out.push_back(c);
      advance();
    }
  }

  void read_number(Token& t) {
    size_t start = pos_;
    bool is_float = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      is_float = true;
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t save = pos_;
      int save_col = col_;
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        is_float = true;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    std::string_view digits = src_.substr(start, pos_ - start);
    t.text = std::string(digits);
    if (is_float) {
      t.kind = Tok::kFloat;
      auto r = std::from_chars(digits.data(), digits.data() + digits.size(), t.fval);
      if (r.ec != std::errc()) throw ParseError(t.line, t.column, "numeric literal out of range");
    } else {
      t.kind = Tok::kInt;
      auto r = std::from_chars(digits.data(), digits.data() + digits.size(), t.ival);
      if (r.ec != std::errc()) throw ParseError(t.line, t.column, "integer literal out of range");
    }
  }

  void read_punct(Token& t) {
    char c = src_[pos_];
    char n = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
    auto two = [&](Tok k) {
      t.kind = k;
      t.text = std::string(src_.substr(pos_, 2));
      advance();
      advance();
    };
    auto one = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
    };
    switch (c) {
      case '|':
        if (n == '>') return two(Tok::kPipe);
        if (n == '|') return two(Tok::kConcat);
        break;
      case ':':
        if (n == ':') return two(Tok::kCast);
        break;
      case '(': return one(Tok::kLParen);
      case ')': return one(Tok::kRParen);
      case ',': return one(Tok::kComma);
      case '=': return one(Tok::kEq);
      case '!':
        if (n == '=') return two(Tok::kNe);
        break;
      case '<':
        if (n == '=') return two(Tok::kLe);
        if (n == '>') return two(Tok::kNe);
        return one(Tok::kLt);
      case '>':
        if (n == '=') return two(Tok::kGe);
        return one(Tok::kGt);
      case '+': return one(Tok::kPlus);
      case '-': return one(Tok::kMinus);
      case '*': return one(Tok::kStar);
      case '/': return one(Tok::kSlash);
      case '%': return one(Tok::kPercent);
      default: break;
    }
    throw ParseError(t.line, t.column, std::string("unexpected character '") + c + "'");
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::vector<std::string> scan_placeholders(const std::string& raw, int line, int column) {
  std::vector<std::string> out;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') continue;
    size_t close = raw.find('}', i + 1);
    if (close == std::string::npos) throw ParseError(line, column, "unterminated placeholder in prompt string");
    std::string name = raw.substr(i + 1, close - i - 1);
    if (name.empty()) throw ParseError(line, column, "empty placeholder {} in prompt string");
    bool ok = std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_';
    for (char c : name) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
    if (!ok) throw ParseError(line, column, "invalid placeholder {" + name + "} in prompt string");
    out.push_back(std::move(name));
    i = close;
  }
  return out;
}

PromptTemplate prompt_from_token(const Token& t) {
  PromptTemplate p;
  if (t.text.empty()) throw ParseError(t.line, t.column, "prompt string is empty");
  p.raw_text = t.text;
  p.placeholders = scan_placeholders(t.text, t.line, t.column);
  return p;
}

// Index of a semantic predicate parked in an expression tree until the
// conjunction is split.
constexpr const char* kSemanticMarker = "\x01SIC";

bool contains_marker(const Expr& e) {
  if (e.kind == ExprKind::kCall && e.name == kSemanticMarker) return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const ExprPtr& a) { return contains_marker(*a); });
}

const Expr* find_marker(const Expr& e) {
  if (e.kind == ExprKind::kCall && e.name == kSemanticMarker) return &e;
  for (const auto& a : e.args)
    if (const Expr* m = find_marker(*a)) return m;
  return nullptr;
}

void flatten_and(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (e->kind == ExprKind::kBinary && e->binary == BinaryOp::kAnd) {
    flatten_and(e->args[0], out);
    flatten_and(e->args[1], out);
  } else {
    out.push_back(e);
  }
}

struct AssertBody {
  std::vector<ConstraintDecl> decls;
  std::vector<std::pair<ExprPtr, size_t>> expressions;  // (expr, index into decls)
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[i_];
    if (i_ + 1 < toks_.size()) ++i_;
    return t;
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool is_kw(const Token& t, const char* kw) const { return t.kind == Tok::kIdent && t.upper == kw; }
  bool at_kw(const char* kw) const { return is_kw(peek(), kw); }
  bool accept_kw(const char* kw) {
    if (!at_kw(kw)) return false;
    next();
    return true;
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    next();
    return true;
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(t.line, t.column, msg); }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::kEnd: return "end of input";
      case Tok::kString: return "string '" + t.text + "'";
      case Tok::kRaw: return "regex string";
      case Tok::kPrompt: return "prompt string";
      case Tok::kPipe: return "'|>'";
      default: return "'" + t.text + "'";
    }
  }

  const Token& expect_kw(const char* kw) {
    if (!at_kw(kw)) fail(peek(), std::string("expected ") + kw + ", found " + describe(peek()));
    return next();
  }

  const Token& expect(Tok k, const char* what) {
    if (!at(k)) fail(peek(), std::string("expected ") + what + ", found " + describe(peek()));
    return next();
  }

  const Token& expect_ident(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::kIdent) fail(t, std::string("expected ") + what + ", found " + describe(t));
    if (reserved_words().count(t.upper)) fail(t, std::string("expected ") + what + ", found keyword " + t.upper);
    return next();
  }

  std::optional<Type> accept_type() {
    const Token& t = peek();
    if (t.kind != Tok::kIdent || reserved_words().count(t.upper)) return std::nullopt;
    auto ty = type_from_keyword(t.text);
    if (!ty) fail(t, "unknown type " + t.text + " (expected STRING, INT, FLOAT, BOOL or DATE)");
    next();
    return ty;
  }

  // -------------------------------------------------------------------------
  // Expressions

  ExprPtr parse_expression(bool allow_semantic) {
    bool saved = allow_semantic_;
    allow_semantic_ = allow_semantic;
    ExprPtr e = parse_or();
    allow_semantic_ = saved;
    return e;
  }

  static std::shared_ptr<Expr> at_token(std::shared_ptr<Expr> e, const Token& t) {
    e->line = t.line;
    e->column = t.column;
    return e;
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (at_kw("OR")) {
      Token t = next();
      lhs = at_token(Expr::make_binary(BinaryOp::kOr, lhs, parse_and()), t);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    while (at_kw("AND")) {
      Token t = next();
      lhs = at_token(Expr::make_binary(BinaryOp::kAnd, lhs, parse_not()), t);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (at_kw("NOT")) {
      Token t = next();
      return at_token(Expr::make_unary(UnaryOp::kNot, parse_not()), t);
    }
    return parse_cmp();
  }

  static std::optional<BinaryOp> cmp_op(Tok k) {
    switch (k) {
      case Tok::kEq: return BinaryOp::kEq;
      case Tok::kNe: return BinaryOp::kNe;
      case Tok::kLt: return BinaryOp::kLt;
      case Tok::kLe: return BinaryOp::kLe;
      case Tok::kGt: return BinaryOp::kGt;
      case Tok::kGe: return BinaryOp::kGe;
      default: return std::nullopt;
    }
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_concat();
    if (auto op = cmp_op(peek().kind)) {
      Token t = next();
      ExprPtr rhs = parse_concat();
      if (cmp_op(peek().kind)) fail(peek(), "comparison operators cannot be chained");
      return at_token(Expr::make_binary(*op, lhs, rhs), t);
    }
    bool negated = at_kw("NOT") && is_kw(peek(1), "IN");
    if (negated || at_kw("IN")) {
      Token t = peek();
      if (negated) next();
      next();
      expect(Tok::kLParen, "'(' after IN");
      std::vector<ExprPtr> args{lhs};
      do {
        args.push_back(parse_concat());
      } while (accept(Tok::kComma));
      expect(Tok::kRParen, "')' closing IN list");
      ExprPtr in = at_token(Expr::make_call("IN", std::move(args)), t);
      return negated ? at_token(Expr::make_unary(UnaryOp::kNot, in), t) : in;
    }
    return lhs;
  }

  ExprPtr parse_concat() {
    ExprPtr lhs = parse_add();
    while (at(Tok::kConcat)) {
      Token t = next();
      lhs = at_token(Expr::make_binary(BinaryOp::kConcat, lhs, parse_add()), t);
    }
    return lhs;
  }

  ExprPtr parse_add() {
    ExprPtr lhs = parse_mul();
    while (at(Tok::kPlus) || at(Tok::kMinus)) {
      Token t = next();
      BinaryOp op = t.kind == Tok::kPlus ? BinaryOp::kAdd : BinaryOp::kSub;
      lhs = at_token(Expr::make_binary(op, lhs, parse_mul()), t);
    }
    return lhs;
  }

  ExprPtr parse_mul() {
    ExprPtr lhs = parse_unary();
    while (at(Tok::kStar) || at(Tok::kSlash) || at(Tok::kPercent)) {
      Token t = next();
      BinaryOp op = t.kind == Tok::kStar ? BinaryOp::kMul : t.kind == Tok::kSlash ? BinaryOp::kDiv : BinaryOp::kMod;
      lhs = at_token(Expr::make_binary(op, lhs, parse_unary()), t);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (at(Tok::kMinus)) {
      Token t = next();
      return at_token(Expr::make_unary(UnaryOp::kNeg, parse_unary()), t);
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (at(Tok::kCast)) {
      Token t = next();
      const Token& ty = peek();
      auto type = ty.kind == Tok::kIdent ? type_from_keyword(ty.text) : std::nullopt;
      if (!type) fail(ty, "expected a type after '::', found " + describe(ty));
      next();
      e = at_token(Expr::make_cast(e, *type), t);
    }
    return e;
  }

  static bool is_semantic_keyword(const Token& t) {
    return t.kind == Tok::kIdent && (t.upper == "GROUNDED" || t.upper == "INCLUDES" || t.upper == "EXCLUDES" ||
                                     t.upper == "SOUND" || t.upper == "RELEVANT");
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kInt: {
        Token tok = next();
        return at_token(Expr::make_literal(Value(tok.ival)), tok);
      }
      case Tok::kFloat: {
        Token tok = next();
        return at_token(Expr::make_literal(Value(tok.fval)), tok);
      }
      case Tok::kString: {
        Token tok = next();
        return at_token(Expr::make_literal(Value(tok.text)), tok);
      }
      case Tok::kRaw: {
        Token tok = next();
        return at_token(Expr::make_literal(Value(tok.text), true), tok);
      }
      case Tok::kPrompt: fail(t, "prompt strings are only allowed as SET, EXTEND, WHERE or AGGREGATE values");
      case Tok::kLParen: {
        next();
        ExprPtr e = parse_or();
        expect(Tok::kRParen, "')'");
        return e;
      }
      case Tok::kIdent: break;
      default: fail(t, "expected an expression, found " + describe(t));
    }
    Token tok = next();
    if (tok.upper == "TRUE") return at_token(Expr::make_literal(Value(true)), tok);
    if (tok.upper == "FALSE") return at_token(Expr::make_literal(Value(false)), tok);
    if (tok.upper == "NULL") return at_token(Expr::make_literal(Value::null()), tok);
    if (tok.upper == "CURRENT_DATE") {
      if (at(Tok::kLParen)) {
        next();
        expect(Tok::kRParen, "')'");
      }
      return at_token(Expr::make_call("CURRENT_DATE", {}), tok);
    }
    if (at(Tok::kLParen)) {
      if (!builtin_functions().count(tok.upper)) fail(tok, "unknown function " + tok.text);
      next();
      std::vector<ExprPtr> args;
      if (!at(Tok::kRParen)) {
        do {
          args.push_back(parse_or());
        } while (accept(Tok::kComma));
      }
      expect(Tok::kRParen, "')' closing argument list");
      return at_token(Expr::make_call(tok.upper, std::move(args)), tok);
    }
    if (reserved_words().count(tok.upper)) fail(tok, "unexpected keyword " + tok.upper);
    if (allow_semantic_ && is_semantic_keyword(peek())) return parse_semantic(tok);
    return at_token(Expr::make_attr(tok.text), tok);
  }

  ExprPtr parse_semantic(const Token& target) {
    Token kw = next();
    ConstraintDecl d;
    d.target = target.text;
    d.refs = {target.text};
    d.line = target.line;
    if (kw.upper == "GROUNDED") {
      d.cls = ConstraintClass::kGrounded;
    } else if (kw.upper == "SOUND") {
      d.cls = ConstraintClass::kSound;
      d.refs.clear();
    } else if (kw.upper == "RELEVANT") {
      d.cls = ConstraintClass::kRelevant;
    } else {
      d.cls = kw.upper == "INCLUDES" ? ConstraintClass::kInclude : ConstraintClass::kExclude;
      d.matcher = parse_matcher();
    }
    pending_.push_back(std::move(d));
    auto marker = Expr::make_call(kSemanticMarker, {});
    marker->literal = Value(static_cast<int64_t>(pending_.size() - 1));
    return at_token(marker, target);
  }

  Matcher parse_matcher() {
    const Token& t = peek();
    Matcher m;
    switch (t.kind) {
      case Tok::kString:
        m.kind = Matcher::Kind::kLiteral;
        m.text = next().text;
        return m;
      case Tok::kRaw: {
        Token tok = next();
        m.kind = Matcher::Kind::kRegex;
        m.text = tok.text;
        validate_regex(m.text, tok.line, tok.column);
        return m;
      }
      case Tok::kPrompt:
        m.kind = Matcher::Kind::kPrompt;
        m.prompt = prompt_from_token(next());
        return m;
      case Tok::kLParen:
        next();
        m.kind = Matcher::Kind::kLiteralSet;
        do {
          m.items.push_back(expect(Tok::kString, "a string in the literal set").text);
        } while (accept(Tok::kComma));
        expect(Tok::kRParen, "')' closing the literal set");
        return m;
      default: fail(t, "expected a string, r'regex', p'prompt' or ('a', 'b') after INCLUDES/EXCLUDES");
    }
  }

  static void validate_regex(const std::string& pattern, int line, int column) {
    try {
      automata::RegexDfa::compile(pattern);
    } catch (const Error& e) {
      throw ParseError(line, column, std::string("invalid regex: ") + e.what());
    }
  }

  // -------------------------------------------------------------------------
  // ASSERT bodies

  AssertBody parse_assert_body() {
    pending_.clear();
    ExprPtr whole = parse_expression(true);
    std::vector<ExprPtr> conjuncts;
    flatten_and(whole, conjuncts);
    AssertBody body;
    for (const auto& c : conjuncts) {
      if (c->kind == ExprKind::kCall && c->name == kSemanticMarker) {
        body.decls.push_back(pending_[static_cast<size_t>(c->literal.as_int())]);
        continue;
      }
      if (contains_marker(*c)) {
        const Expr* m = find_marker(*c);
        throw ParseError(m->line, m->column,
                         "GROUNDED, INCLUDES, EXCLUDES, SOUND and RELEVANT predicates can only be combined with AND");
      }
      if (c->kind == ExprKind::kAttr) {
        throw ParseError(c->line, c->column + static_cast<int>(c->name.size()),
                         "expected GROUNDED, INCLUDES, EXCLUDES, SOUND, RELEVANT or a comparison after " + c->name);
      }
      ConstraintDecl d;
      d.expr = c;
      d.line = c->line;
      classify_expression_constraint(d);
      body.expressions.emplace_back(c, body.decls.size());
      body.decls.push_back(std::move(d));
    }
    std::optional<int> retry;
    std::optional<FailureMode> mode;
    if (at_kw("RETRY")) {
      next();
      if (at(Tok::kMinus)) fail(peek(), "retry threshold must be non-negative");
      const Token& n = expect(Tok::kInt, "a retry threshold");
      if (n.ival > 1000000) fail(n, "retry threshold too large");
      retry = static_cast<int>(n.ival);
    }
    if (at_kw("CONTINUE") || at_kw("IGNORE") || at_kw("ABORT")) {
      mode = failure_mode_from_name(next().upper);
      expect_kw("ON");
      expect_kw("FAIL");
    }
    for (auto& d : body.decls) {
      d.retry = retry;
      d.mode = mode;
    }
    return body;
  }

  std::vector<Token> toks_;
  size_t i_ = 0;
  bool allow_semantic_ = false;
  std::vector<ConstraintDecl> pending_;
};

// ---------------------------------------------------------------------------
// Query assembly with schema resolution

class QueryBuilder {
 public:
  QueryBuilder(Parser& p, const Catalog* catalog) : p_(p), catalog_(catalog) {}

  LogicalPlan build() {
    parse_head();
    while (!p_.at(Tok::kEnd)) {
      if (!p_.accept(Tok::kPipe)) p_.fail(p_.peek(), "expected '|>' before the next stage, found " + Parser::describe(p_.peek()));
      const Token& kw = p_.peek();
      if (p_.is_kw(kw, "SET")) {
        parse_set();
      } else if (p_.is_kw(kw, "EXTEND")) {
        parse_extend();
      } else if (p_.is_kw(kw, "WHERE")) {
        parse_where();
      } else if (p_.is_kw(kw, "AGGREGATE")) {
        parse_aggregate();
      } else if (p_.is_kw(kw, "ASSERT")) {
        parse_assert();
      } else {
        p_.fail(kw, "expected SET, EXTEND, WHERE, AGGREGATE or ASSERT, found " + Parser::describe(kw));
      }
    }
    std::vector<ConstraintDecl*> decls;
    for (auto& s : plan_.stages)
      if (s.kind == StageKind::kAssert) decls.push_back(&s.constraint);
    assign_constraint_ids(decls);
    return std::move(plan_);
  }

 private:
  void parse_head() {
    Stage scan;
    scan.kind = StageKind::kScan;
    const Token& first = p_.peek();
    scan.line = first.line;
    if (p_.is_kw(first, "FROM")) {
      p_.next();
      scan.table = p_.expect_ident("a table name").text;
    } else if (first.kind == Tok::kIdent && first.upper == "SCAN" && p_.peek(1).kind == Tok::kLParen) {
      p_.next();
      p_.next();
      scan.table = p_.expect_ident("a table name").text;
      p_.expect(Tok::kRParen, "')'");
    } else {
      p_.fail(first, "expected FROM, found " + Parser::describe(first));
    }
    const std::vector<Attribute>* known = nullptr;
    if (catalog_) {
      auto it = catalog_->tables.find(scan.table);
      if (it != catalog_->tables.end()) known = &it->second;
    }
    plan_.open_schema = known == nullptr;
    if (known) schema_ = *known;
    scan.op_id = unique_op_id(scan.table, false, first);
    scan.output_schema = schema_;
    plan_.stages.push_back(std::move(scan));
  }

  Attribute* find(const std::string& name) {
    for (auto& a : schema_)
      if (a.name == name) return &a;
    return nullptr;
  }

  void add_source_column(const std::string& name) {
    Attribute a{name, Type::kAny, false};
    for (auto& s : plan_.stages) s.output_schema.push_back(a);
    schema_.push_back(a);
  }

  Type lookup(const std::string& name, int line, int column) {
    if (Attribute* a = find(name)) return a->type;
    if (plan_.open_schema && !closed_) {
      add_source_column(name);
      return Type::kAny;
    }
    throw ParseError(line, column, "unknown attribute " + name);
  }

  // Constraint references are checked during planning so that a dangling
  // target is reported as a planning error rather than a syntax error.
  Type lookup_deferred(const std::string& name) {
    if (Attribute* a = find(name)) return a->type;
    if (op_ids_.count(name)) return Type::kAny;
    if (plan_.open_schema && !closed_) add_source_column(name);
    return Type::kAny;
  }

  std::string unique_op_id(const std::string& base, bool explicit_alias, const Token& at) {
    if (explicit_alias) {
      if (op_ids_.count(base) || find(base)) p_.fail(at, "duplicate alias " + base);
      op_ids_.insert(base);
      return base;
    }
    std::string id = base;
    for (int n = 2; op_ids_.count(id); ++n) id = base + "#" + std::to_string(n);
    op_ids_.insert(id);
    return id;
  }

  struct ValueSpec {
    Annotation annotation = Annotation::kNone;
    std::optional<PromptTemplate> prompt;
    ExprPtr expr;
    Token at;
  };

  ValueSpec parse_value() {
    ValueSpec v;
    v.at = p_.peek();
    if (p_.accept_kw("EXTRACTIVE")) {
      v.annotation = Annotation::kExtractive;
    } else if (p_.accept_kw("ABSTRACTIVE")) {
      v.annotation = Annotation::kAbstractive;
    }
    if (p_.at(Tok::kPrompt)) {
      const Token& t = p_.next();
      v.prompt = prompt_from_token(t);
      for (const auto& ph : v.prompt->placeholders) lookup(ph, t.line, t.column);
    } else {
      if (v.annotation != Annotation::kNone) p_.fail(p_.peek(), "EXTRACTIVE and ABSTRACTIVE apply only to prompt strings");
      v.expr = p_.parse_expression(false);
    }
    return v;
  }

  Type value_type(const ValueSpec& v) {
    if (v.prompt) return Type::kString;
    return infer_type(*v.expr, [this](const std::string& n, int l, int c) { return lookup(n, l, c); });
  }

  void add_implicit_type(const Stage& producer) {
    if (!producer.prompt || !producer.out_type) return;
    Stage a;
    a.kind = StageKind::kAssert;
    a.line = producer.line;
    a.constraint.target = producer.attr;
    a.constraint.cls = ConstraintClass::kDomain;
    DomainSpec spec;
    spec.kind = DomainSpec::Kind::kType;
    spec.type = *producer.out_type;
    a.constraint.domain = spec;
    a.constraint.origin = Origin::kImplicit;
    a.constraint.refs = {producer.attr};
    a.constraint.line = producer.line;
    a.output_schema = schema_;
    plan_.stages.push_back(std::move(a));
  }

  void parse_set() {
    Token kw = p_.next();
    Stage s;
    s.kind = StageKind::kSet;
    s.line = kw.line;
    const Token& name = p_.expect_ident("an attribute name after SET");
    s.attr = name.text;
    lookup(s.attr, name.line, name.column);
    p_.expect(Tok::kEq, "'='");
    ValueSpec v = parse_value();
    Type inferred = value_type(v);
    s.prompt = v.prompt;
    s.expr = v.expr;
    s.annotation = v.annotation;
    s.out_type = p_.accept_type();
    if (p_.accept_kw("AS")) {
      const Token& al = p_.expect_ident("an alias after AS");
      s.alias = al.text;
      s.op_id = unique_op_id(s.alias, true, al);
    } else {
      s.op_id = unique_op_id(s.attr, false, name);
    }
    Attribute* a = find(s.attr);
    a->type = s.out_type.value_or(inferred);
    a->generated = s.prompt.has_value();
    s.output_schema = schema_;
    plan_.stages.push_back(s);
    add_implicit_type(s);
  }

  void parse_extend() {
    Token kw = p_.next();
    Stage s;
    s.kind = StageKind::kExtend;
    s.line = kw.line;
    ValueSpec v = parse_value();
    Type inferred = value_type(v);
    s.prompt = v.prompt;
    s.expr = v.expr;
    s.annotation = v.annotation;
    p_.expect_kw("AS");
    const Token& name = p_.expect_ident("an output attribute name after AS");
    s.attr = name.text;
    if (find(s.attr)) p_.fail(name, "attribute " + s.attr + " already exists; use SET to overwrite it");
    s.out_type = p_.accept_type();
    s.op_id = unique_op_id(s.attr, true, name);
    schema_.push_back(Attribute{s.attr, s.out_type.value_or(inferred), s.prompt.has_value()});
    s.output_schema = schema_;
    plan_.stages.push_back(s);
    add_implicit_type(s);
  }

  void parse_where() {
    Token kw = p_.next();
    Stage s;
    s.kind = StageKind::kWhere;
    s.line = kw.line;
    ValueSpec v = parse_value();
    if (v.annotation != Annotation::kNone) p_.fail(v.at, "WHERE does not take EXTRACTIVE or ABSTRACTIVE");
    Type t = value_type(v);
    if (!v.prompt && t != Type::kBool && t != Type::kAny)
      p_.fail(v.at, std::string("WHERE predicate must be BOOL, got ") + type_name(t));
    s.prompt = v.prompt;
    s.expr = v.expr;
    ++where_count_;
    if (p_.accept_kw("AS")) {
      const Token& al = p_.expect_ident("an alias after AS");
      s.alias = al.text;
      s.op_id = unique_op_id(s.alias, true, al);
    } else {
      s.op_id = unique_op_id("where_" + std::to_string(where_count_), false, kw);
    }
    s.output_schema = schema_;
    plan_.stages.push_back(std::move(s));
  }

  void parse_aggregate() {
    Token kw = p_.next();
    Stage s;
    s.kind = StageKind::kAggregate;
    s.line = kw.line;
    ValueSpec v = parse_value();
    if (!v.prompt) p_.fail(v.at, "AGGREGATE requires a prompt string");
    s.prompt = v.prompt;
    s.annotation = v.annotation;
    p_.expect_kw("AS");
    const Token& name = p_.expect_ident("an output attribute name after AS");
    s.attr = name.text;
    s.out_type = p_.accept_type();
    if (p_.accept_kw("GROUP")) {
      p_.expect_kw("BY");
      do {
        const Token& g = p_.expect_ident("a grouping attribute");
        lookup(g.text, g.line, g.column);
        if (std::find(s.group_by.begin(), s.group_by.end(), g.text) != s.group_by.end())
          p_.fail(g, "duplicate grouping attribute " + g.text);
        s.group_by.push_back(g.text);
      } while (p_.accept(Tok::kComma));
    }
    if (std::find(s.group_by.begin(), s.group_by.end(), s.attr) != s.group_by.end())
      p_.fail(name, "aggregate output " + s.attr + " collides with a grouping attribute");
    s.op_id = unique_op_id(s.attr, true, name);
    std::vector<Attribute> out;
    for (const auto& g : s.group_by) out.push_back(*find(g));
    out.push_back(Attribute{s.attr, s.out_type.value_or(Type::kString), true});
    schema_ = std::move(out);
    closed_ = true;
    s.output_schema = schema_;
    plan_.stages.push_back(s);
    add_implicit_type(s);
  }

  void parse_assert() {
    Token kw = p_.next();
    AssertBody body = p_.parse_assert_body();
    auto deferred = [this](const std::string& n, int, int) { return lookup_deferred(n); };
    for (auto& d : body.decls) {
      if (d.expr) {
        Type t = infer_type(*d.expr, deferred);
        if (t != Type::kBool && t != Type::kAny)
          throw ParseError(d.expr->line, d.expr->column, std::string("ASSERT predicate must be BOOL, got ") + type_name(t));
      } else if (d.cls != ConstraintClass::kSound) {
        lookup_deferred(d.target);
      }
      if (d.matcher && d.matcher->kind == Matcher::Kind::kPrompt)
        for (const auto& ph : d.matcher->prompt.placeholders) lookup_deferred(ph);
      Stage s;
      s.kind = StageKind::kAssert;
      s.line = kw.line;
      d.line = kw.line;
      s.constraint = std::move(d);
      s.output_schema = schema_;
      plan_.stages.push_back(std::move(s));
    }
  }

  Parser& p_;
  const Catalog* catalog_;
  LogicalPlan plan_;
  std::vector<Attribute> schema_;
  std::set<std::string> op_ids_;
  bool closed_ = false;
  int where_count_ = 0;
};

bool is_cmp(BinaryOp op) {
  return op == BinaryOp::kEq || op == BinaryOp::kNe || op == BinaryOp::kLt || op == BinaryOp::kLe ||
         op == BinaryOp::kGt || op == BinaryOp::kGe;
}

bool boolish(Type t) { return t == Type::kBool || t == Type::kAny; }
bool numericish(Type t) { return t == Type::kInt || t == Type::kFloat || t == Type::kAny; }

bool comparable(Type a, Type b) {
  if (a == Type::kAny || b == Type::kAny || a == b) return true;
  if (numericish(a) && numericish(b)) return true;
  auto date_text = [](Type x, Type y) { return x == Type::kDate && y == Type::kString; };
  return date_text(a, b) || date_text(b, a);
}

[[noreturn]] void type_error(const Expr& at, const std::string& msg) { throw ParseError(at.line, at.column, msg); }

std::optional<double> numeric_literal(const ExprPtr& e) {
  if (e->kind == ExprKind::kLiteral && e->literal.is_number()) return e->literal.as_number();
  if (e->kind == ExprKind::kUnary && e->unary == UnaryOp::kNeg && e->args[0]->kind == ExprKind::kLiteral &&
      e->args[0]->literal.is_number())
    return -e->args[0]->literal.as_number();
  return std::nullopt;
}

const std::string* attr_name(const ExprPtr& e) { return e->kind == ExprKind::kAttr ? &e->name : nullptr; }

const std::string* length_of_attr(const ExprPtr& e) {
  if (e->kind == ExprKind::kCall && e->name == "LENGTH" && e->args.size() == 1) return attr_name(e->args[0]);
  return nullptr;
}

BinaryOp mirror(BinaryOp op) {
  switch (op) {
    case BinaryOp::kLt: return BinaryOp::kGt;
    case BinaryOp::kLe: return BinaryOp::kGe;
    case BinaryOp::kGt: return BinaryOp::kLt;
    case BinaryOp::kGe: return BinaryOp::kLe;
    default: return op;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

LogicalPlan parse_query(std::string_view text, const Catalog* catalog) {
  Parser p(Lexer(text).tokenize());
  return QueryBuilder(p, catalog).build();
}

PromptTemplate make_prompt(std::string raw_text) {
  PromptTemplate p;
  p.placeholders = scan_placeholders(raw_text, 1, 1);
  p.raw_text = std::move(raw_text);
  return p;
}

PromptTemplate parse_prompt_string(std::string_view text) {
  auto toks = Lexer(text).tokenize();
  if (toks.empty() || toks[0].kind != Tok::kPrompt) {
    int line = toks.empty() ? 1 : toks[0].line;
    int col = toks.empty() ? 1 : toks[0].column;
    throw ParseError(line, col, "expected a prompt string p'...'");
  }
  if (toks[1].kind != Tok::kEnd) throw ParseError(toks[1].line, toks[1].column, "unexpected input after prompt string");
  return prompt_from_token(toks[0]);
}

std::vector<ConstraintDecl> parse_constraints(std::string_view text) {
  Parser p(Lexer(text).tokenize());
  p.accept_kw("ASSERT");
  AssertBody body = p.parse_assert_body();
  if (!p.at(Tok::kEnd)) p.fail(p.peek(), "unexpected " + Parser::describe(p.peek()) + " after constraint");
  for (const auto& [e, idx] : body.expressions) {
    Type t = infer_type(*e, [](const std::string&, int, int) { return Type::kAny; });
    if (t != Type::kBool && t != Type::kAny)
      throw ParseError(e->line, e->column, std::string("ASSERT predicate must be BOOL, got ") + type_name(t));
  }
  std::vector<ConstraintDecl*> ptrs;
  for (auto& d : body.decls) ptrs.push_back(&d);
  assign_constraint_ids(ptrs);
  return body.decls;
}

ExprPtr parse_expr(std::string_view text) {
  Parser p(Lexer(text).tokenize());
  ExprPtr e = p.parse_expression(false);
  if (!p.at(Tok::kEnd)) p.fail(p.peek(), "unexpected " + Parser::describe(p.peek()) + " after expression");
  infer_type(*e, [](const std::string&, int, int) { return Type::kAny; });
  return e;
}

void classify_expression_constraint(ConstraintDecl& d) {
  const Expr& e = *d.expr;
  d.refs = referenced_attrs(e);
  d.cls = ConstraintClass::kAssertion;
  d.domain.reset();
  d.target.clear();
  auto set_domain = [&](const std::string& attr, DomainSpec spec) {
    d.cls = ConstraintClass::kDomain;
    d.target = attr;
    d.refs = {attr};
    d.domain = std::move(spec);
  };

  if (e.kind == ExprKind::kCall && e.name == "REGEXP_CONTAINS" && e.args.size() == 2) {
    const std::string* a = attr_name(e.args[0]);
    const Expr& pat = *e.args[1];
    if (a && pat.kind == ExprKind::kLiteral && pat.literal.is_text()) {
      DomainSpec spec;
      spec.kind = DomainSpec::Kind::kRegex;
      spec.pattern = pat.literal.as_text();
      set_domain(*a, spec);
    }
    return;
  }
  if (e.kind == ExprKind::kCall && e.name == "IN" && e.args.size() >= 2) {
    const std::string* a = attr_name(e.args[0]);
    if (!a) return;
    DomainSpec spec;
    spec.kind = DomainSpec::Kind::kValueSet;
    for (size_t i = 1; i < e.args.size(); ++i) {
      const ExprPtr& item = e.args[i];
      if (auto n = numeric_literal(item); n && item->kind != ExprKind::kLiteral) {
        spec.values.push_back(item->args[0]->literal.is_int() ? Value(-item->args[0]->literal.as_int()) : Value(*n));
      } else if (item->kind == ExprKind::kLiteral && !item->literal.is_null()) {
        spec.values.push_back(item->literal);
      } else {
        return;
      }
    }
    set_domain(*a, spec);
    return;
  }
  if (e.kind != ExprKind::kBinary || !is_cmp(e.binary)) return;

  BinaryOp op = e.binary;
  ExprPtr lhs = e.args[0];
  ExprPtr rhs = e.args[1];
  if (!attr_name(lhs) && !length_of_attr(lhs)) {
    std::swap(lhs, rhs);
    op = mirror(op);
  }

  if (const std::string* a = length_of_attr(lhs)) {
    if (rhs->kind == ExprKind::kLiteral && rhs->literal.is_int() && (op == BinaryOp::kLt || op == BinaryOp::kLe)) {
      DomainSpec spec;
      spec.kind = DomainSpec::Kind::kMaxLength;
      spec.max_length = rhs->literal.as_int() + (op == BinaryOp::kLe ? 1 : 0);
      set_domain(*a, spec);
    }
    return;
  }
  const std::string* a = attr_name(lhs);
  if (!a) return;
  if (op == BinaryOp::kEq && rhs->kind == ExprKind::kLiteral && !rhs->literal.is_null()) {
    DomainSpec spec;
    spec.kind = DomainSpec::Kind::kValueSet;
    spec.values = {rhs->literal};
    set_domain(*a, spec);
    return;
  }
  auto n = numeric_literal(rhs);
  if (!n || op == BinaryOp::kEq || op == BinaryOp::kNe) return;
  DomainSpec spec;
  spec.kind = DomainSpec::Kind::kRange;
  if (op == BinaryOp::kGt || op == BinaryOp::kGe) {
    spec.lo = *n;
    spec.lo_inclusive = op == BinaryOp::kGe;
  } else {
    spec.hi = *n;
    spec.hi_inclusive = op == BinaryOp::kLe;
  }
  set_domain(*a, spec);
}

std::string base_constraint_id(const ConstraintDecl& d) {
  if (d.origin == Origin::kImplicit && d.domain && d.domain->kind == DomainSpec::Kind::kType) return d.target + ":type";
  if (d.cls == ConstraintClass::kAssertion) {
    if (d.refs.empty()) return "assertion";
    std::string joined;
    for (const auto& r : d.refs) joined += (joined.empty() ? "" : "+") + r;
    return joined + ":assertion";
  }
  return d.target + ":" + class_name(d.cls);
}

void assign_constraint_ids(std::vector<ConstraintDecl*>& decls) {
  std::set<std::string> used;
  for (const auto* d : decls)
    if (!d->id.empty()) used.insert(d->id);
  for (auto* d : decls) {
    if (!d->id.empty()) continue;
    std::string base = base_constraint_id(*d);
    std::string id = base;
    for (int n = 2; used.count(id); ++n) id = base + "#" + std::to_string(n);
    used.insert(id);
    d->id = id;
  }
}

Type infer_type(const Expr& e, const AttrLookup& lookup) {
  auto sub = [&](size_t i) { return infer_type(*e.args[i], lookup); };
  switch (e.kind) {
    case ExprKind::kLiteral: return e.literal.type();
    case ExprKind::kAttr: return lookup(e.name, e.line, e.column);
    case ExprKind::kUnary: {
      Type t = sub(0);
      if (e.unary == UnaryOp::kNot) {
        if (!boolish(t)) type_error(e, std::string("NOT expects BOOL, got ") + type_name(t));
        return Type::kBool;
      }
      if (!numericish(t)) type_error(e, std::string("unary minus expects a number, got ") + type_name(t));
      return t;
    }
    case ExprKind::kBinary: {
      Type l = sub(0);
      Type r = sub(1);
      BinaryOp op = e.binary;
      if (op == BinaryOp::kAnd || op == BinaryOp::kOr) {
        if (!boolish(l) || !boolish(r))
          type_error(e, std::string(binary_op_text(op)) + " expects BOOL operands, got " + type_name(l) + " and " +
                            type_name(r));
        return Type::kBool;
      }
      if (is_cmp(op)) {
        if (!comparable(l, r)) type_error(e, std::string("cannot compare ") + type_name(l) + " with " + type_name(r));
        return Type::kBool;
      }
      if (op == BinaryOp::kConcat) return Type::kString;
      if (!numericish(l) || !numericish(r))
        type_error(e, std::string("operator ") + binary_op_text(op) + " expects numbers, got " + type_name(l) +
                          " and " + type_name(r));
      if (l == Type::kAny || r == Type::kAny) return Type::kAny;
      return l == Type::kFloat || r == Type::kFloat ? Type::kFloat : Type::kInt;
    }
    case ExprKind::kCast:
      sub(0);
      return e.cast_type;
    case ExprKind::kCall: break;
  }
  auto arity = [&](size_t lo, size_t hi) {
    if (e.args.size() < lo || e.args.size() > hi)
      type_error(e, e.name + " takes " + (lo == hi ? std::to_string(lo) : std::to_string(lo) + " or " + std::to_string(hi)) +
                        " argument(s), got " + std::to_string(e.args.size()));
  };
  if (e.name == "IN") {
    Type t = sub(0);
    for (size_t i = 1; i < e.args.size(); ++i)
      if (!comparable(t, sub(i))) type_error(*e.args[i], std::string("IN list item does not match ") + type_name(t));
    return Type::kBool;
  }
  if (e.name == "LENGTH") {
    arity(1, 1);
    sub(0);
    return Type::kInt;
  }
  if (e.name == "REGEXP_CONTAINS") {
    arity(2, 2);
    sub(0);
    const Expr& pat = *e.args[1];
    if (pat.kind != ExprKind::kLiteral || !pat.literal.is_text())
      type_error(pat, "REGEXP_CONTAINS expects a string literal pattern");
    try {
      automata::RegexDfa::compile(pat.literal.as_text());
    } catch (const Error& err) {
      type_error(pat, std::string("invalid regex: ") + err.what());
    }
    return Type::kBool;
  }
  if (e.name == "DATE_PART") {
    arity(2, 2);
    const Expr& part = *e.args[0];
    if (part.kind != ExprKind::kLiteral || !part.literal.is_text())
      type_error(part, "DATE_PART expects a string literal part");
    std::string p = to_upper(part.literal.as_text());
    if (p != "YEAR" && p != "MONTH" && p != "DAY") type_error(part, "DATE_PART supports 'year', 'month' and 'day'");
    Type t = sub(1);
    if (t != Type::kDate && t != Type::kInterval && t != Type::kAny && t != Type::kString)
      type_error(*e.args[1], std::string("DATE_PART expects a DATE or interval, got ") + type_name(t));
    return Type::kInt;
  }
  if (e.name == "AGE") {
    arity(1, 2);
    for (size_t i = 0; i < e.args.size(); ++i) {
      Type t = sub(i);
      if (t != Type::kDate && t != Type::kAny && t != Type::kString)
        type_error(*e.args[i], std::string("AGE expects DATE arguments, got ") + type_name(t));
    }
    return Type::kInterval;
  }
  if (e.name == "CURRENT_DATE") {
    arity(0, 0);
    return Type::kDate;
  }
  type_error(e, "unknown function " + e.name);
}

}  // namespace sicql::lang
