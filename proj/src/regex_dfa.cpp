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

// Regex -> syntax tree -> Thompson NFA (with zero-width ^/$ edges) -> subset
// construction over byte equivalence classes -> Moore minimization.
//
// The compiled language is "some substring matches", so the pattern is
// wrapped as  .*  R  .*  where the outer loops consume any byte. ^ may only be
// crossed at position 0 and $ only when the input is exhausted; the initial
// DFA state is therefore keyed separately from later states with the same
// NFA set.

#include <algorithm>
#include <bitset>
#include <deque>
#include <map>

#include "sicql/automaton.hpp"
#include "sicql/error.hpp"

namespace sicql::automata {

namespace {

using CharSet = std::bitset<256>;

constexpr int kMaxRepeat = 1000;
constexpr size_t kMaxDfaStates = 200000;

struct Node {
  enum class Kind { kEmpty, kSet, kBol, kEol, kConcat, kAlt, kRepeat };
  Kind kind = Kind::kEmpty;
  CharSet set;
  std::vector<Node> kids;
  int min = 0;
  int max = 0;  // -1 = unbounded
};

CharSet digit_set() {
  CharSet s;
  for (int c = '0'; c <= '9'; ++c) s.set(static_cast<size_t>(c));
  return s;
}

CharSet word_set() {
  CharSet s = digit_set();
  for (int c = 'a'; c <= 'z'; ++c) s.set(static_cast<size_t>(c));
  for (int c = 'A'; c <= 'Z'; ++c) s.set(static_cast<size_t>(c));
  s.set('_');
  return s;
}

CharSet space_set() {
  CharSet s;
  for (char c : {' ', '\t', '\n', '\v', '\f', '\r'}) s.set(static_cast<unsigned char>(c));
  return s;
}

CharSet single(unsigned char c) {
  CharSet s;
  s.set(c);
  return s;
}

class RegexParser {
 public:
  explicit RegexParser(std::string_view pattern) : p_(pattern) {}

  Node parse() {
    Node n = alternation();
    if (pos_ != p_.size()) fail(ErrorCode::kParse, "unmatched ')'");
    return n;
  }

 private:
  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, "regex '" + std::string(p_) + "' at offset " + std::to_string(pos_) + ": " + what);
  }

  bool at_end() const { return pos_ >= p_.size(); }
  char cur() const { return p_[pos_]; }
  bool peek(char c) const { return !at_end() && p_[pos_] == c; }

  Node alternation() {
    std::vector<Node> alts;
    alts.push_back(concat());
    while (peek('|')) {
      ++pos_;
      alts.push_back(concat());
    }
    if (alts.size() == 1) return std::move(alts.front());
    Node n;
    n.kind = Node::Kind::kAlt;
    n.kids = std::move(alts);
    return n;
  }

  Node concat() {
    std::vector<Node> items;
    while (!at_end() && cur() != '|' && cur() != ')') items.push_back(repeat());
    if (items.empty()) return Node{};
    if (items.size() == 1) return std::move(items.front());
    Node n;
    n.kind = Node::Kind::kConcat;
    n.kids = std::move(items);
    return n;
  }

  bool parse_int(int& out) {
    size_t start = pos_;
    long v = 0;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(cur()))) {
      v = v * 10 + (cur() - '0');
      if (v > 1000000) fail(ErrorCode::kUnsupported, "repeat count too large");
      ++pos_;
    }
    out = static_cast<int>(v);
    return pos_ > start;
  }

  void brace(int& lo, int& hi) {
    ++pos_;  // '{'
    if (!parse_int(lo)) fail(ErrorCode::kParse, "malformed {} quantifier");
    hi = lo;
    if (peek(',')) {
      ++pos_;
      if (!parse_int(hi)) hi = -1;
    }
    if (!peek('}')) fail(ErrorCode::kParse, "malformed {} quantifier");
    ++pos_;
    if (hi != -1 && hi < lo) fail(ErrorCode::kParse, "numbers out of order in {} quantifier");
    if (lo > kMaxRepeat || hi > kMaxRepeat) fail(ErrorCode::kUnsupported, "repeat bound above 1000");
  }

  Node repeat() {
    Node atom_node = atom();
    bool quantified = false;
    while (!at_end()) {
      int lo = 0;
      int hi = 0;
      char c = cur();
      if (c == '*') {
        lo = 0, hi = -1, ++pos_;
      } else if (c == '+') {
        lo = 1, hi = -1, ++pos_;
      } else if (c == '?') {
        lo = 0, hi = 1, ++pos_;
      } else if (c == '{') {
        brace(lo, hi);
      } else {
        break;
      }
      if (quantified || atom_node.kind == Node::Kind::kBol || atom_node.kind == Node::Kind::kEol)
        fail(ErrorCode::kParse, "nothing to repeat");
      if (peek('?')) ++pos_;  // lazy quantifiers accept the same language
      quantified = true;
      Node r;
      r.kind = Node::Kind::kRepeat;
      r.min = lo;
      r.max = hi;
      r.kids.push_back(std::move(atom_node));
      atom_node = std::move(r);
    }
    return atom_node;
  }

  int hex_digit(char c) const {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  // Parses the escape after '\'. Returns true and sets `set` for class
  // escapes; otherwise stores a single byte in `ch`.
  bool escape(bool in_class, CharSet& set, unsigned char& ch) {
    if (at_end()) fail(ErrorCode::kParse, "trailing backslash");
    char e = cur();
    ++pos_;
    switch (e) {
      case 'd': set = digit_set(); return true;
      case 'D': set = ~digit_set(); return true;
      case 'w': set = word_set(); return true;
      case 'W': set = ~word_set(); return true;
      case 's': set = space_set(); return true;
      case 'S': set = ~space_set(); return true;
      case 'n': ch = '\n'; return false;
      case 't': ch = '\t'; return false;
      case 'r': ch = '\r'; return false;
      case 'f': ch = '\f'; return false;
      case 'v': ch = '\v'; return false;
      case '0':
        if (!at_end() && std::isdigit(static_cast<unsigned char>(cur())))
          fail(ErrorCode::kUnsupported, "octal escapes are not supported");
        ch = '\0';
        return false;
      case 'x': {
        if (pos_ + 2 > p_.size()) fail(ErrorCode::kParse, "malformed \\x escape");
        int h = hex_digit(p_[pos_]);
        int l = hex_digit(p_[pos_ + 1]);
        if (h < 0 || l < 0) fail(ErrorCode::kParse, "malformed \\x escape");
        pos_ += 2;
        ch = static_cast<unsigned char>(h * 16 + l);
        return false;
      }
      case 'b':
        if (in_class) {
          ch = '\b';
          return false;
        }
        fail(ErrorCode::kUnsupported, "word boundaries are not supported");
      case 'B': fail(ErrorCode::kUnsupported, "word boundaries are not supported");
      default: break;
    }
    if (e >= '1' && e <= '9') fail(ErrorCode::kUnsupported, "backreferences are not supported");
    if (std::isalnum(static_cast<unsigned char>(e))) fail(ErrorCode::kUnsupported, std::string("unsupported escape \\") + e);
    ch = static_cast<unsigned char>(e);
    return false;
  }

  CharSet char_class() {
    ++pos_;  // '['
    bool negate = false;
    if (peek('^')) {
      negate = true;
      ++pos_;
    }
    CharSet result;
    while (true) {
      if (at_end()) fail(ErrorCode::kParse, "unterminated character class");
      if (cur() == ']') {
        ++pos_;
        break;
      }
      CharSet set;
      unsigned char lo = 0;
      bool is_set = false;
      if (cur() == '\\') {
        ++pos_;
        is_set = escape(true, set, lo);
      } else {
        lo = static_cast<unsigned char>(cur());
        ++pos_;
      }
      if (!is_set && peek('-') && pos_ + 1 < p_.size() && p_[pos_ + 1] != ']') {
        ++pos_;  // '-'
        unsigned char hi = 0;
        CharSet hi_set;
        if (cur() == '\\') {
          ++pos_;
          if (escape(true, hi_set, hi)) fail(ErrorCode::kParse, "class escape used as range bound");
        } else {
          hi = static_cast<unsigned char>(cur());
          ++pos_;
        }
        if (hi < lo) fail(ErrorCode::kParse, "range out of order in character class");
        for (int c = lo; c <= hi; ++c) result.set(static_cast<size_t>(c));
        continue;
      }
      if (is_set && peek('-') && pos_ + 1 < p_.size() && p_[pos_ + 1] != ']')
        fail(ErrorCode::kParse, "class escape used as range bound");
      if (is_set)
        result |= set;
      else
        result.set(lo);
    }
    return negate ? ~result : result;
  }

  Node atom() {
    Node n;
    char c = cur();
    switch (c) {
      case '(': {
        ++pos_;
        if (peek('?')) {
          if (pos_ + 1 < p_.size() && p_[pos_ + 1] == ':') {
            pos_ += 2;
          } else {
            fail(ErrorCode::kUnsupported, "lookaround and named groups are not supported");
          }
        }
        n = alternation();
        if (!peek(')')) fail(ErrorCode::kParse, "missing ')'");
        ++pos_;
        return n;
      }
      case '[':
        n.kind = Node::Kind::kSet;
        n.set = char_class();
        return n;
      case '.':
        ++pos_;
        n.kind = Node::Kind::kSet;
        n.set.set();
        n.set.reset('\n');
        n.set.reset('\r');
        return n;
      case '^':
        ++pos_;
        n.kind = Node::Kind::kBol;
        return n;
      case '$':
        ++pos_;
        n.kind = Node::Kind::kEol;
        return n;
      case '\\': {
        ++pos_;
        unsigned char ch = 0;
        CharSet set;
        n.kind = Node::Kind::kSet;
        n.set = escape(false, set, ch) ? set : single(ch);
        return n;
      }
      case '*':
      case '+':
      case '?':
      case '{':
        fail(ErrorCode::kParse, "nothing to repeat");
      default:
        ++pos_;
        n.kind = Node::Kind::kSet;
        n.set = single(static_cast<unsigned char>(c));
        return n;
    }
  }

  std::string_view p_;
  size_t pos_ = 0;
};

struct Edge {
  enum class Kind : uint8_t { kEps, kBol, kEol, kSet };
  Kind kind;
  int32_t set;
  int32_t to;
};

struct Fragment {
  int32_t start;
  int32_t end;
};

class Nfa {
 public:
  int32_t add_state() {
    out_.emplace_back();
    return static_cast<int32_t>(out_.size() - 1);
  }
  void add_edge(int32_t from, Edge e) { out_[static_cast<size_t>(from)].push_back(e); }
  void eps(int32_t from, int32_t to) { add_edge(from, {Edge::Kind::kEps, -1, to}); }

  int32_t add_set(const CharSet& s) {
    for (size_t i = 0; i < sets_.size(); ++i)
      if (sets_[i] == s) return static_cast<int32_t>(i);
    sets_.push_back(s);
    return static_cast<int32_t>(sets_.size() - 1);
  }

  Fragment build(const Node& n) {
    switch (n.kind) {
      case Node::Kind::kEmpty: {
        int32_t s = add_state(), e = add_state();
        eps(s, e);
        return {s, e};
      }
      case Node::Kind::kSet: {
        int32_t s = add_state(), e = add_state();
        out_[static_cast<size_t>(s)].push_back({Edge::Kind::kSet, add_set(n.set), e});
        return {s, e};
      }
      case Node::Kind::kBol:
      case Node::Kind::kEol: {
        int32_t s = add_state(), e = add_state();
        out_[static_cast<size_t>(s)].push_back(
            {n.kind == Node::Kind::kBol ? Edge::Kind::kBol : Edge::Kind::kEol, -1, e});
        return {s, e};
      }
      case Node::Kind::kConcat: {
        Fragment f = build(n.kids.front());
        for (size_t i = 1; i < n.kids.size(); ++i) {
          Fragment g = build(n.kids[i]);
          eps(f.end, g.start);
          f.end = g.end;
        }
        return f;
      }
      case Node::Kind::kAlt: {
        int32_t s = add_state(), e = add_state();
        for (const Node& k : n.kids) {
          Fragment f = build(k);
          eps(s, f.start);
          eps(f.end, e);
        }
        return {s, e};
      }
      case Node::Kind::kRepeat: {
        const Node& body = n.kids.front();
        int32_t s = add_state();
        int32_t tail = s;
        for (int i = 0; i < n.min; ++i) {
          Fragment f = build(body);
          eps(tail, f.start);
          tail = f.end;
        }
        int32_t e = add_state();
        if (n.max == -1) {
          Fragment f = build(body);
          eps(tail, f.start);
          eps(tail, e);
          eps(f.end, f.start);
          eps(f.end, e);
        } else {
          // nested optionals keep subset sizes small: (x(x(x)?)?)?
          int32_t next_start = e;
          for (int i = 0; i < n.max - n.min; ++i) {
            Fragment f = build(body);
            int32_t opt = add_state();
            eps(opt, f.start);
            eps(opt, e);
            eps(f.end, next_start);
            next_start = opt;
          }
          eps(tail, next_start);
        }
        return {s, e};
      }
    }
    return {0, 0};
  }

  const std::vector<std::vector<Edge>>& out() const { return out_; }
  const std::vector<CharSet>& sets() const { return sets_; }

 private:
  std::vector<std::vector<Edge>> out_;
  std::vector<CharSet> sets_;
};

std::vector<int32_t> closure(const Nfa& nfa, std::vector<int32_t> seed, bool bol, bool eol) {
  std::vector<char> seen(nfa.out().size(), 0);
  std::vector<int32_t> stack;
  for (int32_t s : seed) {
    if (!seen[static_cast<size_t>(s)]) {
      seen[static_cast<size_t>(s)] = 1;
      stack.push_back(s);
    }
  }
  std::vector<int32_t> result;
  while (!stack.empty()) {
    int32_t s = stack.back();
    stack.pop_back();
    result.push_back(s);
    for (const Edge& e : nfa.out()[static_cast<size_t>(s)]) {
      bool follow = e.kind == Edge::Kind::kEps || (bol && e.kind == Edge::Kind::kBol) ||
                    (eol && e.kind == Edge::Kind::kEol);
      if (follow && !seen[static_cast<size_t>(e.to)]) {
        seen[static_cast<size_t>(e.to)] = 1;
        stack.push_back(e.to);
      }
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace

class DfaBuilder {
 public:
  static RegexDfa build(std::string_view pattern) {
    Node root = RegexParser(pattern).parse();
    Nfa nfa;
    CharSet any;
    any.set();
    int32_t any_set = nfa.add_set(any);
    int32_t pre = nfa.add_state();
    Fragment body = nfa.build(root);
    int32_t fin = nfa.add_state();
    // leading and trailing .* loops give substring-search semantics
    nfa.add_edge(pre, {Edge::Kind::kSet, any_set, pre});
    nfa.eps(pre, body.start);
    nfa.eps(body.end, fin);
    nfa.add_edge(fin, {Edge::Kind::kSet, any_set, fin});

    RegexDfa dfa;
    dfa.pattern_ = std::string(pattern);

    // byte equivalence classes: bytes with identical membership in every set
    std::map<std::vector<bool>, uint16_t> signature_to_class;
    std::vector<unsigned char> representative;
    for (int b = 0; b < 256; ++b) {
      std::vector<bool> sig;
      sig.reserve(nfa.sets().size());
      for (const CharSet& s : nfa.sets()) sig.push_back(s.test(static_cast<size_t>(b)));
      auto [it, inserted] = signature_to_class.emplace(sig, static_cast<uint16_t>(signature_to_class.size()));
      if (inserted) representative.push_back(static_cast<unsigned char>(b));
      dfa.byte_class_[static_cast<size_t>(b)] = it->second;
    }
    dfa.class_count_ = representative.size();

    using Key = std::pair<bool, std::vector<int32_t>>;
    std::map<Key, int32_t> index;
    std::vector<Key> keys;
    std::deque<int32_t> work;
    auto intern = [&](Key k) {
      auto it = index.find(k);
      if (it != index.end()) return it->second;
      auto id = static_cast<int32_t>(keys.size());
      if (keys.size() >= kMaxDfaStates)
        throw Error(ErrorCode::kUnsupported, "regex '" + std::string(pattern) + "' is too complex to determinize");
      index.emplace(k, id);
      keys.push_back(std::move(k));
      work.push_back(id);
      return id;
    };
    dfa.start_ = intern({true, closure(nfa, {pre}, true, false)});
    while (!work.empty()) {
      int32_t id = work.front();
      work.pop_front();
      const std::vector<int32_t> states = keys[static_cast<size_t>(id)].second;
      std::vector<int32_t> row(dfa.class_count_);
      for (size_t c = 0; c < dfa.class_count_; ++c) {
        unsigned char rep = representative[c];
        std::vector<int32_t> moved;
        for (int32_t s : states)
          for (const Edge& e : nfa.out()[static_cast<size_t>(s)])
            if (e.kind == Edge::Kind::kSet && nfa.sets()[static_cast<size_t>(e.set)].test(rep)) moved.push_back(e.to);
        row[c] = intern({false, closure(nfa, std::move(moved), false, false)});
      }
      if (dfa.table_.size() < (static_cast<size_t>(id) + 1) * dfa.class_count_)
        dfa.table_.resize((static_cast<size_t>(id) + 1) * dfa.class_count_);
      std::copy(row.begin(), row.end(), dfa.table_.begin() + static_cast<std::ptrdiff_t>(id * dfa.class_count_));
    }
    dfa.table_.resize(keys.size() * dfa.class_count_);
    dfa.accept_.resize(keys.size());
    for (size_t i = 0; i < keys.size(); ++i) {
      auto full = closure(nfa, keys[i].second, keys[i].first, true);
      dfa.accept_[i] = std::binary_search(full.begin(), full.end(), fin);
    }
    dfa.finalize();
    return dfa.minimized();
  }
};

RegexDfa RegexDfa::compile(std::string_view pattern) { return DfaBuilder::build(pattern); }

void RegexDfa::finalize() {
  size_t n = accept_.size();
  std::vector<std::vector<int32_t>> reverse(n);
  for (size_t s = 0; s < n; ++s)
    for (size_t c = 0; c < class_count_; ++c) reverse[static_cast<size_t>(table_[s * class_count_ + c])].push_back(static_cast<int32_t>(s));
  live_.assign(n, false);
  std::deque<int32_t> q;
  for (size_t s = 0; s < n; ++s)
    if (accept_[s]) {
      live_[s] = true;
      q.push_back(static_cast<int32_t>(s));
    }
  while (!q.empty()) {
    int32_t s = q.front();
    q.pop_front();
    for (int32_t p : reverse[static_cast<size_t>(s)])
      if (!live_[static_cast<size_t>(p)]) {
        live_[static_cast<size_t>(p)] = true;
        q.push_back(p);
      }
  }
}

RegexDfa RegexDfa::minimized() const {
  size_t n = accept_.size();
  std::vector<int32_t> block(n);
  for (size_t s = 0; s < n; ++s) block[s] = accept_[s] ? 1 : 0;
  size_t count = 0;
  while (true) {
    std::map<std::vector<int32_t>, int32_t> sig_to_block;
    std::vector<int32_t> next(n);
    for (size_t s = 0; s < n; ++s) {
      std::vector<int32_t> sig;
      sig.reserve(class_count_ + 1);
      sig.push_back(block[s]);
      for (size_t c = 0; c < class_count_; ++c) sig.push_back(block[static_cast<size_t>(table_[s * class_count_ + c])]);
      auto it = sig_to_block.emplace(std::move(sig), static_cast<int32_t>(sig_to_block.size())).first;
      next[s] = it->second;
    }
    size_t new_count = sig_to_block.size();
    block = std::move(next);
    if (new_count == count) break;
    count = new_count;
  }

  // canonical numbering: BFS from the start block in class order
  std::vector<int32_t> repr(count, -1);
  for (size_t s = 0; s < n; ++s)
    if (repr[static_cast<size_t>(block[s])] < 0) repr[static_cast<size_t>(block[s])] = static_cast<int32_t>(s);
  std::vector<int32_t> order(count, -1);
  std::vector<int32_t> queue;
  order[static_cast<size_t>(block[static_cast<size_t>(start_)])] = 0;
  queue.push_back(block[static_cast<size_t>(start_)]);
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int32_t b = queue[qi];
    auto s = static_cast<size_t>(repr[static_cast<size_t>(b)]);
    for (size_t c = 0; c < class_count_; ++c) {
      int32_t t = block[static_cast<size_t>(table_[s * class_count_ + c])];
      if (order[static_cast<size_t>(t)] < 0) {
        order[static_cast<size_t>(t)] = static_cast<int32_t>(queue.size());
        queue.push_back(t);
      }
    }
  }

  RegexDfa out;
  out.pattern_ = pattern_;
  out.byte_class_ = byte_class_;
  out.class_count_ = class_count_;
  out.start_ = 0;
  size_t m = queue.size();
  out.table_.assign(m * class_count_, 0);
  out.accept_.assign(m, false);
  for (size_t i = 0; i < m; ++i) {
    auto s = static_cast<size_t>(repr[static_cast<size_t>(queue[i])]);
    out.accept_[i] = accept_[s];
    for (size_t c = 0; c < class_count_; ++c)
      out.table_[i * class_count_ + c] = order[static_cast<size_t>(block[static_cast<size_t>(table_[s * class_count_ + c])])];
  }
  out.finalize();
  return out;
}

StateId RegexDfa::step(StateId state, unsigned char symbol) const {
  if (state < 0) return kReject;
  int32_t t = next(static_cast<int32_t>(state), symbol);
  return live_[static_cast<size_t>(t)] ? t : kReject;
}

bool RegexDfa::matches(std::string_view text) const {
  int32_t s = start_;
  for (char c : text) s = next(s, static_cast<unsigned char>(c));
  return accept_[static_cast<size_t>(s)];
}

bool intersection_empty(const RegexDfa& a, const RegexDfa& b, std::string* witness) {
  // representative bytes for every distinct (class_a, class_b) combination
  std::map<std::pair<int32_t, int32_t>, unsigned char> combos;
  for (int byte = 0; byte < 256; ++byte) {
    auto c = static_cast<unsigned char>(byte);
    combos.emplace(std::make_pair(static_cast<int32_t>(a.byte_class(c)), static_cast<int32_t>(b.byte_class(c))), c);
  }
  std::vector<unsigned char> reps;
  for (const auto& [k, c] : combos) reps.push_back(c);
  std::sort(reps.begin(), reps.end());

  struct Visit {
    int64_t parent;
    unsigned char via;
  };
  const auto stride = static_cast<int64_t>(b.state_count());
  std::map<int64_t, Visit> seen;
  std::deque<int64_t> q;
  int64_t start = static_cast<int64_t>(a.start()) * stride + b.start();
  seen.emplace(start, Visit{-1, 0});
  q.push_back(start);
  while (!q.empty()) {
    int64_t cur = q.front();
    q.pop_front();
    auto sa = static_cast<int32_t>(cur / stride);
    auto sb = static_cast<int32_t>(cur % stride);
    if (a.accepting(sa) && b.accepting(sb)) {
      if (witness) {
        std::string w;
        for (int64_t at = cur; seen.at(at).parent >= 0; at = seen.at(at).parent) w.push_back(static_cast<char>(seen.at(at).via));
        std::reverse(w.begin(), w.end());
        *witness = std::move(w);
      }
      return false;
    }
    for (unsigned char c : reps) {
      int32_t ta = a.next(sa, c);
      int32_t tb = b.next(sb, c);
      if (!a.live(ta) || !b.live(tb)) continue;
      int64_t key = static_cast<int64_t>(ta) * stride + tb;
      if (seen.emplace(key, Visit{cur, c}).second) q.push_back(key);
    }
  }
  return true;
}

std::string regex_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace sicql::automata
