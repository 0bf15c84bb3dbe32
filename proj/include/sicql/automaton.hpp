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

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sicql::automata {

using StateId = int64_t;
inline constexpr StateId kReject = -1;

/// Byte-level automaton used for token masking. Implementations are immutable
/// after construction and may be shared across threads.
class CharAutomaton {
 public:
  virtual ~CharAutomaton() = default;

  virtual StateId start() const = 0;
  /// Follows the transition on `symbol`; kReject when it is absent or leads
  /// to a state from which no accepting state is reachable.
  virtual StateId step(StateId state, unsigned char symbol) const = 0;
  virtual bool accepting(StateId state) const = 0;
  virtual size_t state_count() const = 0;

  StateId walk(StateId state, std::string_view text) const;
  bool accepts(std::string_view text) const;
};

/// Token ids whose full expansion walks from `state` without rejection.
/// Empty expansions are never allowed.
std::vector<int> allowed_tokens(const CharAutomaton& automaton, StateId state,
                                const std::vector<std::string>& vocabulary);

/// Intersection of two automata (both must accept).
class ProductAutomaton final : public CharAutomaton {
 public:
  ProductAutomaton(std::shared_ptr<const CharAutomaton> left, std::shared_ptr<const CharAutomaton> right);

  StateId start() const override;
  StateId step(StateId state, unsigned char symbol) const override;
  bool accepting(StateId state) const override;
  size_t state_count() const override;

 private:
  StateId encode(StateId l, StateId r) const { return l * stride_ + r; }

  std::shared_ptr<const CharAutomaton> left_;
  std::shared_ptr<const CharAutomaton> right_;
  StateId stride_;
};

/// Online suffix automaton; recognizes exactly the substrings of its text.
class SuffixAutomaton final : public CharAutomaton {
 public:
  struct Transition {
    unsigned char symbol;
    int32_t target;
  };
  struct State {
    int32_t length = 0;
    int32_t link = -1;
    std::vector<Transition> next;  // sorted by symbol
  };

  explicit SuffixAutomaton(std::string_view text);

  StateId start() const override { return 0; }
  StateId step(StateId state, unsigned char symbol) const override;
  bool accepting(StateId state) const override { return state >= 0; }
  size_t state_count() const override { return states_.size(); }

  size_t source_length() const { return source_length_; }
  bool contains(std::string_view needle) const { return accepts(needle); }
  const std::vector<State>& states() const { return states_; }

 private:
  int32_t find(int32_t state, unsigned char symbol) const;
  void set(int32_t state, unsigned char symbol, int32_t target);
  void extend(unsigned char symbol);

  std::vector<State> states_;
  int32_t last_ = 0;
  size_t source_length_ = 0;
};

/// Total DFA over bytes whose language is the set of strings in which the
/// source regex finds a match (ECMAScript `regex_search` semantics).
class RegexDfa final : public CharAutomaton {
 public:
  /// Supported: literals, escapes (\d \w \s and negations, \n \t \r \f \v \0
  /// \xHH, escaped punctuation), classes, ., * + ? {n} {n,} {n,m}, |, groups
  /// (capturing and `(?:`), ^ and $. Backreferences, lookaround and word
  /// boundaries raise ErrorCode::kUnsupported; malformed patterns kParse.
  static RegexDfa compile(std::string_view pattern);

  StateId start() const override { return start_; }
  StateId step(StateId state, unsigned char symbol) const override;
  bool accepting(StateId state) const override { return accept_[static_cast<size_t>(state)]; }
  size_t state_count() const override { return accept_.size(); }

  /// Raw transition, including moves into the dead state.
  int32_t next(int32_t state, unsigned char symbol) const {
    return table_[static_cast<size_t>(state) * class_count_ + byte_class_[symbol]];
  }
  uint16_t byte_class(unsigned char symbol) const { return byte_class_[symbol]; }
  bool live(int32_t state) const { return live_[static_cast<size_t>(state)]; }
  bool matches(std::string_view text) const;
  const std::string& pattern() const { return pattern_; }

  /// Moore partition refinement followed by canonical BFS renumbering.
  RegexDfa minimized() const;

 private:
  friend class DfaBuilder;
  void finalize();

  std::string pattern_;
  std::vector<uint16_t> byte_class_ = std::vector<uint16_t>(256, 0);
  size_t class_count_ = 1;
  std::vector<int32_t> table_;
  std::vector<bool> accept_;
  std::vector<bool> live_;
  int32_t start_ = 0;
};

/// Product-DFA emptiness: true when no string is accepted by both. When the
/// intersection is non-empty and `witness` is given, stores a shortest member.
bool intersection_empty(const RegexDfa& a, const RegexDfa& b, std::string* witness = nullptr);

/// Escapes regex metacharacters so `text` matches literally.
std::string regex_escape(std::string_view text);

}  // namespace sicql::automata
