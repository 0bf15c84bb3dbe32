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

#include "sicql/automaton.hpp"

namespace sicql::automata {

StateId CharAutomaton::walk(StateId state, std::string_view text) const {
  for (char c : text) {
    if (state == kReject) return kReject;
    state = step(state, static_cast<unsigned char>(c));
  }
  return state;
}

bool CharAutomaton::accepts(std::string_view text) const {
  StateId s = walk(start(), text);
  return s != kReject && accepting(s);
}

std::vector<int> allowed_tokens(const CharAutomaton& automaton, StateId state,
                                const std::vector<std::string>& vocabulary) {
  std::vector<int> allowed;
  if (state == kReject) return allowed;
  for (size_t i = 0; i < vocabulary.size(); ++i) {
    const std::string& tok = vocabulary[i];
    if (tok.empty()) continue;
    if (automaton.walk(state, tok) != kReject) allowed.push_back(static_cast<int>(i));
  }
  return allowed;
}

ProductAutomaton::ProductAutomaton(std::shared_ptr<const CharAutomaton> left,
                                   std::shared_ptr<const CharAutomaton> right)
    : left_(std::move(left)), right_(std::move(right)), stride_(static_cast<StateId>(right_->state_count())) {}

StateId ProductAutomaton::start() const { return encode(left_->start(), right_->start()); }

StateId ProductAutomaton::step(StateId state, unsigned char symbol) const {
  if (state == kReject) return kReject;
  StateId l = left_->step(state / stride_, symbol);
  if (l == kReject) return kReject;
  StateId r = right_->step(state % stride_, symbol);
  if (r == kReject) return kReject;
  return encode(l, r);
}

bool ProductAutomaton::accepting(StateId state) const {
  return state != kReject && left_->accepting(state / stride_) && right_->accepting(state % stride_);
}

size_t ProductAutomaton::state_count() const { return left_->state_count() * right_->state_count(); }

// ---------------------------------------------------------------------------
// Suffix automaton

SuffixAutomaton::SuffixAutomaton(std::string_view text) : source_length_(text.size()) {
  states_.reserve(text.size() * 2 + 1);
  states_.push_back(State{});
  for (char c : text) extend(static_cast<unsigned char>(c));
}

int32_t SuffixAutomaton::find(int32_t state, unsigned char symbol) const {
  const auto& next = states_[static_cast<size_t>(state)].next;
  auto it = std::lower_bound(next.begin(), next.end(), symbol,
                             [](const Transition& t, unsigned char s) { return t.symbol < s; });
  if (it == next.end() || it->symbol != symbol) return -1;
  return it->target;
}

void SuffixAutomaton::set(int32_t state, unsigned char symbol, int32_t target) {
  auto& next = states_[static_cast<size_t>(state)].next;
  auto it = std::lower_bound(next.begin(), next.end(), symbol,
                             [](const Transition& t, unsigned char s) { return t.symbol < s; });
  if (it != next.end() && it->symbol == symbol)
    it->target = target;
  else
    next.insert(it, Transition{symbol, target});
}

void SuffixAutomaton::extend(unsigned char c) {
  auto cur = static_cast<int32_t>(states_.size());
  states_.push_back(State{states_[static_cast<size_t>(last_)].length + 1, -1, {}});
  int32_t p = last_;
  while (p != -1 && find(p, c) == -1) {
    set(p, c, cur);
    p = states_[static_cast<size_t>(p)].link;
  }
  if (p == -1) {
    states_[static_cast<size_t>(cur)].link = 0;
  } else {
    int32_t q = find(p, c);
    if (states_[static_cast<size_t>(p)].length + 1 == states_[static_cast<size_t>(q)].length) {
      states_[static_cast<size_t>(cur)].link = q;
    } else {
      auto clone = static_cast<int32_t>(states_.size());
      State copy = states_[static_cast<size_t>(q)];
      copy.length = states_[static_cast<size_t>(p)].length + 1;
      states_.push_back(std::move(copy));
      while (p != -1 && find(p, c) == q) {
        set(p, c, clone);
        p = states_[static_cast<size_t>(p)].link;
      }
      states_[static_cast<size_t>(q)].link = clone;
      states_[static_cast<size_t>(cur)].link = clone;
    }
  }
  last_ = cur;
}

StateId SuffixAutomaton::step(StateId state, unsigned char symbol) const {
  if (state < 0 || static_cast<size_t>(state) >= states_.size()) return kReject;
  int32_t t = find(static_cast<int32_t>(state), symbol);
  return t < 0 ? kReject : t;
}

}  // namespace sicql::automata
