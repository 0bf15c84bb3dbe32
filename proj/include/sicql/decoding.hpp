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

// Proactive enforcement helpers: token masks over character automata and a
// per-segment stream guard.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sicql/automaton.hpp"
#include "sicql/outcome.hpp"

namespace sicql::automata {

/// Decoding position inside a mask automaton.
class MaskState {
 public:
  explicit MaskState(std::shared_ptr<const CharAutomaton> automaton);

  /// Emits `token` when every character transitions; false leaves the
  /// state untouched.
  bool try_emit(std::string_view token);
  bool allowed(std::string_view token) const;
  bool accepting() const { return automaton_->accepting(state_); }

  /// Records the current (state, length) so backtrack() can restore it.
  void checkpoint();
  /// Restores the latest checkpoint, or the start when none is left. False
  /// when already at the start with no checkpoint.
  bool backtrack();
  /// Removes the last emitted token.
  bool pop_token();

  const std::string& prefix() const { return prefix_; }
  StateId state() const { return state_; }
  const CharAutomaton& automaton() const { return *automaton_; }

 private:
  std::shared_ptr<const CharAutomaton> automaton_;
  StateId state_;
  std::string prefix_;
  std::vector<std::pair<StateId, size_t>> checkpoints_;
  std::vector<std::pair<StateId, size_t>> token_marks_;
};

/// Sentence segmentation: a terminator followed by whitespace ends a
/// segment, and the segment includes that whitespace character.
struct Segmenter {
  std::string terminators = ".!?";

  /// Length of the first complete segment in `text`, or 0.
  size_t first_boundary(std::string_view text) const;
  std::vector<std::string> split(std::string_view text) const;
};

enum class GuardPolicy { kBacktrack, kFail };

/// Runs a checker over the accumulated output at each segment boundary.
class StreamGuard {
 public:
  using Checker = std::function<CheckOutcome(const std::string& output)>;

  StreamGuard(Segmenter segmenter, Checker checker, GuardPolicy policy);

  /// Appends a token. Returns false once the guard has failed (fail policy);
  /// the caller should stop decoding.
  bool feed(std::string_view token);
  /// Checks the trailing partial segment and then the whole retained output.
  CheckOutcome finish();

  /// Retained output, without the trailing unchecked segment.
  const std::string& committed() const { return committed_; }
  std::string output() const { return committed_ + pending_; }
  int backtracks() const { return backtracks_; }
  int checks() const { return checks_; }
  bool failed() const { return failed_; }
  const CheckOutcome& last_violation() const { return last_violation_; }
  double cost() const { return cost_; }

 private:
  bool consume_segment(const std::string& segment);

  Segmenter segmenter_;
  Checker checker_;
  GuardPolicy policy_;
  std::string committed_;
  std::string pending_;
  int backtracks_ = 0;
  int checks_ = 0;
  bool failed_ = false;
  CheckOutcome last_violation_;
  double cost_ = 0.0;
  std::string mechanism_;
};

}  // namespace sicql::automata
