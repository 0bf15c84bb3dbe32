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

#include "sicql/decoding.hpp"

#include <cctype>

#include "sicql/error.hpp"

namespace sicql::automata {

MaskState::MaskState(std::shared_ptr<const CharAutomaton> automaton)
    : automaton_(std::move(automaton)), state_(automaton_->start()) {
  if (state_ == kReject) throw Error(ErrorCode::kInvalidArgument, "mask automaton accepts nothing");
}

bool MaskState::allowed(std::string_view token) const {
  return !token.empty() && automaton_->walk(state_, token) != kReject;
}

bool MaskState::try_emit(std::string_view token) {
  if (token.empty()) return false;
  StateId next = automaton_->walk(state_, token);
  if (next == kReject) return false;
  token_marks_.emplace_back(state_, prefix_.size());
  state_ = next;
  prefix_.append(token);
  return true;
}

void MaskState::checkpoint() { checkpoints_.emplace_back(state_, prefix_.size()); }

bool MaskState::backtrack() {
  std::pair<StateId, size_t> target{automaton_->start(), 0};
  if (!checkpoints_.empty()) {
    target = checkpoints_.back();
    checkpoints_.pop_back();
  } else if (prefix_.empty()) {
    return false;
  }
  state_ = target.first;
  prefix_.resize(target.second);
  while (!token_marks_.empty() && token_marks_.back().second >= target.second) token_marks_.pop_back();
  return true;
}

bool MaskState::pop_token() {
  if (token_marks_.empty()) return false;
  auto [state, length] = token_marks_.back();
  token_marks_.pop_back();
  state_ = state;
  prefix_.resize(length);
  while (!checkpoints_.empty() && checkpoints_.back().second > length) checkpoints_.pop_back();
  return true;
}

size_t Segmenter::first_boundary(std::string_view text) const {
  for (size_t i = 0; i + 1 < text.size(); ++i) {
    if (terminators.find(text[i]) == std::string::npos) continue;
    if (std::isspace(static_cast<unsigned char>(text[i + 1]))) return i + 2;
  }
  return 0;
}

std::vector<std::string> Segmenter::split(std::string_view text) const {
  std::vector<std::string> out;
  while (!text.empty()) {
    size_t n = first_boundary(text);
    if (n == 0) n = text.size();
    out.emplace_back(text.substr(0, n));
    text.remove_prefix(n);
  }
  return out;
}

StreamGuard::StreamGuard(Segmenter segmenter, Checker checker, GuardPolicy policy)
    : segmenter_(std::move(segmenter)), checker_(std::move(checker)), policy_(policy) {}

bool StreamGuard::consume_segment(const std::string& segment) {
  ++checks_;
  CheckOutcome out = checker_(committed_ + segment);
  cost_ += out.cost;
  mechanism_ = out.mechanism;
  if (out.pass) {
    committed_ += segment;
    return true;
  }
  last_violation_ = out;
  if (policy_ == GuardPolicy::kBacktrack) {
    ++backtracks_;
    return true;
  }
  failed_ = true;
  return false;
}

bool StreamGuard::feed(std::string_view token) {
  if (failed_) return false;
  pending_.append(token);
  while (size_t n = segmenter_.first_boundary(pending_)) {
    std::string segment = pending_.substr(0, n);
    pending_.erase(0, n);
    if (!consume_segment(segment)) {
      pending_.clear();
      return false;
    }
  }
  return true;
}

CheckOutcome StreamGuard::finish() {
  if (!failed_ && !pending_.empty()) {
    std::string segment = std::move(pending_);
    pending_.clear();
    consume_segment(segment);
  }
  if (failed_) {
    CheckOutcome out = last_violation_;
    out.cost = cost_;
    return out;
  }
  CheckOutcome out = CheckOutcome::ok(mechanism_);
  out.cost = cost_;
  return out;
}

}  // namespace sicql::automata
