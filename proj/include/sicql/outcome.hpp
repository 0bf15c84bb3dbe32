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

#include <string>

namespace sicql {

struct CheckOutcome {
  bool pass = true;
  /// Deterministic mechanisms always report 1.
  double confidence = 1.0;
  /// Reason for a violation; empty on pass.
  std::string feedback;
  /// "deterministic:<kind>" or "model:<judge>".
  std::string mechanism;
  /// Cost units spent by judge calls.
  double cost = 0.0;

  static CheckOutcome ok(std::string mechanism, double confidence = 1.0) {
    return {true, confidence, "", std::move(mechanism), 0.0};
  }
  static CheckOutcome violation(std::string mechanism, std::string feedback, double confidence = 1.0) {
    return {false, confidence, std::move(feedback), std::move(mechanism), 0.0};
  }
};

}  // namespace sicql
