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

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace sicql {

inline constexpr size_t kEmbeddingDims = 256;
using Embedding = std::array<double, kEmbeddingDims>;

/// Lowercased alphanumeric tokens.
std::vector<std::string> word_tokens(std::string_view text);

/// Token counts hashed (FNV-1a) into 256 buckets, L2-normalized. All zeros
/// for text without tokens.
Embedding embed(std::string_view text);

double cosine(const Embedding& a, const Embedding& b);

}  // namespace sicql
