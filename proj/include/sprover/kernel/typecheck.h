// Copyright 2026 The sprover Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sprover/kernel/environment.h"

namespace sprover::kernel {

class TypeError : public KernelError {
 public:
  using KernelError::KernelError;
};

using Hypothesis = std::pair<std::string, Formula>;
using Context = std::vector<Hypothesis>;

// Complete delta-expansion: every DefApp is replaced by its definition body
// with parameters substituted. Definitions are non-recursive, so this
// terminates.
Formula unfold_all(const Environment& env, const Formula& f);

// Unfolds only the listed definitions, everywhere in `f`. Unknown names are
// ignored.
Formula unfold_named(const Environment& env, const Formula& f,
                     const std::vector<std::string>& names);

// If the head of `f` is a DefApp, expands it until the head is a connective
// or an atom.
Formula unfold_head(const Environment& env, const Formula& f);

// Equality modulo definition unfolding.
bool convertible(const Environment& env, const Formula& a, const Formula& b);

// Computes the type of a closed (relative to `ctx`) proof term. Opaque
// entries are usable as names of proofs of their statement; their proofs are
// never inspected. Throws TypeError.
Formula infer(const Environment& env, const Context& ctx, const Term& term);

// Checks `term` against `expected`. Throws TypeError.
void typecheck(const Environment& env, const Context& ctx, const Term& term,
               const Formula& expected);

bool well_typed(const Environment& env, const Context& ctx, const Term& term,
                const Formula& expected);

struct SwfFailure {
  std::string name;
  std::string error;
  friend bool operator==(const SwfFailure&, const SwfFailure&) = default;
};

enum class SwfScope { All, LocalOnly };

// Synchronous well-foundedness: forces every delegated promise, then checks
// each opaque term against its statement in the environment preceding the
// entry. Failures are collected, not short-circuited; an empty result means
// the environment is SWF. With LocalOnly, entries loaded from other modules
// are skipped (their own compilation certified them).
std::vector<SwfFailure> check_swf(const Environment& env, SwfScope scope = SwfScope::All);

}  // namespace sprover::kernel
