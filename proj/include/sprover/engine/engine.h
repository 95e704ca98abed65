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

// The tactic engine. Nothing here is trusted: every term it produces is
// re-checked by the kernel when the proof is closed.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprover/cancel.h"
#include "sprover/kernel/typecheck.h"

namespace sprover::engine {

using kernel::Context;
using kernel::Environment;
using kernel::Formula;
using kernel::Term;

class TacticError : public std::runtime_error {
 public:
  explicit TacticError(const std::string& what, bool cancelled = false)
      : std::runtime_error(what), cancelled_(cancelled) {}
  bool cancelled() const { return cancelled_; }

 private:
  bool cancelled_;
};

// "not" is accepted wherever a definition name is expected for unfolding; it
// has nothing to unfold because negation is already eliminated by the parser.
inline constexpr const char* kBuiltinNot = "not";

inline constexpr int kDefaultAutoDepth = 5;

struct Goal {
  Context hypotheses;
  Formula conclusion;
  // Index of the hole in the enclosing proof state's partial term.
  std::uint32_t hole = 0;

  friend bool operator==(const Goal&, const Goal&) = default;
};

struct HintDb {
  std::vector<std::string> resolve;
  std::vector<std::string> unfold;

  friend bool operator==(const HintDb&, const HintDb&) = default;
};

enum class HintKind : std::uint8_t { Resolve, Unfold };

// Adds hints after checking that every name exists: unfold hints must name
// definitions, resolve hints must name proofs. Duplicates are ignored.
HintDb add_hints(const Environment& env, HintDb db, HintKind kind,
                 const std::vector<std::string>& names);

struct TacticAst {
  enum class Kind : std::uint8_t {
    Intro, Intros, Apply, Exact, Split, Left, Right, Assumption, Unfold, Auto, Idtac, Fail,
    ProofMarker, Par
  };

  Kind kind = Kind::Idtac;
  // Intro (optional), Apply, Exact.
  std::optional<std::string> name;
  // Unfold.
  std::vector<std::string> names;
  // Auto.
  std::optional<int> depth;
  // Par payload.
  std::shared_ptr<const TacticAst> inner;

  static TacticAst simple(Kind k) { return TacticAst{k, std::nullopt, {}, std::nullopt, nullptr}; }
  static TacticAst named(Kind k, std::string n) { return TacticAst{k, std::move(n), {}, std::nullopt, nullptr}; }
  static TacticAst unfold(std::vector<std::string> ns) {
    return TacticAst{Kind::Unfold, std::nullopt, std::move(ns), std::nullopt, nullptr};
  }
  static TacticAst autom(std::optional<int> d = std::nullopt) {
    return TacticAst{Kind::Auto, std::nullopt, {}, d, nullptr};
  }
  static TacticAst par(TacticAst payload) {
    return TacticAst{Kind::Par, std::nullopt, {}, std::nullopt,
                     std::make_shared<const TacticAst>(std::move(payload))};
  }

  friend bool operator==(const TacticAst& a, const TacticAst& b);
};

std::string to_string(const TacticAst& t);

// Invariant: one goal per hole of `partial`, in the same order as the holes
// were opened; filling them all yields a proof of `statement`.
struct ProofState {
  Formula statement;
  std::vector<Goal> goals;
  Term partial;
  HintDb hints;
  std::uint32_t next_hole = 0;

  friend bool operator==(const ProofState&, const ProofState&) = default;
};

struct ParSubtask {
  Goal goal;
  TacticAst tactic;
};

// Runs par: subtasks, possibly elsewhere. Must return one closed witness per
// subtask, in order, or throw TacticError.
using ParRunner = std::function<std::vector<Term>(const Environment&, const HintDb&,
                                                  const std::vector<ParSubtask>&)>;

// Everything a tactic needs besides the proof state.
struct TacticContext {
  const ParRunner* par_runner = nullptr;
  const CancelSwitch* cancel = nullptr;
};

ProofState start_proof(const Environment& env, const Formula& statement, HintDb hints = {});

ProofState apply_tactic(const Environment& env, const ProofState& ps, const TacticAst& tactic,
                        const TacticContext& ctx = {});

// Depth-bounded backward search. Rules, in order: True, Assumption, Intro,
// Split, Left, Right, Apply (hypotheses in declaration order, then resolve
// hints). The goal is first rewritten with the unfold hints. Fresh names are
// h, h0, h1, ... Returns nullopt when no witness exists within `depth`.
std::optional<Term> auto_search(const Environment& env, const HintDb& hints, const Goal& goal,
                                int depth, const CancelSwitch* cancel = nullptr);

std::vector<ParSubtask> par_split(const Environment& env, const ProofState& ps,
                                  const TacticAst& tactic);

// Runs one par: subtask to completion: the tactic must close the goal.
Term run_par_subtask(const Environment& env, const HintDb& hints, const ParSubtask& task,
                     const CancelSwitch* cancel = nullptr);

// Fills every goal's hole with the corresponding witness.
ProofState join_par(const ProofState& ps, const std::vector<Term>& witnesses);

// The assembled proof term. Throws TacticError when goals remain open.
Term finish_proof(const ProofState& ps);

// First goal in full plus the goal count, plain text.
std::string render_goals(const ProofState& ps);

}  // namespace sprover::engine
