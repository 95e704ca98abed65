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

// Random inputs for property tests. Every generator is a pure function of
// its seed.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sprover/kernel/environment.h"

namespace sprover::testing {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi);
bool coin(Rng& rng, double p = 0.5);

// Free atoms P, Q, R, S only.
kernel::Formula random_formula(Rng& rng, int depth);

// Concrete syntax accepted by the parser.
std::string surface(const kernel::Formula& f);

struct GenTheorem {
  std::string name;
  std::string statement_text;
  // Tactic sentences, "Proof." first.
  std::vector<std::string> steps;
};

// A document item: a global command, a query or a theorem.
struct GenItem {
  enum class Kind { Global, Query, Theorem };
  Kind kind = Kind::Global;
  std::string text;  // Global and Query
  GenTheorem theorem;
};

struct GenDocument {
  std::vector<GenItem> items;
  std::string text() const;
  std::size_t theorem_count() const;
};

struct DocOptions {
  int min_items = 4;
  int max_items = 14;
  bool queries = true;
  bool hints = true;
  bool par = true;
};

// Error-free by construction: definitions, axioms, hints, queries and
// theorems from a fixed set of provable templates.
GenDocument generate_document(std::uint64_t seed, const DocOptions& options = {});

// A fault placed in one theorem's proof.
struct Fault {
  std::size_t item = 0;
  // Position of the faulty step within the theorem's steps, after
  // injection; the truncation fault points at the last remaining step.
  std::size_t step = 0;
  std::string kind;
};

// Injects 1..3 faults into distinct theorems. Each fault makes the proof
// fail at a step of that proof.
std::vector<Fault> inject_faults(GenDocument& doc, std::uint64_t seed);

// Entries for kernel property tests. Proof payloads may or may not check.
struct GenEntry {
  enum class Kind { Definition, Axiom, Opaque };
  Kind kind = Kind::Axiom;
  std::string name;
  std::vector<std::string> params;
  kernel::Formula formula;  // body or statement
  // Opaque payload: a term, or a failure when `fails` is set.
  kernel::Term proof;
  bool fails = false;
  // Payload handed out through a forcer instead of a finished promise.
  bool delegated = false;
};

// `size` entries, each one admissible after its predecessors.
std::vector<GenEntry> generate_entries(std::uint64_t seed, int size);

// Adds an entry through the admission functions.
kernel::Environment admit(const kernel::Environment& env, const GenEntry& e);

// A proof of `f` built forwards, with its formula. Uses names already in
// `env` that prove something.
struct Proved {
  kernel::Term term;
  kernel::Formula formula;
};
Proved random_proof(Rng& rng, const kernel::Environment& env, int depth);

}  // namespace sprover::testing
