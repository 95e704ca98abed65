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

#include <atomic>
#include <cstdint>
#include <deque>
#include <iterator>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sprover/kernel/syntax.h"

namespace sprover::kernel {

class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Why a proof promise could not produce a term.
struct PromiseFailure {
  std::string message;
  // Span of the command that failed, when known.
  std::optional<std::int64_t> span_id;
  bool cancelled = false;
  // The failure came from the delivery machinery (dead worker, lost key),
  // not from the proof itself.
  bool infrastructure = false;

  friend bool operator==(const PromiseFailure&, const PromiseFailure&) = default;
};

using PromiseResult = std::variant<Term, PromiseFailure>;

// A placeholder for the proof term of an opaque theorem.
//
// Copies share one cell. The status moves Delegated -> Finished or
// Delegated -> Failed exactly once; later resolutions are ignored, so forcing
// or resolving twice is harmless.
class ProofPromise {
 public:
  enum class Status : std::uint8_t { Delegated, Finished, Failed };

  // The computation handle of a delegated promise. Empty when the promise
  // crossed a process boundary: the handle does not survive serialization.
  using Forcer = std::function<PromiseResult()>;

  static ProofPromise delegated(Formula statement, std::uint64_t base_state,
                                std::uint64_t handle_key, Forcer forcer);
  static ProofPromise finished(Formula statement, std::uint64_t base_state, Term term);
  static ProofPromise failed(Formula statement, std::uint64_t base_state,
                             PromiseFailure failure);

  Status status() const;
  const Formula& statement() const;
  std::uint64_t base_state() const;
  std::uint64_t handle_key() const;
  bool has_forcer() const;

  // Runs the computation at most once and memoizes the outcome. Concurrent
  // callers wait for the first one. A promise without a forcer reports an
  // infrastructure failure and stays Delegated.
  PromiseResult force() const;

  // Resolution from outside (e.g. a worker response). Returns false when the
  // promise was already terminal.
  bool resolve(Term term) const;
  bool fail(PromiseFailure failure) const;

  // Access to a finished term. Counted, so tests can assert that some code
  // path never reads opaque bodies.
  std::optional<Term> term() const;
  std::optional<PromiseFailure> failure() const;

  bool same_cell(const ProofPromise& other) const { return cell_ == other.cell_; }

  static std::uint64_t term_accesses();
  static void reset_term_accesses();

 private:
  struct Cell;
  explicit ProofPromise(std::shared_ptr<Cell> cell) : cell_(std::move(cell)) {}
  std::shared_ptr<Cell> cell_;
};

// The rebindable reference an opaque entry holds. Every environment that
// contains the entry shares the slot, so replacing the proof of an unchanged
// statement is visible everywhere without re-executing later commands.
class PromiseSlot {
 public:
  explicit PromiseSlot(ProofPromise promise) : current_(std::move(promise)) {}

  ProofPromise get() const;
  void rebind(ProofPromise promise);

 private:
  mutable std::mutex mu_;
  ProofPromise current_;
};

struct Definition {
  std::string name;
  std::vector<std::string> params;
  Formula body;
};

struct Axiom {
  std::string name;
  Formula statement;
};

struct Opaque {
  std::string name;
  Formula statement;
  std::shared_ptr<PromiseSlot> promise;
};

class EnvEntry {
 public:
  using Item = std::variant<Definition, Axiom, Opaque>;

  EnvEntry(Item item, std::string origin = {}) : item_(std::move(item)), origin_(std::move(origin)) {}

  const Item& item() const { return item_; }
  const std::string& name() const;
  // Module the entry was loaded from; empty for entries of the current
  // document.
  const std::string& origin() const { return origin_; }

  const Definition* as_definition() const { return std::get_if<Definition>(&item_); }
  const Axiom* as_axiom() const { return std::get_if<Axiom>(&item_); }
  const Opaque* as_opaque() const { return std::get_if<Opaque>(&item_); }

  // The proposition a proof named by this entry proves. Definitions are
  // propositions, not proofs, and have none.
  const Formula* proves() const;

 private:
  Item item_;
  std::string origin_;
};

// Ordered logical environment with unique names. Value semantics: every
// mutating operation returns a new environment.
//
// Versions along one line of appends share storage, so appending and taking
// prefixes are O(1) amortized. A version sees only its first size() entries;
// appending to a version that is not the longest of its storage copies it.
class Environment {
 public:
  class Iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = EnvEntry;
    using difference_type = std::ptrdiff_t;
    using pointer = const EnvEntry*;
    using reference = const EnvEntry&;

    Iterator(const Environment* env, std::size_t i) : env_(env), i_(i) {}
    reference operator*() const { return env_->at(i_); }
    pointer operator->() const { return &env_->at(i_); }
    Iterator& operator++() {
      ++i_;
      return *this;
    }
    Iterator operator++(int) {
      Iterator t = *this;
      ++i_;
      return t;
    }
    friend bool operator==(const Iterator& a, const Iterator& b) { return a.i_ == b.i_; }

   private:
    const Environment* env_;
    std::size_t i_;
  };

  struct Entries {
    const Environment* env;
    Iterator begin() const { return Iterator(env, 0); }
    Iterator end() const { return Iterator(env, env->size()); }
  };

  Environment() = default;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  // The range points into this environment, so it must outlive the loop.
  Entries entries() const& { return Entries{this}; }
  Entries entries() const&& = delete;
  // Throws std::out_of_range.
  const EnvEntry& at(std::size_t i) const;

  const EnvEntry* find(const std::string& name) const;
  const Definition* find_definition(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }

  // The environment made of the first `n` entries.
  Environment prefix(std::size_t n) const;

  // Appends without any well-formedness check. Used when loading compiled
  // files, whose content was checked when they were produced.
  Environment appended_unchecked(EnvEntry entry) const;

 private:
  struct Store;
  Environment(std::shared_ptr<Store> store, std::size_t size) : store_(std::move(store)), size_(size) {}

  std::shared_ptr<Store> store_;
  std::size_t size_ = 0;
};

// Throws KernelError when `f` mentions an unknown definition or applies one
// to the wrong number of arguments. Atoms are free propositional variables.
void check_formula(const Environment& env, const Formula& f);

Environment env_add_definition(const Environment& env, const std::string& name,
                               std::vector<std::string> params, const Formula& body,
                               const std::string& origin = {});
Environment env_add_axiom(const Environment& env, const std::string& name,
                          const Formula& statement, const std::string& origin = {});
Environment env_add_opaque(const Environment& env, const std::string& name,
                           const Formula& statement, const ProofPromise& promise,
                           const std::string& origin = {});

}  // namespace sprover::kernel
