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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sprover::kernel {

// Propositional formulas. Immutable, cheap to copy (shared nodes).
//
// Negation does not exist at this level: the surface "~ F" is parsed as
// Impl(F, False).
class Formula {
 public:
  enum class Kind : std::uint8_t { Atom, True, False, Impl, And, Or, DefApp };

  // True.
  Formula();

  static Formula atom(std::string name);
  static Formula truth();
  static Formula falsity();
  static Formula impl(Formula premise, Formula conclusion);
  static Formula conj(Formula left, Formula right);
  static Formula disj(Formula left, Formula right);
  static Formula def_app(std::string name, std::vector<Formula> args);

  Kind kind() const;
  bool is(Kind k) const { return kind() == k; }

  // Atom and DefApp only.
  const std::string& name() const;
  // Impl, And, Or only.
  const Formula& lhs() const;
  const Formula& rhs() const;
  // DefApp arguments; empty for every other kind.
  const std::vector<Formula>& args() const;

  bool same_node(const Formula& other) const { return node_ == other.node_; }

  friend bool operator==(const Formula& a, const Formula& b);
  friend bool operator!=(const Formula& a, const Formula& b) { return !(a == b); }

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Proof terms of intuitionistic natural deduction. Inl/Inr carry the type of
// the *other* disjunct and Exfalso its target, so that every term has a
// unique inferable type.
//
// Hole is a metavariable used by the tactic engine for unfinished proofs; the
// kernel rejects any term that still contains one.
class Term {
 public:
  enum class Kind : std::uint8_t {
    Var, Lam, App, Pair, Fst, Snd, Inl, Inr, Case, TT, Exfalso, Hole
  };

  // TT.
  Term();

  static Term var(std::string name);
  static Term lam(std::string binder, Formula type, Term body);
  static Term app(Term fn, Term arg);
  static Term pair(Term left, Term right);
  static Term fst(Term t);
  static Term snd(Term t);
  static Term inl(Term t, Formula right_type);
  static Term inr(Term t, Formula left_type);
  static Term case_of(Term scrutinee, std::string left_binder, Term left_branch,
                      std::string right_binder, Term right_branch);
  static Term tt();
  static Term exfalso(Term t, Formula target);
  static Term hole(std::uint32_t id);

  Kind kind() const;
  bool is(Kind k) const { return kind() == k; }

  // Var name, Lam binder, Case left binder.
  const std::string& name() const;
  // Case right binder.
  const std::string& name2() const;
  // Lam domain, Inl/Inr other-side annotation, Exfalso target.
  const Formula& annotation() const;
  const std::vector<Term>& children() const;
  const Term& child(std::size_t i) const { return children().at(i); }
  std::uint32_t hole_id() const;

  bool has_holes() const;
  std::size_t size() const;

  friend bool operator==(const Term& a, const Term& b);
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }

 private:
  struct Node;
  explicit Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Replaces every Hole(id) in `t` by `filler`.
Term fill_hole(const Term& t, std::uint32_t id, const Term& filler);

// Surface rendering: "False \/ (False -> False)". Impl(F, False) is printed
// as an implication, never as "~".
std::string to_string(const Formula& f);
std::string to_string(const Term& t);

// Every global name mentioned by `f` (DefApp heads and atoms), in order of
// first occurrence.
std::vector<std::string> mentioned_names(const Formula& f);

}  // namespace sprover::kernel
