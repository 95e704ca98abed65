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

#include "sprover/kernel/syntax.h"

#include <algorithm>
#include <stdexcept>

namespace sprover::kernel {

struct Formula::Node {
  Kind kind;
  std::string name;
  std::vector<Formula> children;
};

namespace {

const std::vector<Formula>& no_formulas() {
  static const std::vector<Formula> empty;
  return empty;
}

}  // namespace

Formula::Formula() : Formula(truth()) {}

Formula Formula::atom(std::string name) {
  return Formula(std::make_shared<const Node>(Node{Kind::Atom, std::move(name), {}}));
}

Formula Formula::truth() {
  static const Formula t(std::make_shared<const Node>(Node{Kind::True, {}, {}}));
  return t;
}

Formula Formula::falsity() {
  static const Formula f(std::make_shared<const Node>(Node{Kind::False, {}, {}}));
  return f;
}

Formula Formula::impl(Formula premise, Formula conclusion) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::Impl, {}, {std::move(premise), std::move(conclusion)}}));
}

Formula Formula::conj(Formula left, Formula right) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::And, {}, {std::move(left), std::move(right)}}));
}

Formula Formula::disj(Formula left, Formula right) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::Or, {}, {std::move(left), std::move(right)}}));
}

Formula Formula::def_app(std::string name, std::vector<Formula> args) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::DefApp, std::move(name), std::move(args)}));
}

Formula::Kind Formula::kind() const { return node_->kind; }

const std::string& Formula::name() const { return node_->name; }

const Formula& Formula::lhs() const {
  if (node_->kind != Kind::Impl && node_->kind != Kind::And && node_->kind != Kind::Or) {
    throw std::logic_error("Formula::lhs on non-binary formula");
  }
  return node_->children[0];
}

const Formula& Formula::rhs() const {
  if (node_->kind != Kind::Impl && node_->kind != Kind::And && node_->kind != Kind::Or) {
    throw std::logic_error("Formula::rhs on non-binary formula");
  }
  return node_->children[1];
}

const std::vector<Formula>& Formula::args() const {
  return node_->kind == Kind::DefApp ? node_->children : no_formulas();
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->kind != b.node_->kind || a.node_->name != b.node_->name) return false;
  return a.node_->children == b.node_->children;
}

struct Term::Node {
  Kind kind;
  std::string name;
  std::string name2;
  Formula annotation = Formula::truth();
  std::vector<Term> children;
  std::uint32_t hole = 0;
  bool has_holes = false;
  std::size_t size = 1;
};

namespace {

template <typename NodeT>
void summarize(NodeT& n) {
  for (const auto& c : n.children) {
    n.has_holes = n.has_holes || c.has_holes();
    n.size += c.size();
  }
}

}  // namespace

Term::Term() : Term(tt()) {}

Term Term::var(std::string name) {
  Node n{Kind::Var, std::move(name), {}, Formula::truth(), {}, 0};
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::lam(std::string binder, Formula type, Term body) {
  Node n{Kind::Lam, std::move(binder), {}, std::move(type), {std::move(body)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::app(Term fn, Term arg) {
  Node n{Kind::App, {}, {}, Formula::truth(), {std::move(fn), std::move(arg)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::pair(Term left, Term right) {
  Node n{Kind::Pair, {}, {}, Formula::truth(), {std::move(left), std::move(right)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::fst(Term t) {
  Node n{Kind::Fst, {}, {}, Formula::truth(), {std::move(t)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::snd(Term t) {
  Node n{Kind::Snd, {}, {}, Formula::truth(), {std::move(t)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::inl(Term t, Formula right_type) {
  Node n{Kind::Inl, {}, {}, std::move(right_type), {std::move(t)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::inr(Term t, Formula left_type) {
  Node n{Kind::Inr, {}, {}, std::move(left_type), {std::move(t)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::case_of(Term scrutinee, std::string left_binder, Term left_branch,
                   std::string right_binder, Term right_branch) {
  Node n{Kind::Case, std::move(left_binder), std::move(right_binder), Formula::truth(),
         {std::move(scrutinee), std::move(left_branch), std::move(right_branch)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::tt() {
  static const Term t(std::make_shared<const Node>(Node{Kind::TT, {}, {}, Formula::truth(), {}, 0}));
  return t;
}

Term Term::exfalso(Term t, Formula target) {
  Node n{Kind::Exfalso, {}, {}, std::move(target), {std::move(t)}, 0};
  summarize(n);
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term Term::hole(std::uint32_t id) {
  Node n{Kind::Hole, {}, {}, Formula::truth(), {}, id};
  n.has_holes = true;
  return Term(std::make_shared<const Node>(std::move(n)));
}

Term::Kind Term::kind() const { return node_->kind; }
const std::string& Term::name() const { return node_->name; }
const std::string& Term::name2() const { return node_->name2; }
const Formula& Term::annotation() const { return node_->annotation; }
const std::vector<Term>& Term::children() const { return node_->children; }
std::uint32_t Term::hole_id() const { return node_->hole; }
bool Term::has_holes() const { return node_->has_holes; }
std::size_t Term::size() const { return node_->size; }

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  return x.kind == y.kind && x.name == y.name && x.name2 == y.name2 && x.hole == y.hole &&
         x.annotation == y.annotation && x.children == y.children;
}

Term fill_hole(const Term& t, std::uint32_t id, const Term& filler) {
  if (!t.has_holes()) return t;
  switch (t.kind()) {
    case Term::Kind::Hole:
      return t.hole_id() == id ? filler : t;
    case Term::Kind::Lam:
      return Term::lam(t.name(), t.annotation(), fill_hole(t.child(0), id, filler));
    case Term::Kind::App:
      return Term::app(fill_hole(t.child(0), id, filler), fill_hole(t.child(1), id, filler));
    case Term::Kind::Pair:
      return Term::pair(fill_hole(t.child(0), id, filler), fill_hole(t.child(1), id, filler));
    case Term::Kind::Fst:
      return Term::fst(fill_hole(t.child(0), id, filler));
    case Term::Kind::Snd:
      return Term::snd(fill_hole(t.child(0), id, filler));
    case Term::Kind::Inl:
      return Term::inl(fill_hole(t.child(0), id, filler), t.annotation());
    case Term::Kind::Inr:
      return Term::inr(fill_hole(t.child(0), id, filler), t.annotation());
    case Term::Kind::Case:
      return Term::case_of(fill_hole(t.child(0), id, filler), t.name(),
                           fill_hole(t.child(1), id, filler), t.name2(),
                           fill_hole(t.child(2), id, filler));
    case Term::Kind::Exfalso:
      return Term::exfalso(fill_hole(t.child(0), id, filler), t.annotation());
    case Term::Kind::Var:
    case Term::Kind::TT:
      return t;
  }
  return t;
}

namespace {

// Binding strength, loosest first.
enum Prec { kImpl = 0, kOr = 1, kAnd = 2, kApp = 3, kAtom = 4 };

Prec prec_of(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Impl: return kImpl;
    case Formula::Kind::Or: return kOr;
    case Formula::Kind::And: return kAnd;
    case Formula::Kind::DefApp: return f.args().empty() ? kAtom : kApp;
    default: return kAtom;
  }
}

void print(const Formula& f, std::string& out);

void print_operand(const Formula& f, int min_prec, std::string& out) {
  if (prec_of(f) < min_prec) {
    out += '(';
    print(f, out);
    out += ')';
  } else {
    print(f, out);
  }
}

void print(const Formula& f, std::string& out) {
  switch (f.kind()) {
    case Formula::Kind::Atom: out += f.name(); return;
    case Formula::Kind::True: out += "True"; return;
    case Formula::Kind::False: out += "False"; return;
    case Formula::Kind::DefApp:
      out += f.name();
      for (const auto& a : f.args()) {
        out += ' ';
        print_operand(a, kAtom, out);
      }
      return;
    case Formula::Kind::Impl:
      // Right associative: the left operand needs to bind tighter.
      print_operand(f.lhs(), kOr, out);
      out += " -> ";
      print_operand(f.rhs(), kImpl, out);
      return;
    case Formula::Kind::Or:
      print_operand(f.lhs(), kAnd, out);
      out += " \\/ ";
      print_operand(f.rhs(), kOr, out);
      return;
    case Formula::Kind::And:
      print_operand(f.lhs(), kApp, out);
      out += " /\\ ";
      print_operand(f.rhs(), kAnd, out);
      return;
  }
}

void print(const Term& t, std::string& out) {
  switch (t.kind()) {
    case Term::Kind::Var: out += t.name(); return;
    case Term::Kind::TT: out += "I"; return;
    case Term::Kind::Hole: out += "?" + std::to_string(t.hole_id()); return;
    case Term::Kind::Lam:
      out += "(fun (" + t.name() + " : " + to_string(t.annotation()) + ") => ";
      print(t.child(0), out);
      out += ')';
      return;
    case Term::Kind::App:
      out += '(';
      print(t.child(0), out);
      out += ' ';
      print(t.child(1), out);
      out += ')';
      return;
    case Term::Kind::Pair:
      out += "conj(";
      print(t.child(0), out);
      out += ", ";
      print(t.child(1), out);
      out += ')';
      return;
    case Term::Kind::Fst:
    case Term::Kind::Snd:
      out += t.is(Term::Kind::Fst) ? "proj1(" : "proj2(";
      print(t.child(0), out);
      out += ')';
      return;
    case Term::Kind::Inl:
    case Term::Kind::Inr:
      out += t.is(Term::Kind::Inl) ? "or_introl[" : "or_intror[";
      out += to_string(t.annotation()) + "](";
      print(t.child(0), out);
      out += ')';
      return;
    case Term::Kind::Case:
      out += "(match ";
      print(t.child(0), out);
      out += " with inl " + t.name() + " => ";
      print(t.child(1), out);
      out += " | inr " + t.name2() + " => ";
      print(t.child(2), out);
      out += " end)";
      return;
    case Term::Kind::Exfalso:
      out += "False_ind[" + to_string(t.annotation()) + "](";
      print(t.child(0), out);
      out += ')';
      return;
  }
}

void collect_names(const Formula& f, std::vector<std::string>& out) {
  switch (f.kind()) {
    case Formula::Kind::Atom:
    case Formula::Kind::DefApp:
      if (std::find(out.begin(), out.end(), f.name()) == out.end()) out.push_back(f.name());
      for (const auto& a : f.args()) collect_names(a, out);
      return;
    case Formula::Kind::Impl:
    case Formula::Kind::And:
    case Formula::Kind::Or:
      collect_names(f.lhs(), out);
      collect_names(f.rhs(), out);
      return;
    default:
      return;
  }
}

}  // namespace

std::string to_string(const Formula& f) {
  std::string out;
  print(f, out);
  return out;
}

std::string to_string(const Term& t) {
  std::string out;
  print(t, out);
  return out;
}

std::vector<std::string> mentioned_names(const Formula& f) {
  std::vector<std::string> out;
  collect_names(f, out);
  return out;
}

}  // namespace sprover::kernel
