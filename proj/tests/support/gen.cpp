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

#include "gen.h"

#include <algorithm>
#include <set>

#include "sprover/kernel/typecheck.h"

namespace sprover::testing {

using kernel::Formula;
using kernel::Term;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

namespace {

const char* const kAtoms[] = {"P", "Q", "R", "S"};

struct DefInfo {
  std::string name;
  std::size_t arity = 0;
};

// Formulas over the atoms and, when given, applications of `defs`.
Formula formula_over(Rng& rng, int depth, const std::vector<std::string>& atoms,
                     const std::vector<DefInfo>& defs) {
  if (depth <= 0 || coin(rng, 0.3)) {
    int r = uniform(rng, 0, 9);
    if (r == 0) return Formula::truth();
    if (r == 1) return Formula::falsity();
    if (r == 2 && !defs.empty()) {
      const DefInfo& d = defs[uniform(rng, 0, static_cast<int>(defs.size()) - 1)];
      std::vector<Formula> args;
      for (std::size_t i = 0; i < d.arity; ++i) args.push_back(formula_over(rng, depth - 1, atoms, {}));
      return Formula::def_app(d.name, std::move(args));
    }
    return Formula::atom(atoms[uniform(rng, 0, static_cast<int>(atoms.size()) - 1)]);
  }
  Formula l = formula_over(rng, depth - 1, atoms, defs);
  Formula r = formula_over(rng, depth - 1, atoms, defs);
  switch (uniform(rng, 0, 2)) {
    case 0: return Formula::impl(l, r);
    case 1: return Formula::conj(l, r);
    default: return Formula::disj(l, r);
  }
}

std::vector<std::string> default_atoms() { return {std::begin(kAtoms), std::end(kAtoms)}; }

std::string arg_surface(const Formula& f) {
  bool bare = f.is(Formula::Kind::Atom) || f.is(Formula::Kind::True) || f.is(Formula::Kind::False) ||
              (f.is(Formula::Kind::DefApp) && f.args().empty());
  return bare ? surface(f) : "(" + surface(f) + ")";
}

}  // namespace

Formula random_formula(Rng& rng, int depth) { return formula_over(rng, depth, default_atoms(), {}); }

std::string surface(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Atom: return f.name();
    case Formula::Kind::True: return "True";
    case Formula::Kind::False: return "False";
    case Formula::Kind::Impl: return "(" + surface(f.lhs()) + " -> " + surface(f.rhs()) + ")";
    case Formula::Kind::And: return "(" + surface(f.lhs()) + " /\\ " + surface(f.rhs()) + ")";
    case Formula::Kind::Or: return "(" + surface(f.lhs()) + " \\/ " + surface(f.rhs()) + ")";
    case Formula::Kind::DefApp: {
      std::string s = f.name();
      for (const auto& a : f.args()) s += " " + arg_surface(a);
      return s;
    }
  }
  return "?";
}

std::string GenDocument::text() const {
  std::string out;
  for (const auto& it : items) {
    if (it.kind != GenItem::Kind::Theorem) {
      out += it.text + "\n";
      continue;
    }
    out += "Theorem " + it.theorem.name + " : " + it.theorem.statement_text + ".\n";
    for (const auto& s : it.theorem.steps) out += "  " + s + "\n";
    out += "Qed.\n";
  }
  return out;
}

std::size_t GenDocument::theorem_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const GenItem& i) {
    return i.kind == GenItem::Kind::Theorem;
  }));
}

namespace {

class DocBuilder {
 public:
  DocBuilder(std::uint64_t seed, const DocOptions& o) : rng_(seed), o_(o) {}

  GenDocument build() {
    int n = uniform(rng_, o_.min_items, o_.max_items);
    for (int i = 0; i < n; ++i) step();
    return std::move(doc_);
  }

 private:
  std::string fresh(const std::string& stem) { return stem + "_" + std::to_string(counter_++); }

  // Formulas for theorem statements: pattern definitions only, so that
  // intro-based tactics see the connectives they expect.
  Formula formula(int depth) {
    Formula f = formula_over(rng_, depth, default_atoms(), {});
    return fold(f);
  }

  Formula fold(const Formula& f) {
    switch (f.kind()) {
      case Formula::Kind::Impl: return Formula::impl(fold(f.lhs()), fold(f.rhs()));
      case Formula::Kind::And:
      case Formula::Kind::Or: {
        Formula l = fold(f.lhs()), r = fold(f.rhs());
        const auto& pool = f.is(Formula::Kind::And) ? and_defs_ : or_defs_;
        if (!pool.empty() && coin(rng_, 0.4)) {
          return Formula::def_app(pool[uniform(rng_, 0, static_cast<int>(pool.size()) - 1)], {l, r});
        }
        return f.is(Formula::Kind::And) ? Formula::conj(l, r) : Formula::disj(l, r);
      }
      default: return f;
    }
  }

  void global(std::string text) { doc_.items.push_back(GenItem{GenItem::Kind::Global, std::move(text), {}}); }

  void theorem(const std::string& name, const Formula& statement, std::vector<std::string> steps) {
    steps.insert(steps.begin(), "Proof.");
    GenItem it;
    it.kind = GenItem::Kind::Theorem;
    it.theorem = GenTheorem{name, surface(statement), std::move(steps)};
    doc_.items.push_back(std::move(it));
    proofs_.push_back({name, statement});
  }

  void add_axiom(const Formula& statement) {
    std::string name = fresh("ax");
    global("Axiom " + name + " : " + surface(statement) + ".");
    proofs_.push_back({name, statement});
    axioms_.push_back({name, statement});
  }

  Formula atom() { return Formula::atom(kAtoms[uniform(rng_, 0, 3)]); }

  void step() {
    int r = uniform(rng_, 0, 15);
    switch (r) {
      case 0: {
        // Pattern definitions used by folding.
        bool conj = coin(rng_);
        std::string name = fresh(conj ? "and" : "or");
        global("Definition " + name + " (A B : Prop) := A " + (conj ? "/\\" : "\\/") + " B.");
        (conj ? and_defs_ : or_defs_).push_back(name);
        defs_.push_back({name, 2});
        return;
      }
      case 1: {
        std::string name = fresh("d");
        std::vector<DefInfo> usable = defs_;
        Formula body = formula_over(rng_, 2, {"A", "P", "Q"}, usable);
        global("Definition " + name + " (A : Prop) := " + surface(body) + ".");
        defs_.push_back({name, 1});
        return;
      }
      case 2:
        add_axiom(coin(rng_) ? atom() : Formula::impl(atom(), atom()));
        return;
      case 3:
        if (!o_.hints) break;
        if (!axioms_.empty() && coin(rng_)) {
          global("Hint Resolve " + axioms_[uniform(rng_, 0, static_cast<int>(axioms_.size()) - 1)].first + ".");
        } else if (!and_defs_.empty()) {
          global("Hint Unfold " + and_defs_.back() + ".");
        }
        return;
      case 4:
        if (!o_.queries) break;
        if (!proofs_.empty() && coin(rng_)) {
          doc_.items.push_back(GenItem{GenItem::Kind::Query,
                                      "Print " + proofs_[uniform(rng_, 0, static_cast<int>(proofs_.size()) - 1)].first + ".",
                                      {}});
        } else {
          doc_.items.push_back(GenItem{GenItem::Kind::Query, "Check " + surface(formula_over(rng_, 2, default_atoms(), defs_)) + ".", {}});
        }
        return;
      default:
        break;
    }
    theorem_step();
  }

  void theorem_step() {
    std::string name = fresh("t");
    Formula a = formula(2), b = formula(2);
    switch (uniform(rng_, 0, 9)) {
      case 0:
        theorem(name, Formula::impl(a, a), {"intro h.", "exact h."});
        return;
      case 1:
        theorem(name, Formula::impl(a, Formula::impl(b, Formula::conj(a, b))),
                {"intros.", "split.", "assumption.", "assumption."});
        return;
      case 2:
        if (coin(rng_)) {
          theorem(name, Formula::impl(a, Formula::disj(a, b)), {"intro h.", "left.", "exact h."});
        } else {
          theorem(name, Formula::impl(b, Formula::disj(a, b)), {"intro h.", "right.", "exact h."});
        }
        return;
      case 3:
        if (proofs_.empty()) break;
        {
          const auto& [prev, st] = proofs_[uniform(rng_, 0, static_cast<int>(proofs_.size()) - 1)];
          std::string prev_name = prev;
          Formula prev_st = st;
          theorem(name, prev_st, {"exact " + prev_name + "."});
        }
        return;
      case 4: {
        Formula p = atom(), q = atom(), c = atom();
        theorem(name, Formula::impl(p, Formula::impl(q, Formula::disj(Formula::conj(p, q), c))), {"auto."});
        return;
      }
      case 5:
        if (!o_.par) break;
        theorem(name, Formula::impl(a, Formula::impl(b, Formula::conj(a, b))),
                {"intros.", "split.", coin(rng_) ? "par: auto." : "par: assumption."});
        return;
      case 6: {
        if (!o_.hints) break;
        Formula target = coin(rng_) ? atom() : Formula::impl(atom(), atom());
        const std::string* ax = nullptr;
        for (const auto& [n, f] : axioms_) {
          if (f == target) ax = &n;
        }
        if (!ax) {
          add_axiom(target);
          ax = &axioms_.back().first;
        }
        std::string hint = "Hint Resolve " + *ax + ".";
        theorem(name, Formula::impl(atom(), target), {hint, "auto."});
        return;
      }
      case 7: {
        if (and_defs_.empty()) break;
        std::string d = and_defs_[uniform(rng_, 0, static_cast<int>(and_defs_.size()) - 1)];
        theorem(name, Formula::impl(a, Formula::impl(b, Formula::def_app(d, {a, b}))),
                {"unfold " + d + ".", "intros.", "split.", "assumption.", "assumption."});
        return;
      }
      case 8: {
        // Needs an implication axiom to apply.
        Formula p = atom(), q = atom();
        std::string ax = fresh("ax");
        global("Axiom " + ax + " : " + surface(Formula::impl(a, Formula::impl(p, q))) + ".");
        proofs_.push_back({ax, Formula::impl(a, Formula::impl(p, q))});
        theorem(name, Formula::impl(a, Formula::impl(p, q)), {"intro h.", "apply " + ax + ".", "exact h."});
        return;
      }
      case 9:
        theorem(name, Formula::impl(a, Formula::impl(Formula::impl(a, Formula::falsity()), Formula::falsity())),
                {"unfold not.", "intros.", "apply h1.", "exact h0."});
        return;
    }
    theorem(name, Formula::impl(a, a), {"intro h.", "exact h."});
  }

  Rng rng_;
  DocOptions o_;
  GenDocument doc_;
  int counter_ = 0;
  std::vector<DefInfo> defs_;
  std::vector<std::string> and_defs_, or_defs_;
  std::vector<std::pair<std::string, Formula>> proofs_;
  std::vector<std::pair<std::string, Formula>> axioms_;
};

}  // namespace

GenDocument generate_document(std::uint64_t seed, const DocOptions& options) {
  return DocBuilder(seed, options).build();
}

std::vector<Fault> inject_faults(GenDocument& doc, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> theorems;
  for (std::size_t i = 0; i < doc.items.size(); ++i) {
    if (doc.items[i].kind == GenItem::Kind::Theorem) theorems.push_back(i);
  }
  std::shuffle(theorems.begin(), theorems.end(), rng);
  std::size_t n = std::min<std::size_t>(theorems.size(), static_cast<std::size_t>(uniform(rng, 1, 3)));
  std::vector<Fault> faults;
  for (std::size_t k = 0; k < n; ++k) {
    auto& steps = doc.items[theorems[k]].theorem.steps;
    static const char* const kKinds[] = {"fail", "exact", "apply", "unfold", "truncate", "parse"};
    std::string kind = kKinds[uniform(rng, 0, 5)];
    if (kind == "truncate" && steps.size() < 2) kind = "fail";
    if (kind == "truncate") {
      steps.resize(1);
      faults.push_back({theorems[k], 0, kind});
      continue;
    }
    std::string sentence = kind == "fail"     ? "fail."
                           : kind == "exact"  ? "exact nosuch."
                           : kind == "apply"  ? "apply nosuch."
                           : kind == "unfold" ? "unfold nosuch."
                                              : "frobnicate.";
    std::size_t at = static_cast<std::size_t>(uniform(rng, 1, static_cast<int>(steps.size())));
    steps.insert(steps.begin() + static_cast<std::ptrdiff_t>(at), sentence);
    faults.push_back({theorems[k], at, kind});
  }
  std::sort(faults.begin(), faults.end(), [](const Fault& a, const Fault& b) { return a.item < b.item; });
  return faults;
}

namespace {

class ProofBuilder {
 public:
  ProofBuilder(Rng& rng, const kernel::Environment& env) : rng_(rng), env_(env) {
    for (const auto& e : env.entries()) {
      if (const auto* p = e.proves()) globals_.push_back({e.name(), *p});
      if (const auto* d = e.as_definition()) defs_.push_back({d->name, d->params.size()});
    }
  }

  Proved gen(int depth) {
    if (depth <= 0) return leaf();
    switch (uniform(rng_, 0, 9)) {
      case 0: return leaf();
      case 1: {
        std::string x = "x" + std::to_string(binder_++);
        Formula a = formula_over(rng_, 2, default_atoms(), defs_);
        ctx_.push_back({x, a});
        Proved b = gen(depth - 1);
        ctx_.pop_back();
        return {Term::lam(x, a, b.term), Formula::impl(a, b.formula)};
      }
      case 2: {
        Proved l = gen(depth - 1), r = gen(depth - 1);
        return {Term::pair(l.term, r.term), Formula::conj(l.formula, r.formula)};
      }
      case 3: {
        if (auto e = eliminate()) return *e;
        Proved l = gen(depth - 1), r = gen(depth - 1);
        bool first = coin(rng_);
        return {first ? Term::fst(Term::pair(l.term, r.term)) : Term::snd(Term::pair(l.term, r.term)),
                first ? l.formula : r.formula};
      }
      case 4: {
        Proved p = gen(depth - 1);
        Formula other = formula_over(rng_, 2, default_atoms(), defs_);
        if (coin(rng_)) return {Term::inl(p.term, other), Formula::disj(p.formula, other)};
        return {Term::inr(p.term, other), Formula::disj(other, p.formula)};
      }
      case 5: {
        Proved arg = gen(depth - 1);
        std::string x = "x" + std::to_string(binder_++);
        ctx_.push_back({x, arg.formula});
        Proved body = gen(depth - 1);
        ctx_.pop_back();
        return {Term::app(Term::lam(x, arg.formula, body.term), arg.term), body.formula};
      }
      case 6: {
        Proved s = gen(depth - 1);
        Formula other = formula_over(rng_, 1, default_atoms(), defs_);
        Proved body = gen(depth - 1);
        std::string x = "x" + std::to_string(binder_++), y = "x" + std::to_string(binder_++);
        return {Term::case_of(Term::inl(s.term, other), x, body.term, y, body.term), body.formula};
      }
      case 7: {
        std::string x = "x" + std::to_string(binder_++);
        Formula target = formula_over(rng_, 2, default_atoms(), defs_);
        return {Term::lam(x, Formula::falsity(), Term::exfalso(Term::var(x), target)),
                Formula::impl(Formula::falsity(), target)};
      }
      default: {
        if (auto e = eliminate()) return *e;
        return gen(depth - 1);
      }
    }
  }

 private:
  Proved leaf() {
    std::vector<std::pair<std::string, Formula>> pool = ctx_;
    pool.insert(pool.end(), globals_.begin(), globals_.end());
    if (pool.empty() || coin(rng_, 0.3)) return {Term::tt(), Formula::truth()};
    // Latest binding of a name wins; skip shadowed ones.
    const auto& [n, f] = pool[uniform(rng_, 0, static_cast<int>(pool.size()) - 1)];
    for (auto it = ctx_.rbegin(); it != ctx_.rend(); ++it) {
      if (it->first == n) return {Term::var(n), it->second};
    }
    return {Term::var(n), f};
  }

  // Eliminates a hypothesis whose formula unfolds to a connective.
  std::optional<Proved> eliminate() {
    for (auto it = ctx_.rbegin(); it != ctx_.rend(); ++it) {
      Formula head = kernel::unfold_head(env_, it->second);
      if (head.is(Formula::Kind::And)) {
        bool first = coin(rng_);
        return Proved{first ? Term::fst(Term::var(it->first)) : Term::snd(Term::var(it->first)),
                      first ? head.lhs() : head.rhs()};
      }
      if (head.is(Formula::Kind::Impl)) {
        for (auto jt = ctx_.rbegin(); jt != ctx_.rend(); ++jt) {
          if (kernel::convertible(env_, jt->second, head.lhs())) {
            return Proved{Term::app(Term::var(it->first), Term::var(jt->first)), head.rhs()};
          }
        }
      }
    }
    return std::nullopt;
  }

  Rng& rng_;
  const kernel::Environment& env_;
  std::vector<std::pair<std::string, Formula>> ctx_;
  std::vector<std::pair<std::string, Formula>> globals_;
  std::vector<DefInfo> defs_;
  int binder_ = 0;
};

Term corrupt(Rng& rng, const kernel::Environment& env, const Term& t) {
  switch (uniform(rng, 0, 2)) {
    case 0: return Term::var("ghost");
    case 1: return random_proof(rng, env, 3).term;
    default:
      if (t.is(Term::Kind::Lam)) return Term::lam(t.name(), Formula::truth(), t.child(0));
      return Term::inl(t, Formula::falsity());
  }
}

}  // namespace

Proved random_proof(Rng& rng, const kernel::Environment& env, int depth) {
  return ProofBuilder(rng, env).gen(depth);
}

kernel::Environment admit(const kernel::Environment& env, const GenEntry& e) {
  switch (e.kind) {
    case GenEntry::Kind::Definition: return kernel::env_add_definition(env, e.name, e.params, e.formula);
    case GenEntry::Kind::Axiom: return kernel::env_add_axiom(env, e.name, e.formula);
    case GenEntry::Kind::Opaque: break;
  }
  auto payload = [&] {
    if (e.fails) {
      return kernel::ProofPromise::failed(e.formula, 0, kernel::PromiseFailure{"injected failure", std::nullopt});
    }
    if (e.delegated) {
      Term t = e.proof;
      return kernel::ProofPromise::delegated(e.formula, 0, 0, [t] { return kernel::PromiseResult(t); });
    }
    return kernel::ProofPromise::finished(e.formula, 0, e.proof);
  };
  kernel::ProofPromise p = payload();
  return kernel::env_add_opaque(env, e.name, e.formula, p);
}

std::vector<GenEntry> generate_entries(std::uint64_t seed, int size) {
  Rng rng(seed);
  std::vector<GenEntry> out;
  std::vector<DefInfo> defs;
  kernel::Environment env;
  for (int i = 0; i < size; ++i) {
    GenEntry e;
    e.name = "e" + std::to_string(i);
    int r = uniform(rng, 0, 9);
    if (r < 2) {
      e.kind = GenEntry::Kind::Definition;
      if (coin(rng, 0.3)) {
        e.params = {"A", "B"};
        e.formula = coin(rng) ? Formula::conj(Formula::atom("A"), Formula::atom("B"))
                              : Formula::impl(Formula::atom("A"), Formula::atom("B"));
      } else {
        int arity = uniform(rng, 0, 2);
        std::vector<std::string> atoms = default_atoms();
        for (int k = 0; k < arity; ++k) {
          e.params.push_back(k == 0 ? "A" : "B");
          atoms.push_back(e.params.back());
        }
        e.formula = formula_over(rng, 2, atoms, defs);
      }
      defs.push_back({e.name, e.params.size()});
    } else if (r < 4) {
      e.kind = GenEntry::Kind::Axiom;
      e.formula = formula_over(rng, 2, default_atoms(), defs);
    } else {
      e.kind = GenEntry::Kind::Opaque;
      Proved p = random_proof(rng, env, uniform(rng, 1, 4));
      e.formula = p.formula;
      e.proof = p.term;
      int q = uniform(rng, 0, 19);
      if (q < 3) e.proof = corrupt(rng, env, p.term);
      if (q == 3) e.fails = true;
      e.delegated = coin(rng);
    }
    env = admit(env, e);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sprover::testing
