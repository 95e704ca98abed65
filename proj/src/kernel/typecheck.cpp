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

#include "sprover/kernel/typecheck.h"

#include <algorithm>
#include <map>

namespace sprover::kernel {

namespace {

using Substitution = std::map<std::string, Formula>;

Formula substitute(const Formula& f, const Substitution& subst) {
  switch (f.kind()) {
    case Formula::Kind::Atom: {
      auto it = subst.find(f.name());
      return it == subst.end() ? f : it->second;
    }
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Impl:
      return Formula::impl(substitute(f.lhs(), subst), substitute(f.rhs(), subst));
    case Formula::Kind::And:
      return Formula::conj(substitute(f.lhs(), subst), substitute(f.rhs(), subst));
    case Formula::Kind::Or:
      return Formula::disj(substitute(f.lhs(), subst), substitute(f.rhs(), subst));
    case Formula::Kind::DefApp: {
      std::vector<Formula> args;
      args.reserve(f.args().size());
      for (const auto& a : f.args()) args.push_back(substitute(a, subst));
      return Formula::def_app(f.name(), std::move(args));
    }
  }
  return f;
}

const Definition& definition_of(const Environment& env, const Formula& app) {
  const auto* def = env.find_definition(app.name());
  if (!def) throw TypeError("unknown definition '" + app.name() + "'");
  if (def->params.size() != app.args().size()) {
    throw TypeError("arity error: '" + app.name() + "' expects " +
                    std::to_string(def->params.size()) + " argument(s), got " +
                    std::to_string(app.args().size()));
  }
  return *def;
}

// Unfolds DefApps selected by `pick`. Arguments are processed first, the
// body of the definition afterwards, then parameters are substituted; no
// binders exist at the formula level, so substitution cannot capture.
template <typename Pick>
Formula unfold_where(const Environment& env, const Formula& f, const Pick& pick) {
  switch (f.kind()) {
    case Formula::Kind::Atom:
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Impl:
      return Formula::impl(unfold_where(env, f.lhs(), pick), unfold_where(env, f.rhs(), pick));
    case Formula::Kind::And:
      return Formula::conj(unfold_where(env, f.lhs(), pick), unfold_where(env, f.rhs(), pick));
    case Formula::Kind::Or:
      return Formula::disj(unfold_where(env, f.lhs(), pick), unfold_where(env, f.rhs(), pick));
    case Formula::Kind::DefApp: {
      std::vector<Formula> args;
      args.reserve(f.args().size());
      for (const auto& a : f.args()) args.push_back(unfold_where(env, a, pick));
      if (!pick(f.name())) return Formula::def_app(f.name(), std::move(args));
      const Definition& def = definition_of(env, f);
      Formula body = unfold_where(env, def.body, pick);
      Substitution subst;
      for (std::size_t i = 0; i < def.params.size(); ++i) subst.emplace(def.params[i], args[i]);
      return substitute(body, subst);
    }
  }
  return f;
}

Formula expect_head(const Environment& env, const Formula& f, Formula::Kind kind,
                    const char* what, const Term& at) {
  Formula head = unfold_head(env, f);
  if (head.kind() != kind) {
    throw TypeError(std::string("expected ") + what + " in '" + to_string(at) + "', found " +
                    to_string(f));
  }
  return head;
}

void check_annotation(const Environment& env, const Formula& f) {
  try {
    check_formula(env, f);
  } catch (const KernelError& e) {
    throw TypeError(e.what());
  }
}

Formula infer_in(const Environment& env, Context& ctx, const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Var: {
      for (auto it = ctx.rbegin(); it != ctx.rend(); ++it) {
        if (it->first == t.name()) return it->second;
      }
      if (const auto* e = env.find(t.name())) {
        if (const auto* p = e->proves()) return *p;
        throw TypeError("'" + t.name() + "' is a definition, not a proof");
      }
      throw TypeError("unbound variable '" + t.name() + "'");
    }
    case Term::Kind::Lam: {
      check_annotation(env, t.annotation());
      ctx.emplace_back(t.name(), t.annotation());
      Formula body = infer_in(env, ctx, t.child(0));
      ctx.pop_back();
      return Formula::impl(t.annotation(), body);
    }
    case Term::Kind::App: {
      Formula fn = expect_head(env, infer_in(env, ctx, t.child(0)), Formula::Kind::Impl,
                               "an implication", t.child(0));
      Formula arg = infer_in(env, ctx, t.child(1));
      if (!convertible(env, arg, fn.lhs())) {
        throw TypeError("formula mismatch in argument '" + to_string(t.child(1)) +
                        "': expected " + to_string(fn.lhs()) + ", found " + to_string(arg));
      }
      return fn.rhs();
    }
    case Term::Kind::Pair:
      return Formula::conj(infer_in(env, ctx, t.child(0)), infer_in(env, ctx, t.child(1)));
    case Term::Kind::Fst:
    case Term::Kind::Snd: {
      Formula c = expect_head(env, infer_in(env, ctx, t.child(0)), Formula::Kind::And,
                              "a conjunction", t.child(0));
      return t.is(Term::Kind::Fst) ? c.lhs() : c.rhs();
    }
    case Term::Kind::Inl:
      check_annotation(env, t.annotation());
      return Formula::disj(infer_in(env, ctx, t.child(0)), t.annotation());
    case Term::Kind::Inr:
      check_annotation(env, t.annotation());
      return Formula::disj(t.annotation(), infer_in(env, ctx, t.child(0)));
    case Term::Kind::Case: {
      Formula d = expect_head(env, infer_in(env, ctx, t.child(0)), Formula::Kind::Or,
                              "a disjunction", t.child(0));
      ctx.emplace_back(t.name(), d.lhs());
      Formula left = infer_in(env, ctx, t.child(1));
      ctx.back() = Hypothesis(t.name2(), d.rhs());
      Formula right = infer_in(env, ctx, t.child(2));
      ctx.pop_back();
      if (!convertible(env, left, right)) {
        throw TypeError("formula mismatch between case branches: " + to_string(left) + " vs " +
                        to_string(right));
      }
      return left;
    }
    case Term::Kind::TT:
      return Formula::truth();
    case Term::Kind::Exfalso: {
      check_annotation(env, t.annotation());
      Formula absurd = infer_in(env, ctx, t.child(0));
      if (!convertible(env, absurd, Formula::falsity())) {
        throw TypeError("formula mismatch: expected False, found " + to_string(absurd));
      }
      return t.annotation();
    }
    case Term::Kind::Hole:
      throw TypeError("term contains unresolved hole ?" + std::to_string(t.hole_id()));
  }
  throw TypeError("malformed term");
}

}  // namespace

Formula unfold_all(const Environment& env, const Formula& f) {
  return unfold_where(env, f, [](const std::string&) { return true; });
}

Formula unfold_named(const Environment& env, const Formula& f,
                     const std::vector<std::string>& names) {
  return unfold_where(env, f, [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end() && env.find_definition(n);
  });
}

Formula unfold_head(const Environment& env, const Formula& f) {
  Formula cur = f;
  while (cur.is(Formula::Kind::DefApp)) {
    const Definition& def = definition_of(env, cur);
    Substitution subst;
    for (std::size_t i = 0; i < def.params.size(); ++i) subst.emplace(def.params[i], cur.args()[i]);
    cur = substitute(def.body, subst);
  }
  return cur;
}

bool convertible(const Environment& env, const Formula& a, const Formula& b) {
  if (a == b) return true;
  return unfold_all(env, a) == unfold_all(env, b);
}

Formula infer(const Environment& env, const Context& ctx, const Term& term) {
  Context scratch = ctx;
  return infer_in(env, scratch, term);
}

void typecheck(const Environment& env, const Context& ctx, const Term& term,
               const Formula& expected) {
  check_annotation(env, expected);
  Formula found = infer(env, ctx, term);
  if (!convertible(env, found, expected)) {
    throw TypeError("formula mismatch: expected " + to_string(expected) + ", found " +
                    to_string(found));
  }
}

bool well_typed(const Environment& env, const Context& ctx, const Term& term,
                const Formula& expected) {
  try {
    typecheck(env, ctx, term, expected);
    return true;
  } catch (const KernelError&) {
    return false;
  }
}

std::vector<SwfFailure> check_swf(const Environment& env, SwfScope scope) {
  std::vector<SwfFailure> failures;
  for (std::size_t i = 0; i < env.size(); ++i) {
    const EnvEntry& entry = env.at(i);
    const auto* opaque = entry.as_opaque();
    if (!opaque) continue;
    if (scope == SwfScope::LocalOnly && !entry.origin().empty()) continue;
    ProofPromise promise = opaque->promise->get();
    PromiseResult result = promise.force();
    if (const auto* failure = std::get_if<PromiseFailure>(&result)) {
      failures.push_back({opaque->name, failure->message});
      continue;
    }
    try {
      typecheck(env.prefix(i), {}, std::get<Term>(result), opaque->statement);
    } catch (const KernelError& e) {
      failures.push_back({opaque->name, e.what()});
    }
  }
  return failures;
}

}  // namespace sprover::kernel
