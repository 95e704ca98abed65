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

#include "sprover/engine/engine.h"

#include <algorithm>

namespace sprover::engine {

using kernel::convertible;
using kernel::unfold_head;

namespace {

bool hyp_named(const Context& hyps, const std::string& name) {
  return std::any_of(hyps.begin(), hyps.end(), [&](const auto& h) { return h.first == name; });
}

// h0, h1, ...: the convention for user-level intro.
std::string fresh_intro_name(const Context& hyps) {
  for (int i = 0;; ++i) {
    std::string n = "h" + std::to_string(i);
    if (!hyp_named(hyps, n)) return n;
  }
}

// h, h0, h1, ...: the convention for names invented by auto.
std::string fresh_auto_name(const Context& hyps) {
  if (!hyp_named(hyps, "h")) return "h";
  return fresh_intro_name(hyps);
}

// The formula a name proves, looking at hypotheses (latest first) then at the
// environment.
std::optional<Formula> lookup_proof(const Environment& env, const Context& hyps,
                                    const std::string& name) {
  for (auto it = hyps.rbegin(); it != hyps.rend(); ++it) {
    if (it->first == name) return it->second;
  }
  if (const auto* e = env.find(name)) {
    if (const auto* p = e->proves()) return *p;
  }
  return std::nullopt;
}

// Peels premises off `h` until its conclusion converts to `goal`. Returns the
// premises to prove, or nullopt when `h` cannot conclude `goal`.
std::optional<std::vector<Formula>> match_conclusion(const Environment& env, const Formula& h,
                                                     const Formula& goal) {
  std::vector<Formula> premises;
  Formula cur = h;
  for (;;) {
    if (convertible(env, cur, goal)) return premises;
    Formula head = unfold_head(env, cur);
    if (!head.is(Formula::Kind::Impl)) return std::nullopt;
    premises.push_back(head.lhs());
    cur = head.rhs();
  }
}

class Refiner {
 public:
  Refiner(const ProofState& ps) : out_(ps) {}

  const Goal& first() const {
    if (out_.goals.empty()) throw TacticError("no goals");
    return out_.goals.front();
  }

  std::uint32_t open_hole() { return out_.next_hole++; }

  // Replaces the first goal by `subgoals` (in order), filling its hole.
  void refine(const Term& witness, std::vector<Goal> subgoals) {
    Goal g = out_.goals.front();
    out_.partial = kernel::fill_hole(out_.partial, g.hole, witness);
    out_.goals.erase(out_.goals.begin());
    out_.goals.insert(out_.goals.begin(), subgoals.begin(), subgoals.end());
  }

  void replace_conclusion(Formula f) { out_.goals.front().conclusion = std::move(f); }

  ProofState take() { return std::move(out_); }

 private:
  ProofState out_;
};

class AutoSearch {
 public:
  AutoSearch(const Environment& env, const HintDb& hints, const CancelSwitch* cancel)
      : env_(env), hints_(hints), cancel_(cancel) {}

  std::optional<Term> search(Context& hyps, const Formula& raw_goal, int depth) {
    if (cancel_ && (++visited_ & 0x3ff) == 0 && cancel_->is_set()) {
      throw TacticError("cancelled", true);
    }
    const Formula goal =
        hints_.unfold.empty() ? raw_goal : kernel::unfold_named(env_, raw_goal, hints_.unfold);

    if (goal.is(Formula::Kind::True)) return Term::tt();
    for (const auto& [name, f] : hyps) {
      if (convertible(env_, f, goal)) return Term::var(name);
    }
    if (depth <= 0) return std::nullopt;

    switch (goal.kind()) {
      case Formula::Kind::Impl: {
        std::string n = fresh_auto_name(hyps);
        hyps.emplace_back(n, goal.lhs());
        auto body = search(hyps, goal.rhs(), depth - 1);
        hyps.pop_back();
        if (body) return Term::lam(n, goal.lhs(), *body);
        break;
      }
      case Formula::Kind::And: {
        auto l = search(hyps, goal.lhs(), depth - 1);
        if (!l) break;
        auto r = search(hyps, goal.rhs(), depth - 1);
        if (r) return Term::pair(*l, *r);
        break;
      }
      case Formula::Kind::Or: {
        if (auto l = search(hyps, goal.lhs(), depth - 1)) return Term::inl(*l, goal.rhs());
        if (auto r = search(hyps, goal.rhs(), depth - 1)) return Term::inr(*r, goal.lhs());
        break;
      }
      default:
        break;
    }

    // Hypotheses first, in declaration order, then resolve hints. Recursive
    // calls push and pop their own hypotheses, so indices below `n` are
    // stable.
    const std::size_t n = hyps.size();
    for (std::size_t i = 0; i < n; ++i) {
      const kernel::Hypothesis h = hyps[i];
      if (auto t = try_apply(hyps, h.first, h.second, goal, depth)) return t;
    }
    for (const auto& name : hints_.resolve) {
      if (hyp_named(hyps, name)) continue;
      const auto* e = env_.find(name);
      if (!e || !e->proves()) continue;
      if (auto t = try_apply(hyps, name, *e->proves(), goal, depth)) return t;
    }
    return std::nullopt;
  }

 private:
  std::optional<Term> try_apply(Context& hyps, const std::string& name, const Formula& f,
                                const Formula& goal, int depth) {
    auto premises = match_conclusion(env_, f, goal);
    if (!premises) return std::nullopt;
    Term acc = Term::var(name);
    for (const auto& p : *premises) {
      auto arg = search(hyps, p, depth - 1);
      if (!arg) return std::nullopt;
      acc = Term::app(acc, *arg);
    }
    return acc;
  }

  const Environment& env_;
  const HintDb& hints_;
  const CancelSwitch* cancel_;
  std::uint64_t visited_ = 0;
};

std::vector<Term> run_sequentially(const Environment& env, const HintDb& hints,
                                   const std::vector<ParSubtask>& tasks,
                                   const CancelSwitch* cancel) {
  std::vector<Term> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(run_par_subtask(env, hints, t, cancel));
  return out;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace

HintDb add_hints(const Environment& env, HintDb db, HintKind kind,
                 const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (kind == HintKind::Unfold) {
      if (n != kBuiltinNot && !env.find_definition(n)) {
        throw TacticError("Hint Unfold: '" + n + "' is not a definition");
      }
      push_unique(db.unfold, n);
    } else {
      const auto* e = env.find(n);
      if (!e || !e->proves()) throw TacticError("Hint Resolve: '" + n + "' is not a proof");
      push_unique(db.resolve, n);
    }
  }
  return db;
}

bool operator==(const TacticAst& a, const TacticAst& b) {
  if (a.kind != b.kind || a.name != b.name || a.names != b.names || a.depth != b.depth) {
    return false;
  }
  if (!a.inner || !b.inner) return a.inner == b.inner;
  return *a.inner == *b.inner;
}

std::string to_string(const TacticAst& t) {
  using K = TacticAst::Kind;
  switch (t.kind) {
    case K::Intro: return t.name ? "intro " + *t.name : "intro";
    case K::Intros: return "intros";
    case K::Apply: return "apply " + t.name.value_or("");
    case K::Exact: return "exact " + t.name.value_or("");
    case K::Split: return "split";
    case K::Left: return "left";
    case K::Right: return "right";
    case K::Assumption: return "assumption";
    case K::Unfold: {
      std::string s = "unfold";
      for (std::size_t i = 0; i < t.names.size(); ++i) s += (i ? ", " : " ") + t.names[i];
      return s;
    }
    case K::Auto: return t.depth ? "auto " + std::to_string(*t.depth) : "auto";
    case K::Idtac: return "idtac";
    case K::Fail: return "fail";
    case K::ProofMarker: return "Proof";
    case K::Par: return "par: " + (t.inner ? to_string(*t.inner) : std::string("?"));
  }
  return "?";
}

ProofState start_proof(const Environment& env, const Formula& statement, HintDb hints) {
  try {
    kernel::check_formula(env, statement);
  } catch (const kernel::KernelError& e) {
    throw TacticError(e.what());
  }
  ProofState ps;
  ps.statement = statement;
  ps.partial = Term::hole(0);
  ps.goals.push_back(Goal{{}, statement, 0});
  ps.hints = std::move(hints);
  ps.next_hole = 1;
  return ps;
}

ProofState apply_tactic(const Environment& env, const ProofState& ps, const TacticAst& tactic,
                        const TacticContext& ctx) {
  using K = TacticAst::Kind;
  if (ctx.cancel && ctx.cancel->is_set()) throw TacticError("cancelled", true);
  Refiner r(ps);
  try {
    switch (tactic.kind) {
      case K::Idtac:
      case K::ProofMarker:
        return ps;
      case K::Fail:
        throw TacticError("fail");
      case K::Intro: {
        const Goal& g = r.first();
        Formula head = unfold_head(env, g.conclusion);
        if (!head.is(Formula::Kind::Impl)) {
          throw TacticError("intro: goal is not an implication");
        }
        std::string name = tactic.name ? *tactic.name : fresh_intro_name(g.hypotheses);
        if (hyp_named(g.hypotheses, name)) throw TacticError("intro: name '" + name + "' is used");
        Goal sub{g.hypotheses, head.rhs(), r.open_hole()};
        sub.hypotheses.emplace_back(name, head.lhs());
        r.refine(Term::lam(name, head.lhs(), Term::hole(sub.hole)), {sub});
        return r.take();
      }
      case K::Intros: {
        ProofState cur = ps;
        if (cur.goals.empty()) throw TacticError("no goals");
        while (unfold_head(env, cur.goals.front().conclusion).is(Formula::Kind::Impl)) {
          cur = apply_tactic(env, cur, TacticAst::simple(K::Intro), ctx);
        }
        return cur;
      }
      case K::Apply: {
        const Goal& g = r.first();
        auto f = lookup_proof(env, g.hypotheses, tactic.name.value_or(""));
        if (!f) throw TacticError("apply: unknown name '" + tactic.name.value_or("") + "'");
        auto premises = match_conclusion(env, *f, g.conclusion);
        if (!premises) {
          throw TacticError("apply: '" + *tactic.name + "' does not conclude " +
                            kernel::to_string(g.conclusion));
        }
        Term acc = Term::var(*tactic.name);
        std::vector<Goal> subs;
        for (const auto& p : *premises) {
          Goal sub{g.hypotheses, p, r.open_hole()};
          acc = Term::app(acc, Term::hole(sub.hole));
          subs.push_back(std::move(sub));
        }
        r.refine(acc, std::move(subs));
        return r.take();
      }
      case K::Exact: {
        const Goal& g = r.first();
        const std::string name = tactic.name.value_or("");
        auto f = lookup_proof(env, g.hypotheses, name);
        if (!f && name == "I") {
          if (!convertible(env, g.conclusion, Formula::truth())) {
            throw TacticError("exact: I proves True, not " + kernel::to_string(g.conclusion));
          }
          r.refine(Term::tt(), {});
          return r.take();
        }
        if (!f) throw TacticError("exact: unknown name '" + name + "'");
        if (!convertible(env, *f, g.conclusion)) {
          throw TacticError("exact: '" + name + "' proves " + kernel::to_string(*f) + ", not " +
                            kernel::to_string(g.conclusion));
        }
        r.refine(Term::var(name), {});
        return r.take();
      }
      case K::Split: {
        const Goal& g = r.first();
        Formula head = unfold_head(env, g.conclusion);
        if (!head.is(Formula::Kind::And)) throw TacticError("split: goal is not a conjunction");
        Goal a{g.hypotheses, head.lhs(), r.open_hole()};
        Goal b{g.hypotheses, head.rhs(), r.open_hole()};
        r.refine(Term::pair(Term::hole(a.hole), Term::hole(b.hole)), {a, b});
        return r.take();
      }
      case K::Left:
      case K::Right: {
        const Goal& g = r.first();
        Formula head = unfold_head(env, g.conclusion);
        if (!head.is(Formula::Kind::Or)) {
          throw TacticError(std::string(tactic.kind == K::Left ? "left" : "right") +
                            ": goal is not a disjunction");
        }
        bool left = tactic.kind == K::Left;
        Goal sub{g.hypotheses, left ? head.lhs() : head.rhs(), r.open_hole()};
        Term w = left ? Term::inl(Term::hole(sub.hole), head.rhs())
                      : Term::inr(Term::hole(sub.hole), head.lhs());
        r.refine(w, {sub});
        return r.take();
      }
      case K::Assumption: {
        const Goal& g = r.first();
        for (const auto& [name, f] : g.hypotheses) {
          if (convertible(env, f, g.conclusion)) {
            r.refine(Term::var(name), {});
            return r.take();
          }
        }
        throw TacticError("assumption: no hypothesis matches the goal");
      }
      case K::Unfold: {
        const Goal& g = r.first();
        for (const auto& n : tactic.names) {
          if (n != kBuiltinNot && !env.find_definition(n)) {
            throw TacticError("unfold: '" + n + "' is not a definition");
          }
        }
        r.replace_conclusion(kernel::unfold_named(env, g.conclusion, tactic.names));
        return r.take();
      }
      case K::Auto: {
        const Goal& g = r.first();
        auto w = auto_search(env, ps.hints, g, tactic.depth.value_or(kDefaultAutoDepth),
                             ctx.cancel);
        if (!w) throw TacticError("auto: cannot solve " + kernel::to_string(g.conclusion));
        r.refine(*w, {});
        return r.take();
      }
      case K::Par: {
        if (!tactic.inner) throw TacticError("par: missing tactic");
        auto tasks = par_split(env, ps, *tactic.inner);
        std::vector<Term> witnesses =
            ctx.par_runner && *ctx.par_runner
                ? (*ctx.par_runner)(env, ps.hints, tasks)
                : run_sequentially(env, ps.hints, tasks, ctx.cancel);
        return join_par(ps, witnesses);
      }
    }
  } catch (const kernel::KernelError& e) {
    throw TacticError(e.what());
  }
  throw TacticError("unknown tactic");
}

std::optional<Term> auto_search(const Environment& env, const HintDb& hints, const Goal& goal,
                                int depth, const CancelSwitch* cancel) {
  AutoSearch s(env, hints, cancel);
  Context hyps = goal.hypotheses;
  try {
    return s.search(hyps, goal.conclusion, depth);
  } catch (const kernel::KernelError&) {
    return std::nullopt;
  }
}

std::vector<ParSubtask> par_split(const Environment&, const ProofState& ps,
                                  const TacticAst& tactic) {
  if (tactic.kind == TacticAst::Kind::Par) throw TacticError("par: cannot nest par:");
  std::vector<ParSubtask> out;
  out.reserve(ps.goals.size());
  for (const auto& g : ps.goals) out.push_back(ParSubtask{g, tactic});
  return out;
}

Term run_par_subtask(const Environment& env, const HintDb& hints, const ParSubtask& task,
                     const CancelSwitch* cancel) {
  ProofState local;
  local.statement = task.goal.conclusion;
  local.goals.push_back(Goal{task.goal.hypotheses, task.goal.conclusion, 0});
  local.partial = Term::hole(0);
  local.hints = hints;
  local.next_hole = 1;
  TacticContext ctx;
  ctx.cancel = cancel;
  ProofState done = apply_tactic(env, local, task.tactic, ctx);
  if (!done.goals.empty()) {
    throw TacticError("par: " + to_string(task.tactic) + " did not close its goal");
  }
  return done.partial;
}

ProofState join_par(const ProofState& ps, const std::vector<Term>& witnesses) {
  if (witnesses.size() != ps.goals.size()) {
    throw TacticError("par: expected " + std::to_string(ps.goals.size()) + " witnesses, got " +
                      std::to_string(witnesses.size()));
  }
  ProofState out = ps;
  for (std::size_t i = 0; i < ps.goals.size(); ++i) {
    out.partial = kernel::fill_hole(out.partial, ps.goals[i].hole, witnesses[i]);
  }
  out.goals.clear();
  return out;
}

Term finish_proof(const ProofState& ps) {
  if (!ps.goals.empty()) {
    std::size_t n = ps.goals.size();
    throw TacticError(std::to_string(n) + (n == 1 ? " open goal" : " open goals") +
                      " remaining");
  }
  return ps.partial;
}

std::string render_goals(const ProofState& ps) {
  if (ps.goals.empty()) return "No more goals.";
  std::size_t n = ps.goals.size();
  std::string out = std::to_string(n) + (n == 1 ? " goal\n" : " goals\n");
  const Goal& g = ps.goals.front();
  for (const auto& [name, f] : g.hypotheses) out += "  " + name + " : " + kernel::to_string(f) + "\n";
  out += "  ============================\n  " + kernel::to_string(g.conclusion);
  return out;
}

}  // namespace sprover::engine
