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

// Session-level behavior of the state machine: edits, errors, scheduling.

#include <string>

#include "doctest.h"
#include "fixtures.h"
#include "gen.h"
#include "oracle.h"
#include "sprover/stm/stm.h"

namespace sprover::stm {
namespace {

using kernel::Formula;
using kernel::ProofPromise;
using kernel::Term;
using testing::kDecidableDoc;
using testing::kHintDoc;

const char* const kAgain =
    "Theorem again : decidable False.\n"
    "Proof.\n"
    "  auto.\n"
    "Qed.\n";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

// Forces every promise of the master environment, in order.
std::vector<kernel::PromiseResult> force_all(Stm& stm) {
  std::vector<kernel::PromiseResult> out;
  const kernel::Environment env = stm.master_environment();
  for (const auto& e : env.entries()) {
    if (const auto* o = e.as_opaque()) out.push_back(o->promise->get().force());
  }
  return out;
}

TEST_CASE("duplication: the master twin makes a later proof succeed") {
  kernel::Environment env = kernel::env_add_definition(
      {}, "decidable", {"P"}, Formula::disj(Formula::atom("P"), Formula::impl(Formula::atom("P"), Formula::falsity())));
  engine::Goal goal{{}, Formula::def_app("decidable", {Formula::falsity()}), 0};
  // What auto can do with and without the hint decides the outcome.
  REQUIRE(engine::auto_search(env, engine::HintDb{{}, {"decidable", "not"}}, goal, 5));
  REQUIRE_FALSE(engine::auto_search(env, {}, goal, 5));

  const std::string doc = std::string(kHintDoc) + kAgain;
  Stm with;
  with.update_document(doc);
  auto r = force_all(with);
  REQUIRE(r.size() == 2);
  CHECK(std::holds_alternative<Term>(r[0]));
  CHECK(std::holds_alternative<Term>(r[1]));

  StmOptions no_twins;
  no_twins.duplicate_globals = false;
  Stm without(no_twins);
  without.update_document(doc);
  auto s = force_all(without);
  REQUIRE(s.size() == 2);
  CHECK(std::holds_alternative<Term>(s[0]));
  CHECK(std::holds_alternative<kernel::PromiseFailure>(s[1]));

  // The hand-unfolded document has no global effect inside the proof.
  Stm plain;
  plain.update_document(std::string(kDecidableDoc) + kAgain);
  auto p = force_all(plain);
  CHECK(std::holds_alternative<Term>(p[0]));
  CHECK(std::holds_alternative<kernel::PromiseFailure>(p[1]));
}

TEST_CASE("build_dag: misplaced commands fail their span only") {
  Stm stm;
  stm.update_document(
      "Qed.\n"
      "auto.\n"
      "Theorem a : True.\n"
      "Proof.\n"
      "Theorem b : True.\n"
      "  exact I.\n"
      "Qed.\n"
      "Definition d := True.\n");
  const Dag& d = stm.dag();
  CHECK(d.build_errors.count(1));
  CHECK(d.build_errors.count(2));
  CHECK(d.build_errors.count(5));
  CHECK(d.build_errors.size() == 3);
  auto env = stm.master_environment();
  CHECK(env.contains("a"));
  CHECK(env.contains("d"));
  CHECK_FALSE(env.contains("b"));
}

TEST_CASE("errors: a failing proof is confined to its branch") {
  std::string doc = std::string(kDecidableDoc) + "Theorem t : True.\nProof.\n  fail.\nQed.\nDefinition after := True.\n";
  Stm stm;
  stm.update_document(doc);
  kernel::Environment env = stm.master_environment();
  CHECK(env.contains("after"));
  CHECK(testing::ref::awf(env));
  auto r = force_all(stm);
  REQUIRE(r.size() == 2);
  CHECK(std::holds_alternative<Term>(r[0]));
  REQUIRE(std::holds_alternative<kernel::PromiseFailure>(r[1]));
  const auto& f = std::get<kernel::PromiseFailure>(r[1]);
  REQUIRE(f.span_id);
  CHECK(stm.span(*f.span_id)->span.text == "fail.");
  CHECK(kernel::check_swf(env).size() == 1);
}

TEST_CASE("errors: a master error fails its span and what depends on it") {
  Stm stm;
  stm.update_document("Definition d := nosuch P.\nAxiom a : d.\n");
  CHECK_THROWS_AS(stm.master_environment(), StateError);
  std::map<SpanId, SpanStatus> st;
  ObserveHooks hooks;
  hooks.status = [&](SpanId s, SpanStatus v, const std::string&) { st[s] = v; };
  stm.observe({}, hooks);
  CHECK(st[1] == SpanStatus::Failed);
  CHECK(st.count(2) == 0);
}

TEST_CASE("update_document: identical text invalidates nothing") {
  Stm stm;
  auto first = stm.update_document(kDecidableDoc);
  CHECK(first.invalidated.size() == 6);
  stm.master_environment();
  auto again = stm.update_document(kDecidableDoc);
  CHECK(again.invalidated.empty());
  CHECK(again.removed.empty());
}

TEST_CASE("update_document: a proof edit reruns only that proof") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  auto s1 = stm.compute_state(1);
  auto s2 = stm.compute_state(2);
  force_all(stm);
  auto old_promise = *stm.promise_of(stm.dag().master_tip);
  stm.reset_counters();

  auto u = stm.update_document(replace(kDecidableDoc, "auto.", "auto 6."));
  // Proof., unfold and auto are new work; the master spans are not.
  CHECK(u.invalidated == std::set<SpanId>{3, 4, 7});
  CHECK(stm.compute_state(1) == s1);
  CHECK(stm.compute_state(2) == s2);
  auto r = force_all(stm);
  CHECK(std::holds_alternative<Term>(r[0]));
  CHECK(stm.counters().master == 0);
  CHECK(stm.counters().branch == 0);
  CHECK(stm.counters().pure == 3);
  CHECK_FALSE(stm.promise_of(stm.dag().master_tip)->same_cell(old_promise));
}

TEST_CASE("update_document: a definition edit invalidates everything after it") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  force_all(stm);
  stm.reset_counters();
  auto u = stm.update_document(replace(kDecidableDoc, "P \\/ ~ P", "~ P \\/ P"));
  CHECK(u.invalidated.size() == 6);
  auto r = force_all(stm);
  CHECK(stm.counters().master == 3);
  CHECK(stm.counters().pure == 3);
  // The new definition puts the provable disjunct first; the search
  // result changes accordingly.
  REQUIRE(std::holds_alternative<Term>(r[0]));
  CHECK(std::get<Term>(r[0]).is(Term::Kind::Inl));

  // Recomputing the new document from scratch gives the same environment.
  Stm fresh;
  fresh.update_document(replace(kDecidableDoc, "P \\/ ~ P", "~ P \\/ P"));
  force_all(fresh);
  CHECK(codec::canonical(codec::encode(fresh.master_environment(), codec::ProofMode::WithProofs)) ==
        codec::canonical(codec::encode(stm.master_environment(), codec::ProofMode::WithProofs)));
}

TEST_CASE("update_document: a moved proof keeps its promise") {
  Stm stm;
  stm.update_document(std::string(kDecidableDoc) + kAgain);
  force_all(stm);
  auto before = stm.master_environment();
  stm.reset_counters();
  auto u = stm.update_document(std::string(kDecidableDoc) + "\n\n" + kAgain);
  CHECK_FALSE(u.reusable.empty());
  force_all(stm);
  CHECK(stm.counters().pure == 0);
}

TEST_CASE("extrusion: keys do not survive serialization") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  auto s = stm.compute_state(stm.dag().master_tip);
  REQUIRE_FALSE(s->extruded.empty());
  CHECK(stm.extruded().get(s->extruded.front()).has_value());
  SystemState back = decode_state(encode_state(*s));
  CHECK(back.extruded.empty());
  CHECK(codec::canonical(encode_state(back)) == codec::canonical(encode_state(*s)));
  auto p = back.env.at(1).as_opaque()->promise->get();
  CHECK_FALSE(p.has_forcer());
  auto r = p.force();
  REQUIRE(std::holds_alternative<kernel::PromiseFailure>(r));
  CHECK(std::get<kernel::PromiseFailure>(r).infrastructure);
  CHECK_FALSE(stm.extruded().get(987654321).has_value());

  // Pruned states drop their entries.
  stm.update_document("");
  CHECK(stm.extruded().size() == 0);
}

TEST_CASE("memoization: recomputed states equal memoized ones") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::string doc = testing::generate_document(seed).text();
    Stm a;
    a.update_document(doc);
    Stm b;
    b.update_document(doc);
    for (StateId n : a.dag().nodes) {
      auto x = a.compute_state(n);
      auto y = b.compute_state(n);
      auto again = a.compute_state(n);
      CHECK(x == again);
      CHECK(codec::canonical(encode_state(*x)) == codec::canonical(encode_state(*y)));
    }
  }
}

TEST_CASE("observe: empty perspective enqueues every proof in document order") {
  std::string doc = std::string(kDecidableDoc) + kAgain + "Theorem t3 : True.\nProof.\n  exact I.\nQed.\n";
  Stm stm;
  stm.update_document(doc);
  std::vector<std::pair<SpanId, int>> jobs;
  std::map<SpanId, SpanStatus> st;
  ObserveHooks hooks;
  hooks.status = [&](SpanId s, SpanStatus v, const std::string&) { st[s] = v; };
  hooks.enqueue_proof = [&](ProofJob j, int prio) { jobs.push_back({j.qed_span, prio}); };
  stm.observe({}, hooks);
  REQUIRE(jobs.size() == 3);
  CHECK(jobs[0].first < jobs[1].first);
  CHECK(jobs[1].first < jobs[2].first);
  CHECK(jobs[0].second == jobs[2].second);
  CHECK(st.size() == 7);  // master spans only

  // A second pass does not enqueue again.
  jobs.clear();
  stm.observe({}, hooks);
  CHECK(jobs.empty());
}

TEST_CASE("observe: proofs near the perspective come first") {
  std::string doc = "Theorem t1 : True.\nProof.\n  exact I.\nQed.\n"
                    "Theorem t2 : True.\nProof.\n  exact I.\nQed.\n"
                    "Theorem t3 : True.\nProof.\n  exact I.\nQed.\n";
  Stm stm;
  stm.update_document(doc);
  std::vector<std::pair<SpanId, int>> jobs;
  ObserveHooks hooks;
  hooks.enqueue_proof = [&](ProofJob j, int prio) { jobs.push_back({j.qed_span, prio}); };
  stm.observe({12}, hooks);
  REQUIRE(jobs.size() == 3);
  CHECK(jobs[0].first == 12);
  CHECK(jobs[0].second > jobs[1].second);
  CHECK(jobs[1].second > jobs[2].second);
}

TEST_CASE("observe: a perspective inside a proof shows its goals") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  std::map<SpanId, std::string> goals;
  ObserveHooks hooks;
  hooks.goals = [&](SpanId s, const std::string& g) { goals[s] = g; };
  stm.observe({4}, hooks);
  REQUIRE(goals.count(4));

  kernel::Environment env = kernel::env_add_definition(
      {}, "decidable", {"P"}, Formula::disj(Formula::atom("P"), Formula::impl(Formula::atom("P"), Formula::falsity())));
  auto ps = engine::start_proof(env, Formula::def_app("decidable", {Formula::falsity()}));
  ps = engine::apply_tactic(env, ps, engine::TacticAst::unfold({"decidable", "not"}));
  CHECK(goals[4] == engine::render_goals(ps));
  CHECK(stm.counters().branch == 2);
}

TEST_CASE("observe: the interrupt hook abandons the pass") {
  Stm stm;
  stm.update_document(std::string(kDecidableDoc) + kAgain);
  int statuses = 0;
  ObserveHooks hooks;
  hooks.status = [&](SpanId, SpanStatus, const std::string&) { ++statuses; };
  hooks.interrupted = [] { return true; };
  stm.observe({}, hooks);
  CHECK(statuses <= 1);
}

TEST_CASE("run_query: Check and Print") {
  Stm stm;
  stm.update_document(std::string(kDecidableDoc) + "Check decidable False.\nPrint dec_False.\n");
  auto q = stm.dag().query_state;
  REQUIRE(q.size() == 2);
  auto state = stm.compute_state(q.begin()->second);
  CHECK(run_query(*state, stm.span(q.begin()->first)->parsed->ast) == "decidable False : Prop");
  std::string printed = run_query(*state, stm.span(std::next(q.begin())->first)->parsed->ast);
  CHECK(printed.find("dec_False") != std::string::npos);
  CHECK_THROWS(run_query(*state, vernac::parse("Print nosuch.").ast));
}

}  // namespace
}  // namespace sprover::stm
