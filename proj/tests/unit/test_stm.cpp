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

#include <string>

#include "doctest.h"
#include "fixtures.h"
#include "sprover/stm/stm.h"

namespace sprover::stm {
namespace {

using kernel::Formula;
using kernel::Term;
using testing::kDecidableDoc;
using testing::kHintDoc;

const Edge* edge_to(const Dag& d, StateId to, bool labeled) {
  for (const auto& e : d.edges) {
    if (e.to == to && e.tx.label.has_value() == labeled) return &e;
  }
  return nullptr;
}

std::string label_head(const Edge& e) {
  return vernac::to_string(*e.tx.label).substr(0, 5);
}

Term dec_false_witness() {
  return Term::inr(Term::lam("h", Formula::falsity(), Term::var("h")), Formula::falsity());
}

TEST_CASE("build_dag: decidable document has the expected shape") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  const Dag& d = stm.dag();
  CHECK(d.nodes.size() == 7);
  CHECK(d.labeled_edge_count() == 6);
  CHECK(d.unlabeled_edge_count() == 1);

  // Master path 0 -> 1 -> 2 -> 6.
  CHECK(d.master_tip == 6);
  REQUIRE(edge_to(d, 1, true));
  CHECK(edge_to(d, 1, true)->from == 0);
  CHECK(label_head(*edge_to(d, 1, true)) == "Defin");
  CHECK(edge_to(d, 2, true)->from == 1);
  CHECK(label_head(*edge_to(d, 2, true)) == "Theor");
  CHECK(edge_to(d, 6, true)->from == 2);
  CHECK(label_head(*edge_to(d, 6, true)) == "Qed.");

  // Branch 2 -> 3 -> 4 -> 5 and the unlabeled 6 -> 5.
  CHECK(edge_to(d, 3, true)->from == 2);
  CHECK(edge_to(d, 4, true)->from == 3);
  CHECK(edge_to(d, 5, true)->from == 4);
  const Edge* link = edge_to(d, 5, false);
  REQUIRE(link);
  CHECK(link->from == 6);
  CHECK(d.master_nodes == std::set<StateId>{0, 1, 2, 6});
  CHECK(d.build_errors.empty());
}

TEST_CASE("build_dag: empty document is the initial state") {
  Dag d = build_dag({});
  CHECK(d.nodes == std::vector<StateId>{0});
  CHECK(d.master_tip == 0);
  CHECK(d.edges.empty());
}

TEST_CASE("build_dag: a global command inside a proof is placed twice") {
  Stm stm;
  stm.update_document(kHintDoc);
  const Dag& d = stm.dag();
  int hints = 0, twins = 0;
  for (const auto& e : d.edges) {
    if (e.tx.label && std::holds_alternative<vernac::HintCmd>(*e.tx.label)) {
      ++hints;
      if (e.tx.twin_of) ++twins;
    }
  }
  CHECK(hints == 2);
  CHECK(twins == 1);
  // The Qed edge leaves the twin's node.
  const Edge* qed = edge_to(d, d.master_tip, true);
  REQUIRE(qed);
  CHECK(d.twin_node.count(qed->from) == 0);
  CHECK(edge_to(d, qed->from, true)->tx.twin_of.has_value());
}

TEST_CASE("compute_state: reaching the Qed state runs the three master transactions") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  auto s = stm.compute_state(stm.dag().master_tip);
  CHECK(stm.counters().master == 3);
  CHECK(stm.counters().branch == 0);
  CHECK(stm.counters().pure == 0);
  REQUIRE(s->env.size() == 2);
  CHECK(s->env.at(1).as_opaque()->promise->get().status() == kernel::ProofPromise::Status::Delegated);

  stm.reset_counters();
  stm.compute_state(0);
  stm.compute_state(stm.dag().master_tip);
  CHECK(stm.counters().master == 0);
}

TEST_CASE("future_force: the decidable branch produces the expected witness") {
  Stm stm;
  stm.update_document(kDecidableDoc);
  auto before = stm.compute_state(stm.dag().master_tip);
  auto comp = stm.computation_of(stm.dag().master_tip);
  REQUIRE(comp);
  auto r = stm.future_force(*comp);
  REQUIRE(std::holds_alternative<Term>(r));
  CHECK(std::get<Term>(r) == dec_false_witness());
  CHECK(stm.installed() == before);
  CHECK(stm.counters().pure == 3);

  auto promise = stm.promise_of(stm.dag().master_tip);
  REQUIRE(promise);
  auto forced = promise->force();
  CHECK(std::get<Term>(forced) == dec_false_witness());
  CHECK(kernel::check_swf(stm.master_environment()).empty());
}

}  // namespace
}  // namespace sprover::stm
