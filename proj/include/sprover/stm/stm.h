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

// The state transaction machine. A document is a DAG whose nodes are system
// states and whose labeled edges are commands. Opaque proofs live on their
// own branches and reach the master branch only as proof promises.

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sprover/cancel.h"
#include "sprover/codec/codec.h"
#include "sprover/engine/engine.h"
#include "sprover/kernel/typecheck.h"
#include "sprover/vernac/vernac.h"

namespace sprover::stm {

using StateId = std::uint64_t;
using vernac::SpanId;

inline constexpr StateId kInitialState = 0;

// Loads a compiled module for Require. Returns the environment extended with
// the module's entries. Throws std::runtime_error.
using RequireLoader =
    std::function<kernel::Environment(const kernel::Environment&, const std::string& module)>;

struct Transaction {
  // Empty for the unlabeled edge from a Qed node to its branch tip.
  std::optional<vernac::CommandAst> label;
  std::optional<SpanId> span;
  // Set on the master-side duplicate of a global command found in a proof.
  std::optional<SpanId> twin_of;
};

struct Edge {
  StateId from = 0;
  StateId to = 0;
  Transaction tx;
};

struct ProofBranch {
  std::string name;
  kernel::Formula statement;
  SpanId theorem_span = 0;
  // Theorem node on master; the branch's base state.
  StateId root = 0;
  StateId tip = 0;
  // Branch spans in document order, excluding Theorem and Qed.
  std::vector<SpanId> spans;
  std::optional<SpanId> qed_span;
  std::optional<StateId> qed_node;
  // Text of the statement and of the branch, for promise reuse.
  std::string statement_text;
  std::string body_text;
};

// A span as the DAG builder sees it.
struct DocSpan {
  vernac::Span span;
  std::optional<vernac::ParsedCommand> parsed;
  // Parse error message; set exactly when `parsed` is empty.
  std::string error;
};

std::vector<DocSpan> parse_spans(const std::vector<vernac::Span>& spans);

struct Dag {
  // Creation order; node 0 first.
  std::vector<StateId> nodes;
  std::vector<Edge> edges;
  // "master" and one entry per proof branch, keyed by theorem name.
  std::map<std::string, StateId> branches;
  StateId master_tip = kInitialState;
  std::vector<ProofBranch> proofs;
  // Spans rejected while building (parse errors, misplaced commands).
  std::map<SpanId, std::string> build_errors;
  // Node reached by the edge a span labels; for twinned commands this is the
  // branch-side node.
  std::map<SpanId, StateId> span_node;
  std::map<SpanId, StateId> twin_node;
  // Query spans and the master state they read.
  std::map<SpanId, StateId> query_state;

  // The labeled edge entering `node`, if any.
  const Edge* parent_edge(StateId node) const;
  const ProofBranch* branch_of_span(SpanId span) const;
  const ProofBranch* branch_of_qed(StateId qed_node) const;
  bool on_master(StateId node) const;
  std::size_t labeled_edge_count() const;
  std::size_t unlabeled_edge_count() const;

  // Precomputed lookup tables.
  std::map<StateId, std::size_t> parent_index;
  std::set<StateId> master_nodes;
};

// Decides the id of a node created by a transaction with the given text
// from `parent`. `role` is 'M' (master), 'B' (branch) or 'T' (master twin).
using NodeAllocator = std::function<StateId(StateId parent, char role, const std::string& text)>;

struct BuildOptions {
  // Duplicate global commands found inside proofs onto master.
  bool duplicate_globals = true;
  // Defaults to consecutive ids starting at 1.
  NodeAllocator allocate;
};

Dag build_dag(const std::vector<DocSpan>& spans, const BuildOptions& options = {});

struct SystemState {
  kernel::Environment env;
  engine::HintDb hints;
  std::optional<engine::ProofState> proof;
  // Keys into the session's extruded table, owned by this state.
  std::vector<std::uint64_t> extruded;
};

// Snapshot encoding. Extruded keys are not written: they are only valid in
// the process that issued them.
codec::Json encode_state(const SystemState& s);
SystemState decode_state(const codec::Json& j);

// One program step of a proof branch.
struct Step {
  vernac::CommandAst command;
  SpanId span = 0;
};

// A proof branch detached from the document: everything needed to produce
// the proof term, and nothing else.
struct PureComputation {
  StateId base = 0;
  std::shared_ptr<const SystemState> base_state;
  std::vector<Step> program;
  kernel::Formula produces;
  std::string name;
  // Span charged with errors that belong to no step (open goals at the end).
  SpanId closing_span = 0;
  CancelSwitch cancel;
};

codec::Json encode_program(const std::vector<Step>& program);
std::vector<Step> decode_program(const codec::Json& j);

struct RunHooks {
  const engine::ParRunner* par_runner = nullptr;
  // Incremented once per executed step.
  std::atomic<std::uint64_t>* executed = nullptr;
};

// Runs a branch program from `base`. The final state is discarded; only the
// checked term (or the failure) is returned.
kernel::PromiseResult run_program(const SystemState& base, const std::vector<Step>& program,
                                  const kernel::Formula& produces, SpanId closing_span,
                                  const CancelSwitch& cancel, const RunHooks& hooks = {});

// Query output, e.g. "decidable False : Prop". Throws std::runtime_error.
std::string run_query(const SystemState& state, const vernac::CommandAst& query);

// Side table for local-only data referenced from states by key. Keys are
// unique within the process and never reused; entries disappear when the
// state that owns them is pruned.
class ExtrudedTable {
 public:
  std::uint64_t put(StateId owner, PureComputation comp);
  std::optional<PureComputation> get(std::uint64_t key) const;
  void erase(std::uint64_t key);
  // Drops every entry whose owner is not in `live`.
  void prune(const std::set<StateId>& live);
  std::size_t size() const;

 private:
  struct Entry {
    StateId owner;
    PureComputation comp;
  };
  mutable std::mutex mu_;
  std::map<std::uint64_t, Entry> entries_;
};

// A failure while computing a state.
class StateError : public std::runtime_error {
 public:
  StateError(const std::string& message, StateId failed_at, std::optional<SpanId> span)
      : std::runtime_error(message), failed_at_(failed_at), span_(span) {}
  // Node whose own transaction failed.
  StateId failed_at() const { return failed_at_; }
  std::optional<SpanId> span() const { return span_; }

 private:
  StateId failed_at_;
  std::optional<SpanId> span_;
};

struct StmOptions {
  // Runs par: subtasks; sequential when empty.
  engine::ParRunner par_runner;
  RequireLoader require;
  bool duplicate_globals = true;
};

struct Counters {
  std::uint64_t master = 0;   // master transactions run by compute_state
  std::uint64_t branch = 0;   // branch transactions run by compute_state
  std::uint64_t pure = 0;     // steps run inside pure computations
};

struct UpdateResult {
  // New spans that need (re)processing: all spans whose state or proof is
  // new in this revision.
  std::set<SpanId> invalidated;
  // Promises carried over unchanged.
  std::vector<kernel::ProofPromise> reusable;
  // Spans of the previous revision that no longer exist.
  std::set<SpanId> removed;
};

// One opaque proof awaiting its term.
struct ProofJob {
  PureComputation comp;
  kernel::ProofPromise promise;
  SpanId qed_span = 0;
  StateId qed_node = 0;
};

enum class SpanStatus { Processing, Processed, Failed };
const char* to_string(SpanStatus s);

struct StatusEvent {
  SpanId span = 0;
  SpanStatus status = SpanStatus::Processing;
  std::string message;
};

struct Hyperlink {
  std::size_t offset = 0;  // in the document
  std::size_t length = 0;
  std::string name;
  std::optional<SpanId> target;
};

struct ObserveHooks {
  std::function<void(SpanId, SpanStatus, const std::string& message)> status;
  std::function<void(SpanId, const std::string& goals)> goals;
  std::function<void(SpanId, const std::vector<Hyperlink>&)> markup;
  // A promise to be resolved asynchronously; higher priority first.
  std::function<void(ProofJob, int priority)> enqueue_proof;
  // A proof enqueued by an earlier pass, with its priority for this pass.
  std::function<void(StateId qed_node, int priority)> reprioritize;
  // Query spans in the perspective, with the state they read.
  std::function<void(SpanId, const vernac::CommandAst&, std::shared_ptr<const SystemState>,
                     int priority)>
      enqueue_query;
  // Polled between transactions; returning true abandons the pass.
  std::function<bool()> interrupted;
};

// The document session. Owns the DAG, the memo of computed states and the
// extruded table. Not thread-safe: one owner drives it; promises it hands out
// may be forced or resolved from any thread.
class Stm {
 public:
  explicit Stm(StmOptions options = {});
  ~Stm();
  Stm(const Stm&) = delete;
  Stm& operator=(const Stm&) = delete;

  // Replaces the document. Spans of the unchanged prefix keep their ids.
  UpdateResult update_document(std::string_view text);

  const std::string& text() const { return text_; }
  const std::vector<DocSpan>& spans() const { return spans_; }
  const DocSpan* span(SpanId id) const;
  const Dag& dag() const { return dag_; }

  // Memoized. Throws StateError.
  std::shared_ptr<const SystemState> compute_state(StateId target);
  bool is_computed(StateId node) const;

  // Computes the master tip and returns its environment. Throws StateError.
  kernel::Environment master_environment();

  // Installs the computation's base state, runs it and restores whatever
  // state was installed before. The outcome is not memoized here; callers
  // memoize it in the promise.
  kernel::PromiseResult future_force(const PureComputation& comp);
  std::shared_ptr<const SystemState> installed() const { return installed_; }

  // The current promise of the proof closed by `qed_node`, once the Qed
  // transaction ran.
  std::optional<kernel::ProofPromise> promise_of(StateId qed_node) const;
  std::optional<PureComputation> computation_of(StateId qed_node) const;
  const ExtrudedTable& extruded() const;

  Counters counters() const;
  void reset_counters();

  // Computes states and hands out work, favoring spans near `perspective`.
  // Master states on the way to the perspective come first; proofs are
  // enqueued with priority decreasing with their distance to it.
  void observe(const std::set<SpanId>& perspective, const ObserveHooks& hooks);

  // Statuses of a branch's spans once its promise has an outcome. Spans
  // after a failing step get none: they never ran.
  std::vector<StatusEvent> branch_statuses(const ProofBranch& b,
                                           const kernel::PromiseResult& r) const;

  // Hyperlinks of a span, resolved against the state it runs in.
  std::vector<Hyperlink> hyperlinks(SpanId span, const SystemState& state) const;

 private:
  struct Runtime;
  struct Memo {
    std::shared_ptr<const SystemState> state;
    std::string error;
    StateId failed_at = 0;
  };
  struct ProofRecord {
    std::shared_ptr<kernel::PromiseSlot> slot;
    kernel::ProofPromise promise;
    std::uint64_t key = 0;
    StateId tip = 0;
    std::string body_text;
  };

  SystemState execute(const SystemState& s, const Edge& e);
  std::optional<SpanId> span_of_node(StateId node) const;
  void rebind_changed_proofs(UpdateResult& result);
  PureComputation detach(const ProofBranch& b) const;
  kernel::ProofPromise delegate(const PureComputation& comp, StateId owner, std::uint64_t& key);
  std::size_t span_index(SpanId id) const;

  StmOptions options_;
  std::shared_ptr<Runtime> runtime_;
  std::string text_;
  std::vector<DocSpan> spans_;
  Dag dag_;
  std::map<StateId, Memo> memo_;
  std::map<StateId, ProofRecord> proofs_;
  std::shared_ptr<const SystemState> installed_;
  std::set<std::uint64_t> enqueued_keys_;
  StateId next_id_ = 1;
  SpanId next_span_ = 1;
};

}  // namespace sprover::stm
