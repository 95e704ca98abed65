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

#include "sprover/stm/stm.h"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <tuple>

namespace sprover::stm {

using codec::Json;
using kernel::Formula;
using kernel::PromiseFailure;
using kernel::PromiseResult;
using kernel::ProofPromise;

namespace {

std::atomic<std::uint64_t> g_next_key{1};

enum class Side { Master, Branch };

// Executes every command except Qed, which needs the session.
SystemState apply_command(const SystemState& s, const vernac::CommandAst& cmd, Side side,
                          const RequireLoader* require, const engine::TacticContext& ctx) {
  SystemState out = s;
  if (const auto* d = std::get_if<vernac::DefinitionCmd>(&cmd)) {
    Formula body = vernac::resolve_formula(s.env, d->body, d->params);
    out.env = kernel::env_add_definition(s.env, d->name, d->params, body);
  } else if (const auto* a = std::get_if<vernac::AxiomCmd>(&cmd)) {
    Formula st = vernac::resolve_formula(s.env, a->statement);
    out.env = kernel::env_add_axiom(s.env, a->name, st);
  } else if (const auto* t = std::get_if<vernac::TheoremCmd>(&cmd)) {
    Formula st = vernac::resolve_formula(s.env, t->statement);
    if (s.env.contains(t->name)) throw kernel::KernelError("'" + t->name + "' already exists");
    out.proof = engine::start_proof(s.env, st, s.hints);
  } else if (const auto* h = std::get_if<vernac::HintCmd>(&cmd)) {
    if (side == Side::Branch) {
      if (!out.proof) throw engine::TacticError("no proof in progress");
      out.proof->hints = engine::add_hints(s.env, out.proof->hints, h->kind, h->names);
    } else {
      out.hints = engine::add_hints(s.env, s.hints, h->kind, h->names);
    }
  } else if (const auto* tc = std::get_if<vernac::TacticCmd>(&cmd)) {
    if (!out.proof) throw engine::TacticError("no proof in progress");
    out.proof = engine::apply_tactic(s.env, *out.proof, tc->tactic, ctx);
  } else if (const auto* r = std::get_if<vernac::RequireCmd>(&cmd)) {
    if (!require || !*require) throw std::runtime_error("Require: no module loader available");
    out.env = (*require)(s.env, r->module);
  } else {
    throw std::runtime_error("command cannot be executed here: " + vernac::to_string(cmd));
  }
  return out;
}

PromiseFailure cancelled_failure() { return PromiseFailure{"cancelled", std::nullopt, true, false}; }

std::string render_params(const std::vector<std::string>& params) {
  std::string s;
  for (const auto& p : params) s += " (" + p + " : Prop)";
  return s;
}

}  // namespace

std::vector<DocSpan> parse_spans(const std::vector<vernac::Span>& spans) {
  std::vector<DocSpan> out;
  out.reserve(spans.size());
  for (const auto& sp : spans) {
    DocSpan d{sp, std::nullopt, {}};
    try {
      d.parsed = vernac::parse(sp);
    } catch (const vernac::ParseError& e) {
      d.error = e.what();
    }
    out.push_back(std::move(d));
  }
  return out;
}

const Edge* Dag::parent_edge(StateId node) const {
  auto it = parent_index.find(node);
  return it == parent_index.end() ? nullptr : &edges[it->second];
}

const ProofBranch* Dag::branch_of_span(SpanId span) const {
  for (const auto& p : proofs) {
    if (std::find(p.spans.begin(), p.spans.end(), span) != p.spans.end()) return &p;
  }
  return nullptr;
}

const ProofBranch* Dag::branch_of_qed(StateId qed_node) const {
  for (const auto& p : proofs) {
    if (p.qed_node == qed_node) return &p;
  }
  return nullptr;
}

bool Dag::on_master(StateId node) const { return master_nodes.count(node) != 0; }

std::size_t Dag::labeled_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.tx.label.has_value(); }));
}

std::size_t Dag::unlabeled_edge_count() const { return edges.size() - labeled_edge_count(); }

Dag build_dag(const std::vector<DocSpan>& spans, const BuildOptions& options) {
  Dag d;
  d.nodes.push_back(kInitialState);
  d.master_nodes.insert(kInitialState);
  StateId counter = 1;
  NodeAllocator allocate = options.allocate;
  if (!allocate) {
    allocate = [&counter](StateId, char, const std::string&) { return counter++; };
  }

  auto add_node = [&](StateId from, char role, const std::string& text, Transaction tx) {
    StateId n = allocate(from, role, text);
    d.nodes.push_back(n);
    if (role != 'B') d.master_nodes.insert(n);
    d.parent_index[n] = d.edges.size();
    d.edges.push_back(Edge{from, n, std::move(tx)});
    return n;
  };

  std::optional<std::size_t> open;
  for (const auto& ds : spans) {
    const SpanId id = ds.span.id;
    if (!ds.parsed) {
      d.build_errors[id] = ds.error;
      continue;
    }
    const auto& ast = ds.parsed->ast;
    const std::string& text = ds.span.text;
    switch (vernac::classify(ast)) {
      case vernac::Classification::Query:
        d.query_state[id] = d.master_tip;
        break;
      case vernac::Classification::Global:
        if (open) {
          if (std::holds_alternative<vernac::RequireCmd>(ast)) {
            d.build_errors[id] = "Require is not allowed inside a proof";
            break;
          }
          ProofBranch& p = d.proofs[*open];
          p.tip = add_node(p.tip, 'B', text, Transaction{ast, id, std::nullopt});
          d.span_node[id] = p.tip;
          p.spans.push_back(id);
          p.body_text += text + "\n";
          if (options.duplicate_globals) {
            d.master_tip = add_node(d.master_tip, 'T', text, Transaction{ast, id, id});
            d.twin_node[id] = d.master_tip;
          }
        } else {
          d.master_tip = add_node(d.master_tip, 'M', text, Transaction{ast, id, std::nullopt});
          d.span_node[id] = d.master_tip;
        }
        break;
      case vernac::Classification::Branch: {
        if (open) {
          d.build_errors[id] = "nested proof: '" + d.proofs[*open].name + "' is still open";
          break;
        }
        const auto& th = std::get<vernac::TheoremCmd>(ast);
        d.master_tip = add_node(d.master_tip, 'M', text, Transaction{ast, id, std::nullopt});
        d.span_node[id] = d.master_tip;
        ProofBranch p;
        p.name = th.name;
        p.statement = th.statement;
        p.theorem_span = id;
        p.root = p.tip = d.master_tip;
        p.statement_text = text;
        d.proofs.push_back(std::move(p));
        open = d.proofs.size() - 1;
        break;
      }
      case vernac::Classification::Tactic: {
        if (!open) {
          d.build_errors[id] = "tactic outside a proof";
          break;
        }
        ProofBranch& p = d.proofs[*open];
        p.tip = add_node(p.tip, 'B', text, Transaction{ast, id, std::nullopt});
        d.span_node[id] = p.tip;
        p.spans.push_back(id);
        p.body_text += text + "\n";
        break;
      }
      case vernac::Classification::Merge: {
        if (!open) {
          d.build_errors[id] = "Qed without an open proof";
          break;
        }
        ProofBranch& p = d.proofs[*open];
        d.master_tip = add_node(d.master_tip, 'M', text, Transaction{ast, id, std::nullopt});
        d.span_node[id] = d.master_tip;
        d.edges.push_back(Edge{d.master_tip, p.tip, Transaction{}});
        p.qed_span = id;
        p.qed_node = d.master_tip;
        d.branches[p.name] = p.tip;
        open.reset();
        break;
      }
    }
  }
  if (open) {
    const ProofBranch& p = d.proofs[*open];
    d.build_errors[p.theorem_span] = "proof of '" + p.name + "' is not closed";
    d.branches[p.name] = p.tip;
  }
  d.branches["master"] = d.master_tip;
  return d;
}

Json encode_state(const SystemState& s) {
  return Json{{"env", codec::encode(s.env, codec::ProofMode::StatementsOnly)},
              {"hints", codec::encode(s.hints)},
              {"proof", s.proof ? codec::encode(*s.proof) : Json(nullptr)}};
}

SystemState decode_state(const Json& j) {
  if (!j.is_object() || !j.contains("env") || !j.contains("hints") || !j.contains("proof")) {
    throw codec::DecodeError("malformed state snapshot");
  }
  SystemState s;
  s.env = codec::decode_environment(j.at("env"));
  s.hints = codec::decode_hints(j.at("hints"));
  if (!j.at("proof").is_null()) s.proof = codec::decode_proof_state(j.at("proof"));
  return s;
}

Json encode_program(const std::vector<Step>& program) {
  Json out = Json::array();
  for (const auto& s : program) out.push_back(Json{{"command", codec::encode(s.command)}, {"span", s.span}});
  return out;
}

std::vector<Step> decode_program(const Json& j) {
  if (!j.is_array()) throw codec::DecodeError("program must be an array");
  std::vector<Step> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("command") || !e.contains("span")) {
      throw codec::DecodeError("malformed program step");
    }
    out.push_back(Step{codec::decode_command(e.at("command")), e.at("span").get<SpanId>()});
  }
  return out;
}

PromiseResult run_program(const SystemState& base, const std::vector<Step>& program,
                          const Formula& produces, SpanId closing_span, const CancelSwitch& cancel,
                          const RunHooks& hooks) {
  SystemState state = base;
  engine::TacticContext ctx{hooks.par_runner, &cancel};
  for (const auto& step : program) {
    if (cancel.is_set()) return cancelled_failure();
    if (hooks.executed) hooks.executed->fetch_add(1, std::memory_order_relaxed);
    try {
      state = apply_command(state, step.command, Side::Branch, nullptr, ctx);
    } catch (const engine::TacticError& e) {
      if (e.cancelled()) return cancelled_failure();
      return PromiseFailure{e.what(), step.span, false, false};
    } catch (const std::exception& e) {
      return PromiseFailure{e.what(), step.span, false, false};
    }
  }
  if (!state.proof) return PromiseFailure{"no proof in progress", closing_span, false, false};
  try {
    kernel::Term term = engine::finish_proof(*state.proof);
    kernel::typecheck(state.env, {}, term, produces);
    return term;
  } catch (const kernel::TypeError& e) {
    return PromiseFailure{std::string("proof term rejected: ") + e.what(), closing_span, false, false};
  } catch (const std::exception& e) {
    return PromiseFailure{e.what(), closing_span, false, false};
  }
}

std::string run_query(const SystemState& state, const vernac::CommandAst& query) {
  if (const auto* c = std::get_if<vernac::CheckCmd>(&query)) {
    Formula f = vernac::resolve_formula(state.env, c->formula);
    return kernel::to_string(f) + " : Prop";
  }
  if (const auto* p = std::get_if<vernac::PrintCmd>(&query)) {
    const kernel::EnvEntry* e = state.env.find(p->name);
    if (!e) throw std::runtime_error("unknown name '" + p->name + "'");
    if (const auto* d = e->as_definition()) {
      return "Definition " + d->name + render_params(d->params) + " := " + kernel::to_string(d->body);
    }
    if (const auto* a = e->as_axiom()) return "Axiom " + a->name + " : " + kernel::to_string(a->statement);
    const auto* o = e->as_opaque();
    return "Theorem " + o->name + " : " + kernel::to_string(o->statement) + " (opaque)";
  }
  throw std::runtime_error("not a query: " + vernac::to_string(query));
}

std::uint64_t ExtrudedTable::put(StateId owner, PureComputation comp) {
  std::uint64_t key = g_next_key.fetch_add(1);
  std::lock_guard lock(mu_);
  entries_.emplace(key, Entry{owner, std::move(comp)});
  return key;
}

std::optional<PureComputation> ExtrudedTable::get(std::uint64_t key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.comp;
}

void ExtrudedTable::erase(std::uint64_t key) {
  std::lock_guard lock(mu_);
  entries_.erase(key);
}

void ExtrudedTable::prune(const std::set<StateId>& live) {
  std::lock_guard lock(mu_);
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (live.count(it->second.owner)) {
      ++it;
    } else {
      it->second.comp.cancel.set();
      it = entries_.erase(it);
    }
  }
}

std::size_t ExtrudedTable::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

const char* to_string(SpanStatus s) {
  switch (s) {
    case SpanStatus::Processing: return "processing";
    case SpanStatus::Processed: return "processed";
    case SpanStatus::Failed: return "failed";
  }
  return "?";
}

// State shared with promise forcers, which may outlive a document revision
// and run on other threads.
struct Stm::Runtime {
  ExtrudedTable table;
  engine::ParRunner par_runner;
  std::atomic<std::uint64_t> master{0};
  std::atomic<std::uint64_t> branch{0};
  std::atomic<std::uint64_t> pure{0};

  PromiseResult run(const PureComputation& comp) {
    if (comp.cancel.is_set()) return cancelled_failure();
    RunHooks hooks{par_runner ? &par_runner : nullptr, &pure};
    return run_program(*comp.base_state, comp.program, comp.produces, comp.closing_span,
                       comp.cancel, hooks);
  }
};

Stm::Stm(StmOptions options) : options_(std::move(options)), runtime_(std::make_shared<Runtime>()) {
  runtime_->par_runner = options_.par_runner;
  auto initial = std::make_shared<const SystemState>();
  memo_[kInitialState] = Memo{initial, {}, 0};
  installed_ = initial;
  dag_ = build_dag({});
}

Stm::~Stm() {
  // Outstanding promises stay forceable only while the session lives.
  runtime_->table.prune({});
}

const DocSpan* Stm::span(SpanId id) const {
  for (const auto& s : spans_) {
    if (s.span.id == id) return &s;
  }
  return nullptr;
}

std::size_t Stm::span_index(SpanId id) const {
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    if (spans_[i].span.id == id) return i;
  }
  return spans_.size();
}

std::optional<SpanId> Stm::span_of_node(StateId node) const {
  const Edge* e = dag_.parent_edge(node);
  if (!e) return std::nullopt;
  return e->tx.span;
}

UpdateResult Stm::update_document(std::string_view text) {
  UpdateResult result;

  // Span ids: the unchanged prefix keeps them, everything else is new.
  std::vector<vernac::Span> chopped = vernac::chop(text);
  std::size_t common = 0;
  while (common < chopped.size() && common < spans_.size()) {
    const vernac::Span& o = spans_[common].span;
    const vernac::Span& n = chopped[common];
    if (o.text != n.text || o.offset != n.offset || o.unparsable != n.unparsable) break;
    ++common;
  }
  for (std::size_t i = 0; i < chopped.size(); ++i) {
    chopped[i].id = i < common ? spans_[i].span.id : next_span_++;
  }

  // Node ids: a node created by the same transaction text from the same
  // parent denotes the same state, so it keeps its id and its memo entry.
  std::map<std::tuple<StateId, char, std::string>, StateId> old_keys;
  for (const auto& e : dag_.edges) {
    if (!e.tx.label || !e.tx.span) continue;
    const DocSpan* ds = span(*e.tx.span);
    if (!ds) continue;
    char role = e.tx.twin_of ? 'T' : (dag_.on_master(e.to) ? 'M' : 'B');
    old_keys[{e.from, role, ds->span.text}] = e.to;
  }
  std::set<StateId> used;
  BuildOptions bo;
  bo.duplicate_globals = options_.duplicate_globals;
  bo.allocate = [&](StateId parent, char role, const std::string& t) {
    auto it = old_keys.find({parent, role, t});
    if (it != old_keys.end() && used.insert(it->second).second) return it->second;
    StateId n = next_id_++;
    used.insert(n);
    return n;
  };

  std::vector<DocSpan> old_spans = std::move(spans_);
  Dag old_dag = std::move(dag_);
  spans_ = parse_spans(chopped);
  dag_ = build_dag(spans_, bo);
  text_ = std::string(text);

  std::set<SpanId> new_ids;
  for (const auto& s : spans_) new_ids.insert(s.span.id);
  for (const auto& s : old_spans) {
    if (!new_ids.count(s.span.id)) result.removed.insert(s.span.id);
  }

  const std::set<StateId> live(dag_.nodes.begin(), dag_.nodes.end());
  for (auto it = memo_.begin(); it != memo_.end();) {
    it = live.count(it->first) ? std::next(it) : memo_.erase(it);
  }
  for (auto it = proofs_.begin(); it != proofs_.end();) {
    if (live.count(it->first)) {
      ++it;
    } else {
      enqueued_keys_.erase(it->second.key);
      it = proofs_.erase(it);
    }
  }
  runtime_->table.prune(live);
  rebind_changed_proofs(result);

  // Everything at or after the first changed span whose state or proof is
  // not carried over needs processing.
  const std::set<StateId> old_nodes(old_dag.nodes.begin(), old_dag.nodes.end());
  for (std::size_t i = common; i < spans_.size(); ++i) {
    const SpanId id = spans_[i].span.id;
    auto it = dag_.span_node.find(id);
    bool reused = it != dag_.span_node.end() && old_nodes.count(it->second) && memo_.count(it->second);
    if (reused && !dag_.on_master(it->second)) {
      const ProofBranch* b = dag_.branch_of_span(id);
      reused = b && b->qed_node && proofs_.count(*b->qed_node) &&
               std::any_of(result.reusable.begin(), result.reusable.end(), [&](const ProofPromise& p) {
                 return p.same_cell(proofs_.at(*b->qed_node).promise);
               });
    }
    if (!reused) result.invalidated.insert(id);
  }
  return result;
}

PureComputation Stm::detach(const ProofBranch& b) const {
  PureComputation comp;
  comp.base = b.root;
  comp.base_state = memo_.at(b.root).state;
  for (StateId n = b.tip; n != b.root;) {
    const Edge* e = dag_.parent_edge(n);
    comp.program.push_back(Step{*e->tx.label, *e->tx.span});
    n = e->from;
  }
  std::reverse(comp.program.begin(), comp.program.end());
  comp.produces = comp.base_state->proof->statement;
  comp.name = b.name;
  comp.closing_span = b.spans.empty() ? *b.qed_span : b.spans.back();
  return comp;
}

// The promise finds its computation through the extruded table, so it stops
// being forceable once the owning state is pruned.
ProofPromise Stm::delegate(const PureComputation& comp, StateId owner, std::uint64_t& key) {
  key = runtime_->table.put(owner, comp);
  std::weak_ptr<Runtime> weak = runtime_;
  return ProofPromise::delegated(
      comp.produces, comp.base, key, [weak, key]() -> PromiseResult {
        auto rt = weak.lock();
        if (!rt) return PromiseFailure{"session closed", std::nullopt, false, true};
        auto c = rt->table.get(key);
        if (!c) return PromiseFailure{"computation handle is no longer valid", std::nullopt, false, true};
        return rt->run(*c);
      });
}

void Stm::rebind_changed_proofs(UpdateResult& result) {
  for (const auto& b : dag_.proofs) {
    if (!b.qed_node) continue;
    auto it = proofs_.find(*b.qed_node);
    if (it == proofs_.end()) continue;
    ProofRecord& rec = it->second;
    if (rec.tip == b.tip) {
      result.reusable.push_back(rec.promise);
      continue;
    }
    // Same statement, same position, different proof: only the promise
    // changes. Every state holding the entry sees the new one via the slot.
    if (auto old = runtime_->table.get(rec.key)) old->cancel.set();
    runtime_->table.erase(rec.key);
    enqueued_keys_.erase(rec.key);

    PureComputation comp = detach(b);
    std::uint64_t key = 0;
    ProofPromise promise = delegate(comp, *b.qed_node, key);
    rec.slot->rebind(promise);
    rec.promise = promise;
    rec.key = key;
    rec.tip = b.tip;
    rec.body_text = b.body_text;
    // Every step of the branch gets a new outcome, including unchanged ones.
    result.invalidated.insert(b.spans.begin(), b.spans.end());
  }
}

SystemState Stm::execute(const SystemState& s, const Edge& e) {
  const vernac::CommandAst& cmd = *e.tx.label;
  if (!std::holds_alternative<vernac::QedCmd>(cmd)) {
    engine::TacticContext ctx{options_.par_runner ? &options_.par_runner : nullptr, nullptr};
    Side side = dag_.on_master(e.to) ? Side::Master : Side::Branch;
    return apply_command(s, cmd, side, &options_.require, ctx);
  }

  const ProofBranch* b = dag_.branch_of_qed(e.to);
  if (!b) throw std::runtime_error("Qed without a proof branch");
  const Memo& root = memo_.at(b->root);
  if (!root.state || !root.state->proof) throw std::runtime_error("no proof in progress");

  PureComputation comp = detach(*b);
  std::uint64_t key = 0;
  ProofPromise promise = delegate(comp, e.to, key);
  SystemState out = s;
  try {
    out.env = kernel::env_add_opaque(s.env, b->name, comp.produces, promise);
  } catch (...) {
    runtime_->table.erase(key);
    throw;
  }
  out.proof.reset();
  out.extruded.push_back(key);

  auto old = proofs_.find(e.to);
  if (old != proofs_.end()) {
    runtime_->table.erase(old->second.key);
    enqueued_keys_.erase(old->second.key);
  }
  proofs_.insert_or_assign(e.to, ProofRecord{out.env.find(b->name)->as_opaque()->promise, promise,
                                             key, b->tip, b->body_text});
  return out;
}

std::shared_ptr<const SystemState> Stm::compute_state(StateId target) {
  auto fail_from = [this](const Memo& m) -> StateError {
    return StateError(m.error, m.failed_at, span_of_node(m.failed_at));
  };
  if (auto it = memo_.find(target); it != memo_.end()) {
    if (!it->second.state) throw fail_from(it->second);
    installed_ = it->second.state;
    return it->second.state;
  }

  std::vector<const Edge*> path;
  StateId node = target;
  while (!memo_.count(node)) {
    const Edge* e = dag_.parent_edge(node);
    if (!e) throw StateError("unknown state " + std::to_string(target), target, std::nullopt);
    path.push_back(e);
    node = e->from;
  }
  std::reverse(path.begin(), path.end());

  Memo cur = memo_.at(node);
  for (const Edge* e : path) {
    if (cur.state) {
      try {
        if (dag_.on_master(e->to)) {
          runtime_->master.fetch_add(1, std::memory_order_relaxed);
        } else {
          runtime_->branch.fetch_add(1, std::memory_order_relaxed);
        }
        cur = Memo{std::make_shared<const SystemState>(execute(*cur.state, *e)), {}, 0};
      } catch (const std::exception& ex) {
        cur = Memo{nullptr, ex.what(), e->to};
      }
    }
    memo_[e->to] = cur;
  }
  if (!cur.state) throw fail_from(cur);
  installed_ = cur.state;
  return cur.state;
}

bool Stm::is_computed(StateId node) const { return memo_.count(node) != 0; }

kernel::Environment Stm::master_environment() { return compute_state(dag_.master_tip)->env; }

PromiseResult Stm::future_force(const PureComputation& comp) {
  struct Restore {
    std::shared_ptr<const SystemState>& slot;
    std::shared_ptr<const SystemState> saved;
    ~Restore() { slot = saved; }
  } restore{installed_, installed_};
  installed_ = comp.base_state;
  return runtime_->run(comp);
}

std::optional<ProofPromise> Stm::promise_of(StateId qed_node) const {
  auto it = proofs_.find(qed_node);
  if (it == proofs_.end()) return std::nullopt;
  return it->second.promise;
}

std::optional<PureComputation> Stm::computation_of(StateId qed_node) const {
  auto it = proofs_.find(qed_node);
  if (it == proofs_.end()) return std::nullopt;
  return runtime_->table.get(it->second.key);
}

const ExtrudedTable& Stm::extruded() const { return runtime_->table; }

Counters Stm::counters() const {
  return Counters{runtime_->master.load(), runtime_->branch.load(), runtime_->pure.load()};
}

void Stm::reset_counters() {
  runtime_->master = 0;
  runtime_->branch = 0;
  runtime_->pure = 0;
}

std::vector<StatusEvent> Stm::branch_statuses(const ProofBranch& b, const PromiseResult& r) const {
  std::vector<StatusEvent> out;
  if (std::holds_alternative<kernel::Term>(r)) {
    for (SpanId s : b.spans) out.push_back({s, SpanStatus::Processed, {}});
    return out;
  }
  const PromiseFailure& f = std::get<PromiseFailure>(r);
  if (f.cancelled) return out;
  SpanId culprit = f.span_id.value_or(b.spans.empty() ? b.qed_span.value_or(b.theorem_span) : b.spans.back());
  for (SpanId s : b.spans) {
    if (s == culprit) {
      out.push_back({s, SpanStatus::Failed, f.message});
      return out;
    }
    out.push_back({s, SpanStatus::Processed, {}});
  }
  // The culprit is not a branch span (a proof without steps).
  out.push_back({culprit, SpanStatus::Failed, f.message});
  return out;
}

std::vector<Hyperlink> Stm::hyperlinks(SpanId id, const SystemState& state) const {
  std::vector<Hyperlink> out;
  std::size_t idx = span_index(id);
  if (idx == spans_.size() || !spans_[idx].parsed) return out;
  const DocSpan& ds = spans_[idx];
  for (const auto& ref : ds.parsed->references) {
    const kernel::EnvEntry* e = state.env.find(ref.name);
    if (!e) continue;
    Hyperlink h{ds.span.offset + ref.offset, ref.length, ref.name, std::nullopt};
    if (e->origin().empty()) {
      // The latest defining span before this one.
      for (std::size_t i = idx; i-- > 0;) {
        const auto& p = spans_[i].parsed;
        if (!p) continue;
        const std::string* defined = nullptr;
        if (const auto* d = std::get_if<vernac::DefinitionCmd>(&p->ast)) defined = &d->name;
        if (const auto* a = std::get_if<vernac::AxiomCmd>(&p->ast)) defined = &a->name;
        if (const auto* t = std::get_if<vernac::TheoremCmd>(&p->ast)) defined = &t->name;
        if (defined && *defined == ref.name) {
          h.target = spans_[i].span.id;
          break;
        }
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

void Stm::observe(const std::set<SpanId>& perspective, const ObserveHooks& hooks) {
  std::vector<std::size_t> focus;
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    if (perspective.count(spans_[i].span.id)) focus.push_back(i);
  }
  const bool everything = focus.empty();
  const std::size_t limit = everything ? spans_.size() : focus.back() + 1;

  auto priority = [&](std::size_t i) {
    if (everything) return 0;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t f : focus) best = std::min(best, f > i ? f - i : i - f);
    return -static_cast<int>(std::min<std::size_t>(best, std::numeric_limits<int>::max()));
  };
  auto in_focus = [&](std::size_t i) {
    return everything || std::binary_search(focus.begin(), focus.end(), i);
  };
  auto emit_status = [&](SpanId s, SpanStatus st, const std::string& msg) {
    if (hooks.status) hooks.status(s, st, msg);
  };

  std::vector<std::pair<ProofJob, int>> jobs;
  auto flush = [&] {
    std::stable_sort(jobs.begin(), jobs.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [job, prio] : jobs) {
      if (hooks.enqueue_proof) hooks.enqueue_proof(std::move(job), prio);
    }
    jobs.clear();
  };

  // Returns false when the failure came from an earlier state.
  auto compute = [&](SpanId id, StateId node) -> std::shared_ptr<const SystemState> {
    try {
      return compute_state(node);
    } catch (const StateError& e) {
      if (e.failed_at() == node) emit_status(id, SpanStatus::Failed, e.what());
      return nullptr;
    }
  };

  auto process = [&](std::size_t i) {
    const DocSpan& ds = spans_[i];
    const SpanId id = ds.span.id;
    if (auto be = dag_.build_errors.find(id); be != dag_.build_errors.end()) {
      // An unclosed proof still has a usable branch for goal display.
      if (!ds.parsed || !std::holds_alternative<vernac::TheoremCmd>(ds.parsed->ast)) {
        emit_status(id, SpanStatus::Failed, be->second);
        return;
      }
    }
    if (auto q = dag_.query_state.find(id); q != dag_.query_state.end()) {
      if (!in_focus(i)) return;
      auto st = compute(id, q->second);
      if (st && hooks.enqueue_query) hooks.enqueue_query(id, ds.parsed->ast, st, priority(i));
      return;
    }
    auto n = dag_.span_node.find(id);
    if (n == dag_.span_node.end()) return;
    const StateId node = n->second;

    if (dag_.on_master(node)) {
      StateId parent = dag_.parent_edge(node)->from;
      auto st = compute(id, node);
      if (!st) return;
      if (hooks.markup) {
        auto links = hyperlinks(id, *compute_state(parent));
        if (!links.empty()) hooks.markup(id, links);
      }
      if (dag_.build_errors.count(id)) {
        emit_status(id, SpanStatus::Failed, dag_.build_errors.at(id));
      } else {
        emit_status(id, SpanStatus::Processed, {});
      }
      if (in_focus(i) && st->proof && hooks.goals && !everything) {
        hooks.goals(id, engine::render_goals(*st->proof));
      }
      if (std::holds_alternative<vernac::QedCmd>(ds.parsed->ast)) {
        auto rec = proofs_.find(node);
        if (rec != proofs_.end() && rec->second.promise.status() == ProofPromise::Status::Delegated) {
          if (enqueued_keys_.count(rec->second.key)) {
            if (hooks.reprioritize) hooks.reprioritize(node, priority(i));
          } else if (auto comp = runtime_->table.get(rec->second.key)) {
            enqueued_keys_.insert(rec->second.key);
            jobs.push_back({ProofJob{*comp, rec->second.promise, id, node}, priority(i)});
          }
        }
      }
      return;
    }

    // A branch span. The global twin, if any, runs on master.
    if (auto t = dag_.twin_node.find(id); t != dag_.twin_node.end()) compute(id, t->second);
    if (everything || !in_focus(i)) return;
    // Goal display: run the branch up to here in the session.
    try {
      auto st = compute_state(node);
      if (hooks.markup) {
        auto links = hyperlinks(id, *st);
        if (!links.empty()) hooks.markup(id, links);
      }
      emit_status(id, SpanStatus::Processed, {});
      if (st->proof && hooks.goals) hooks.goals(id, engine::render_goals(*st->proof));
    } catch (const StateError& e) {
      if (e.failed_at() == node) emit_status(id, SpanStatus::Failed, e.what());
    }
  };

  for (std::size_t i = 0; i < limit; ++i) {
    if (hooks.interrupted && hooks.interrupted()) return;
    process(i);
  }
  flush();
  for (std::size_t i = limit; i < spans_.size(); ++i) {
    if (hooks.interrupted && hooks.interrupted()) return;
    process(i);
  }
  flush();
}

}  // namespace sprover::stm
