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

#include "sprover/kernel/environment.h"

#include <algorithm>
#include <condition_variable>

namespace sprover::kernel {

namespace {
std::atomic<std::uint64_t> g_term_accesses{0};
}  // namespace

struct ProofPromise::Cell {
  std::mutex mu;
  std::condition_variable cv;
  Status status = Status::Delegated;
  Formula statement;
  std::uint64_t base_state = 0;
  std::uint64_t handle_key = 0;
  Forcer forcer;
  bool forcing = false;
  std::optional<Term> term;
  std::optional<PromiseFailure> failure;

  PromiseResult result_locked() const {
    if (status == Status::Finished) {
      g_term_accesses.fetch_add(1, std::memory_order_relaxed);
      return *term;
    }
    return *failure;
  }
};

ProofPromise ProofPromise::delegated(Formula statement, std::uint64_t base_state,
                                     std::uint64_t handle_key, Forcer forcer) {
  auto cell = std::make_shared<Cell>();
  cell->statement = std::move(statement);
  cell->base_state = base_state;
  cell->handle_key = handle_key;
  cell->forcer = std::move(forcer);
  return ProofPromise(std::move(cell));
}

ProofPromise ProofPromise::finished(Formula statement, std::uint64_t base_state, Term term) {
  auto cell = std::make_shared<Cell>();
  cell->statement = std::move(statement);
  cell->base_state = base_state;
  cell->status = Status::Finished;
  cell->term = std::move(term);
  return ProofPromise(std::move(cell));
}

ProofPromise ProofPromise::failed(Formula statement, std::uint64_t base_state,
                                  PromiseFailure failure) {
  auto cell = std::make_shared<Cell>();
  cell->statement = std::move(statement);
  cell->base_state = base_state;
  cell->status = Status::Failed;
  cell->failure = std::move(failure);
  return ProofPromise(std::move(cell));
}

ProofPromise::Status ProofPromise::status() const {
  std::lock_guard lock(cell_->mu);
  return cell_->status;
}

const Formula& ProofPromise::statement() const { return cell_->statement; }
std::uint64_t ProofPromise::base_state() const { return cell_->base_state; }
std::uint64_t ProofPromise::handle_key() const { return cell_->handle_key; }

bool ProofPromise::has_forcer() const {
  std::lock_guard lock(cell_->mu);
  return static_cast<bool>(cell_->forcer);
}

PromiseResult ProofPromise::force() const {
  std::unique_lock lock(cell_->mu);
  cell_->cv.wait(lock, [&] { return !cell_->forcing; });
  if (cell_->status != Status::Delegated) return cell_->result_locked();
  if (!cell_->forcer) {
    return PromiseFailure{"proof computation handle is not valid in this process", std::nullopt,
                          false, true};
  }
  cell_->forcing = true;
  Forcer forcer = cell_->forcer;
  lock.unlock();

  PromiseResult result = PromiseFailure{"proof computation produced no result"};
  try {
    result = forcer();
  } catch (const std::exception& e) {
    result = PromiseFailure{e.what()};
  }

  lock.lock();
  cell_->forcing = false;
  if (cell_->status == Status::Delegated) {
    if (auto* t = std::get_if<Term>(&result)) {
      cell_->status = Status::Finished;
      cell_->term = std::move(*t);
    } else {
      cell_->status = Status::Failed;
      cell_->failure = std::get<PromiseFailure>(std::move(result));
    }
    cell_->forcer = nullptr;
  }
  cell_->cv.notify_all();
  return cell_->result_locked();
}

bool ProofPromise::resolve(Term term) const {
  std::lock_guard lock(cell_->mu);
  if (cell_->status != Status::Delegated) return false;
  cell_->status = Status::Finished;
  cell_->term = std::move(term);
  cell_->forcer = nullptr;
  cell_->cv.notify_all();
  return true;
}

bool ProofPromise::fail(PromiseFailure failure) const {
  std::lock_guard lock(cell_->mu);
  if (cell_->status != Status::Delegated) return false;
  cell_->status = Status::Failed;
  cell_->failure = std::move(failure);
  cell_->forcer = nullptr;
  cell_->cv.notify_all();
  return true;
}

std::optional<Term> ProofPromise::term() const {
  std::lock_guard lock(cell_->mu);
  if (cell_->status != Status::Finished) return std::nullopt;
  g_term_accesses.fetch_add(1, std::memory_order_relaxed);
  return cell_->term;
}

std::optional<PromiseFailure> ProofPromise::failure() const {
  std::lock_guard lock(cell_->mu);
  return cell_->failure;
}

std::uint64_t ProofPromise::term_accesses() { return g_term_accesses.load(); }
void ProofPromise::reset_term_accesses() { g_term_accesses.store(0); }

ProofPromise PromiseSlot::get() const {
  std::lock_guard lock(mu_);
  return current_;
}

void PromiseSlot::rebind(ProofPromise promise) {
  std::lock_guard lock(mu_);
  current_ = std::move(promise);
}

const std::string& EnvEntry::name() const {
  return std::visit([](const auto& e) -> const std::string& { return e.name; }, item_);
}

const Formula* EnvEntry::proves() const {
  if (const auto* a = as_axiom()) return &a->statement;
  if (const auto* o = as_opaque()) return &o->statement;
  return nullptr;
}

// Entries are never removed from a store; a store holds a single line of
// appends, so a name appears at most once in it.
struct Environment::Store {
  mutable std::mutex mu;
  std::deque<EnvEntry> entries;
  std::unordered_map<std::string, std::size_t> index;
};

const EnvEntry& Environment::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("environment index " + std::to_string(i));
  std::lock_guard lock(store_->mu);
  return store_->entries[i];
}

const EnvEntry* Environment::find(const std::string& name) const {
  if (!store_) return nullptr;
  std::lock_guard lock(store_->mu);
  auto it = store_->index.find(name);
  if (it == store_->index.end() || it->second >= size_) return nullptr;
  return &store_->entries[it->second];
}

const Definition* Environment::find_definition(const std::string& name) const {
  const auto* e = find(name);
  return e ? e->as_definition() : nullptr;
}

Environment Environment::prefix(std::size_t n) const {
  return Environment(store_, std::min(n, size_));
}

Environment Environment::appended_unchecked(EnvEntry entry) const {
  if (store_) {
    std::lock_guard lock(store_->mu);
    if (store_->entries.size() == size_) {
      store_->index[entry.name()] = size_;
      store_->entries.push_back(std::move(entry));
      return Environment(store_, size_ + 1);
    }
  }
  auto store = std::make_shared<Store>();
  if (store_) {
    std::lock_guard lock(store_->mu);
    for (std::size_t i = 0; i < size_; ++i) {
      store->index.emplace(store_->entries[i].name(), i);
      store->entries.push_back(store_->entries[i]);
    }
  }
  store->index[entry.name()] = size_;
  store->entries.push_back(std::move(entry));
  return Environment(std::move(store), size_ + 1);
}

void check_formula(const Environment& env, const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Atom:
    case Formula::Kind::True:
    case Formula::Kind::False:
      return;
    case Formula::Kind::Impl:
    case Formula::Kind::And:
    case Formula::Kind::Or:
      check_formula(env, f.lhs());
      check_formula(env, f.rhs());
      return;
    case Formula::Kind::DefApp: {
      const auto* def = env.find_definition(f.name());
      if (!def) throw KernelError("ill-formed formula: unknown definition '" + f.name() + "'");
      if (def->params.size() != f.args().size()) {
        throw KernelError("arity error: '" + f.name() + "' expects " +
                          std::to_string(def->params.size()) + " argument(s), got " +
                          std::to_string(f.args().size()));
      }
      for (const auto& a : f.args()) check_formula(env, a);
      return;
    }
  }
}

namespace {

void require_fresh(const Environment& env, const std::string& name) {
  if (name.empty()) throw KernelError("empty name");
  if (env.contains(name)) throw KernelError("duplicate name '" + name + "'");
}

}  // namespace

Environment env_add_definition(const Environment& env, const std::string& name,
                               std::vector<std::string> params, const Formula& body,
                               const std::string& origin) {
  require_fresh(env, name);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = i + 1; j < params.size(); ++j) {
      if (params[i] == params[j]) {
        throw KernelError("duplicate parameter '" + params[i] + "' in '" + name + "'");
      }
    }
  }
  try {
    check_formula(env, body);
  } catch (const KernelError& e) {
    throw KernelError("ill-formed body of '" + name + "': " + e.what());
  }
  return env.appended_unchecked(EnvEntry(Definition{name, std::move(params), body}, origin));
}

Environment env_add_axiom(const Environment& env, const std::string& name,
                          const Formula& statement, const std::string& origin) {
  require_fresh(env, name);
  try {
    check_formula(env, statement);
  } catch (const KernelError& e) {
    throw KernelError("ill-formed statement of '" + name + "': " + e.what());
  }
  return env.appended_unchecked(EnvEntry(Axiom{name, statement}, origin));
}

Environment env_add_opaque(const Environment& env, const std::string& name,
                           const Formula& statement, const ProofPromise& promise,
                           const std::string& origin) {
  require_fresh(env, name);
  try {
    check_formula(env, statement);
  } catch (const KernelError& e) {
    throw KernelError("ill-formed statement of '" + name + "': " + e.what());
  }
  if (promise.statement() != statement) {
    throw KernelError("statement of '" + name + "' does not match its proof promise");
  }
  return env.appended_unchecked(
      EnvEntry(Opaque{name, statement, std::make_shared<PromiseSlot>(promise)}, origin));
}

}  // namespace sprover::kernel
