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

#include "sprover/taskqueue/taskqueue.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <climits>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>

extern char** environ;

namespace sprover::taskqueue {

namespace {

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == ENOTSOCK) w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, char* data, std::size_t n) {
  while (n > 0) {
    ssize_t r = ::read(fd, data, n);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    if (r == 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

const char* kKindNames[] = {"proof", "query", "par"};
const char* kOutcomeNames[] = {"finished", "failed", "cancelled"};

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const char* const (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  throw codec::DecodeError(std::string("unknown ") + what + " '" + s + "'");
}

Response failure_response(std::uint64_t id, std::string message, bool infrastructure) {
  Response r;
  r.task_id = id;
  r.outcome = Outcome::Failed;
  r.failure = kernel::PromiseFailure{std::move(message), std::nullopt, false, infrastructure};
  return r;
}

Response cancelled_response(std::uint64_t id) {
  Response r;
  r.task_id = id;
  r.outcome = Outcome::Cancelled;
  r.failure = kernel::PromiseFailure{"cancelled", std::nullopt, true, false};
  return r;
}

}  // namespace

std::string frame(std::string_view body) {
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(body);
  return out;
}

bool write_frame(int fd, std::string_view body) {
  if (body.size() > kMaxFrame) return false;
  std::string f = frame(body);
  return write_all(fd, f.data(), f.size());
}

std::optional<std::string> read_frame(int fd) {
  unsigned char hdr[4];
  if (!read_all(fd, reinterpret_cast<char*>(hdr), 4)) return std::nullopt;
  std::uint32_t n = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) |
                    (std::uint32_t{hdr[2]} << 8) | std::uint32_t{hdr[3]};
  if (n > kMaxFrame) return std::nullopt;
  std::string body(n, '\0');
  if (!read_all(fd, body.data(), n)) return std::nullopt;
  return body;
}

const char* to_string(TaskKind k) { return kKindNames[static_cast<int>(k)]; }
const char* to_string(Outcome o) { return kOutcomeNames[static_cast<int>(o)]; }

Json encode(const Request& r) {
  Json j{{"task_id", r.task_id},   {"schema_version", r.schema_version},
         {"kind", to_string(r.kind)}, {"payload", r.full ? "full" : "delta"},
         {"base_digest", r.base_digest}, {"body", r.body},
         {"delay_ms", r.delay_ms}};
  if (r.full) j["snapshot"] = r.snapshot;
  return j;
}

Request decode_request(const Json& j) {
  try {
    Request r;
    r.task_id = j.at("task_id").get<std::uint64_t>();
    r.schema_version = j.at("schema_version").get<int>();
    r.kind = parse_enum<TaskKind>(j.at("kind").get<std::string>(), kKindNames, "task kind");
    const std::string payload = j.at("payload").get<std::string>();
    if (payload != "full" && payload != "delta") throw codec::DecodeError("unknown payload '" + payload + "'");
    r.full = payload == "full";
    r.base_digest = j.at("base_digest").get<std::string>();
    r.body = j.at("body");
    r.delay_ms = j.value("delay_ms", 0);
    if (r.full) r.snapshot = j.at("snapshot");
    return r;
  } catch (const Json::exception& e) {
    throw codec::DecodeError(std::string("malformed request: ") + e.what());
  }
}

Json encode(const Response& r) {
  Json j{{"task_id", r.task_id},
         {"outcome", to_string(r.outcome)},
         {"wall_ms", r.wall_ms},
         {"cached", r.cached}};
  if (r.outcome == Outcome::Finished) {
    j["payload"] = r.payload;
  } else {
    j["failure"] = codec::encode(r.failure);
  }
  return j;
}

Response decode_response(const Json& j) {
  try {
    Response r;
    r.task_id = j.at("task_id").get<std::uint64_t>();
    r.outcome = parse_enum<Outcome>(j.at("outcome").get<std::string>(), kOutcomeNames, "outcome");
    r.wall_ms = j.at("wall_ms").get<double>();
    r.cached = j.at("cached").get<std::vector<std::string>>();
    if (r.outcome == Outcome::Finished) {
      r.payload = j.at("payload");
    } else {
      r.failure = codec::decode_failure(j.at("failure"));
    }
    return r;
  } catch (const Json::exception& e) {
    throw codec::DecodeError(std::string("malformed response: ") + e.what());
  }
}

kernel::PromiseResult to_result(const Response& r) {
  if (r.outcome == Outcome::Finished) {
    try {
      return codec::decode_term(r.payload.at("term"));
    } catch (const std::exception& e) {
      return kernel::PromiseFailure{std::string("malformed proof term: ") + e.what(), std::nullopt,
                                    false, true};
    }
  }
  return r.failure;
}

std::optional<Request> request_of_task(Freshness freshness, const Task& task, std::uint64_t task_id,
                                       const std::set<std::string>& worker_cache) {
  if (task.cancel.is_set()) return std::nullopt;
  Request r;
  r.task_id = task_id;
  stm::SystemState base;
  if (const auto* p = std::get_if<ProofTask>(&task.payload)) {
    r.kind = TaskKind::Proof;
    base = *p->comp.base_state;
    r.body = Json{{"program", stm::encode_program(p->comp.program)},
                  {"produces", codec::encode(p->comp.produces)},
                  {"closing_span", p->comp.closing_span},
                  {"name", p->target}};
  } else if (const auto* q = std::get_if<QueryTask>(&task.payload)) {
    r.kind = TaskKind::Query;
    base = *q->snapshot;
    r.body = Json{{"command", codec::encode(q->command)}, {"span", q->span}};
  } else {
    const auto& t = std::get<ParTask>(task.payload);
    r.kind = TaskKind::Par;
    base.env = t.env;
    base.hints = t.hints;
    r.body = Json{{"goal", codec::encode(t.goal)}, {"tactic", codec::encode(t.tactic)}};
  }
  Json snapshot = stm::encode_state(base);
  r.base_digest = codec::digest(snapshot);
  r.full = !(freshness == Freshness::Old && worker_cache.count(r.base_digest));
  if (r.full) r.snapshot = std::move(snapshot);
  return r;
}

Verdict use_response(const Task&, const Response& response) {
  if (response.outcome == Outcome::Cancelled) return Verdict::Reset;
  if (response.outcome == Outcome::Failed && response.failure.infrastructure) return Verdict::Reset;
  return Verdict::Stay;
}

void WorkerCache::put(const std::string& digest, stm::SystemState state) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->first == digest) {
      entries_.splice(entries_.begin(), entries_, it);
      return;
    }
  }
  entries_.emplace_front(digest, std::move(state));
  while (entries_.size() > capacity_) entries_.pop_back();
}

const stm::SystemState* WorkerCache::get(const std::string& digest) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->first == digest) {
      entries_.splice(entries_.begin(), entries_, it);
      return &entries_.front().second;
    }
  }
  return nullptr;
}

std::vector<std::string> WorkerCache::digests() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

Response perform(const Json& json, WorkerCache& cache) {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t id = 0;
  if (json.is_object() && json.contains("task_id") && json.at("task_id").is_number_integer() &&
      json.at("task_id").get<std::int64_t>() >= 0) {
    id = json.at("task_id").get<std::uint64_t>();
  }
  Response resp;
  try {
    Request req = decode_request(json);
    if (req.schema_version != codec::kSchemaVersion) {
      resp = failure_response(id, "unsupported schema version " + std::to_string(req.schema_version), true);
    } else {
      const stm::SystemState* base = nullptr;
      if (req.full) {
        const std::string d = codec::digest(req.snapshot);
        if (d != req.base_digest) throw codec::DecodeError("snapshot does not match its digest");
        cache.put(d, stm::decode_state(req.snapshot));
        base = cache.get(d);
      } else {
        base = cache.get(req.base_digest);
      }
      if (!base) {
        resp = failure_response(id, "base state " + req.base_digest + " is not cached", true);
      } else if (req.kind == TaskKind::Proof) {
        if (req.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(req.delay_ms));
        auto program = stm::decode_program(req.body.at("program"));
        auto produces = codec::decode_formula(req.body.at("produces"));
        auto closing = req.body.at("closing_span").get<vernac::SpanId>();
        auto result = stm::run_program(*base, program, produces, closing, CancelSwitch{});
        if (const auto* term = std::get_if<kernel::Term>(&result)) {
          resp.task_id = id;
          resp.payload = Json{{"term", codec::encode(*term)}};
        } else {
          resp.task_id = id;
          resp.outcome = Outcome::Failed;
          resp.failure = std::get<kernel::PromiseFailure>(result);
        }
      } else if (req.kind == TaskKind::Query) {
        auto cmd = codec::decode_command(req.body.at("command"));
        try {
          resp.task_id = id;
          resp.payload = Json{{"text", stm::run_query(*base, cmd)}};
        } catch (const std::exception& e) {
          resp = failure_response(id, e.what(), false);
        }
      } else {
        auto goal = codec::decode_goal(req.body.at("goal"));
        auto tactic = codec::decode_tactic(req.body.at("tactic"));
        try {
          kernel::Term t = engine::run_par_subtask(base->env, base->hints, engine::ParSubtask{goal, tactic});
          resp.task_id = id;
          resp.payload = Json{{"term", codec::encode(t)}};
        } catch (const engine::TacticError& e) {
          resp = failure_response(id, e.what(), false);
        }
      }
    }
  } catch (const std::exception& e) {
    resp = failure_response(id, std::string("malformed request: ") + e.what(), true);
  }
  resp.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  resp.cached = cache.digests();
  return resp;
}

int worker_main(int fd) {
  ::signal(SIGPIPE, SIG_IGN);
  WorkerCache cache;
  while (auto body = read_frame(fd)) {
    Response r;
    try {
      r = perform(Json::parse(*body), cache);
    } catch (const Json::parse_error& e) {
      r = failure_response(0, std::string("malformed request: ") + e.what(), true);
    }
    if (!write_frame(fd, codec::canonical(encode(r)))) return 1;
  }
  return 0;
}

int default_worker_count() {
  if (const char* env = std::getenv("WORKER_COUNT")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0 && v <= 1024) return static_cast<int>(v);
  }
  int cores = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, cores - 1);
}

std::string worker_executable() {
  if (const char* env = std::getenv("SPROVER_WORKER")) return env;
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto sibling = self.parent_path() / "sprover-worker";
    if (::access(sibling.c_str(), X_OK) == 0) return sibling.string();
  }
#ifdef SPROVER_WORKER_PATH
  return SPROVER_WORKER_PATH;
#else
  return "sprover-worker";
#endif
}

struct TaskQueue::Worker {
  int index = 0;
  pid_t pid = -1;
  int fd = -1;
  std::set<std::string> cache;

  bool alive() const { return pid > 0; }

  bool spawn(const std::string& path) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) return false;
    int child = sv[1];
    if (child == 3) {
      // dup2 onto itself would keep close-on-exec set.
      child = ::fcntl(sv[1], F_DUPFD_CLOEXEC, 4);
      ::close(sv[1]);
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, child, 3);
    std::string arg = "fd:3";
    char* argv[] = {const_cast<char*>(path.c_str()), arg.data(), nullptr};
    pid_t p = -1;
    int rc = ::posix_spawn(&p, path.c_str(), &fa, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(child);
    if (rc != 0) {
      ::close(sv[0]);
      return false;
    }
    pid = p;
    fd = sv[0];
    cache.clear();
    return true;
  }

  void kill_now() {
    if (!alive()) return;
    ::kill(pid, SIGKILL);
    ::close(fd);
    ::waitpid(pid, nullptr, 0);
    pid = -1;
    fd = -1;
    cache.clear();
  }

  // Closing the channel makes the worker's loop end.
  void stop() {
    if (!alive()) return;
    ::close(fd);
    ::waitpid(pid, nullptr, 0);
    pid = -1;
    fd = -1;
    cache.clear();
  }
};

TaskQueue::TaskQueue(int max_workers, QueueOptions options)
    : max_workers_(max_workers), options_(std::move(options)) {
  if (max_workers < 0) throw std::invalid_argument("max_workers must be non-negative");
  if (options_.worker_path.empty()) options_.worker_path = worker_executable();
}

TaskQueue::~TaskQueue() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : managers_) t.join();
  for (auto& [key, p] : queue_) {
    if (p.task.on_done) p.task.on_done(cancelled_response(p.id));
  }
}

void TaskQueue::log(std::string kind, std::uint64_t task, int worker, std::string detail) {
  std::lock_guard lock(mu_);
  events_.push_back(Event{std::move(kind), task, worker, std::move(detail), std::chrono::steady_clock::now()});
}

std::vector<Event> TaskQueue::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t TaskQueue::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::uint64_t TaskQueue::enqueue(Task task) {
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
  }
  if (task.cancel.is_set()) {
    log("drop", id, -1, "cancelled before dispatch");
    if (task.on_done) task.on_done(cancelled_response(id));
    return id;
  }
  {
    std::lock_guard lock(mu_);
    std::pair<int, std::uint64_t> key{-task.priority, id};
    queue_.emplace(key, Pending{id, std::move(task)});
    events_.push_back(Event{"enqueue", id, -1, {}, std::chrono::steady_clock::now()});
    if (max_workers_ > 0 && !started_) start_managers();
  }
  cv_.notify_one();
  return id;
}

// Called with mu_ held.
void TaskQueue::start_managers() {
  started_ = true;
  for (int i = 0; i < max_workers_; ++i) managers_.emplace_back([this, i] { manager_loop(i); });
}

bool TaskQueue::set_priority(std::uint64_t task_id, int priority) {
  std::lock_guard lock(mu_);
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    if (it->second.id != task_id) continue;
    if (it->first.first == -priority) return true;
    Pending p = std::move(it->second);
    queue_.erase(it);
    p.task.priority = priority;
    queue_.emplace(std::make_pair(-priority, next_id_++), std::move(p));
    return true;
  }
  return false;
}

std::vector<Request> TaskQueue::dump() {
  std::vector<Request> out;
  std::lock_guard lock(mu_);
  if (in_flight_ > 0) throw std::logic_error("dump: tasks are in flight");
  for (auto& [key, p] : queue_) {
    if (auto r = request_of_task(Freshness::Fresh, p.task, p.id, {})) out.push_back(std::move(*r));
  }
  queue_.clear();
  return out;
}

void TaskQueue::wait_idle() {
  std::unique_lock lock(mu_);
  if (max_workers_ == 0 && !queue_.empty()) {
    throw std::logic_error("wait_idle: no workers to run pending tasks");
  }
  idle_cv_.wait(lock, [this] { return queue_.empty() && in_flight_ == 0; });
}

void TaskQueue::finish(Pending& p, const Response& r) {
  if (p.task.on_done) p.task.on_done(r);
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  idle_cv_.notify_all();
}

void TaskQueue::requeue(std::pair<int, std::uint64_t> key, Pending p) {
  {
    std::lock_guard lock(mu_);
    events_.push_back(Event{"requeue", p.id, -1, {}, std::chrono::steady_clock::now()});
    queue_.emplace(key, std::move(p));
    --in_flight_;
  }
  cv_.notify_one();
}

void TaskQueue::manager_loop(int index) {
  Worker w;
  w.index = index;
  for (;;) {
    std::pair<int, std::uint64_t> key;
    Pending p{0, Task{}};
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) break;
      auto it = queue_.begin();
      key = it->first;
      p = std::move(it->second);
      queue_.erase(it);
      ++in_flight_;
    }
    if (p.task.cancel.is_set()) {
      log("drop", p.id, index, "cancelled before dispatch");
      finish(p, cancelled_response(p.id));
      continue;
    }
    if (!w.alive()) {
      if (!w.spawn(options_.worker_path)) {
        log("death", p.id, index, "cannot spawn " + options_.worker_path);
        finish(p, failure_response(p.id, "cannot spawn worker " + options_.worker_path, true));
        continue;
      }
      log("spawn", 0, index, std::to_string(w.pid));
    }
    auto req = request_of_task(w.cache.empty() ? Freshness::Fresh : Freshness::Old, p.task, p.id, w.cache);
    if (!req) {
      log("drop", p.id, index, "obsolete");
      finish(p, cancelled_response(p.id));
      continue;
    }
    if (req->kind == TaskKind::Proof) req->delay_ms = options_.delay_ms;
    log("dispatch", p.id, index, req->full ? "full" : "delta");

    bool sent = write_frame(w.fd, codec::canonical(encode(*req)));
    bool cancelled = false;
    bool stopping = false;
    while (sent) {
      pollfd pfd{w.fd, POLLIN, 0};
      int rc = ::poll(&pfd, 1, 10);
      if (rc > 0) break;
      if (p.task.cancel.is_set()) {
        cancelled = true;
        break;
      }
      {
        std::lock_guard lock(mu_);
        stopping = stopping_;
      }
      if (stopping) break;
    }
    if (cancelled || stopping) {
      w.kill_now();
      log("kill", p.id, index, cancelled ? "cancelled" : "shutdown");
      finish(p, cancelled_response(p.id));
      if (stopping) break;
      continue;
    }

    std::optional<std::string> body = sent ? read_frame(w.fd) : std::nullopt;
    std::optional<Response> resp;
    if (body) {
      try {
        resp = decode_response(Json::parse(*body));
      } catch (const std::exception&) {
        resp.reset();
      }
    }
    if (!resp) {
      w.kill_now();
      ++p.attempts;
      log("death", p.id, index, "attempt " + std::to_string(p.attempts));
      if (p.attempts < 2) {
        requeue(key, std::move(p));
      } else {
        finish(p, failure_response(p.id, "worker died twice while running the task", true));
      }
      continue;
    }
    w.cache = std::set<std::string>(resp->cached.begin(), resp->cached.end());
    log("response", p.id, index, to_string(resp->outcome));

    if (p.task.cancel.is_set()) {
      log("discard", p.id, index, "obsolete");
      finish(p, cancelled_response(p.id));
      continue;
    }
    if (resp->outcome == Outcome::Failed && resp->failure.infrastructure && !p.retried) {
      p.retried = true;
      w.kill_now();
      log("kill", p.id, index, "retry on a fresh worker");
      requeue(key, std::move(p));
      continue;
    }
    if (use_response(p.task, *resp) == Verdict::Reset) {
      w.kill_now();
      log("kill", p.id, index, "reset");
    }
    finish(p, *resp);
  }
  w.stop();
}

Task make_proof_task(const stm::ProofJob& job, int priority,
                     std::function<void(const kernel::PromiseResult&)> done) {
  Task t;
  t.payload = ProofTask{job.comp, job.comp.name};
  t.priority = priority;
  t.cancel = job.comp.cancel;
  kernel::ProofPromise promise = job.promise;
  t.on_done = [promise, done = std::move(done)](const Response& r) {
    kernel::PromiseResult res = to_result(r);
    if (const auto* term = std::get_if<kernel::Term>(&res)) {
      promise.resolve(*term);
    } else if (r.outcome == Outcome::Failed) {
      promise.fail(std::get<kernel::PromiseFailure>(res));
    }
    if (done) done(res);
  };
  return t;
}

engine::ParRunner make_par_runner(TaskQueue& queue) {
  return [&queue](const kernel::Environment& env, const engine::HintDb& hints,
                  const std::vector<engine::ParSubtask>& tasks) -> std::vector<kernel::Term> {
    std::vector<kernel::Term> out;
    if (queue.max_workers() == 0) {
      for (const auto& t : tasks) out.push_back(engine::run_par_subtask(env, hints, t));
      return out;
    }
    struct Shared {
      std::mutex mu;
      std::condition_variable cv;
      std::size_t remaining = 0;
      std::vector<std::optional<Response>> results;
    };
    auto shared = std::make_shared<Shared>();
    shared->remaining = tasks.size();
    shared->results.resize(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      Task t;
      t.payload = ParTask{tasks[i].goal, tasks[i].tactic, env, hints};
      // A par: step blocks the proof that issued it.
      t.priority = INT_MAX / 2;
      t.on_done = [shared, i](const Response& r) {
        std::lock_guard lock(shared->mu);
        shared->results[i] = r;
        if (--shared->remaining == 0) shared->cv.notify_all();
      };
      queue.enqueue(std::move(t));
    }
    std::unique_lock lock(shared->mu);
    shared->cv.wait(lock, [&] { return shared->remaining == 0; });
    for (auto& r : shared->results) {
      if (r->outcome != Outcome::Finished) throw engine::TacticError("par: " + r->failure.message);
      out.push_back(codec::decode_term(r->payload.at("term")));
    }
    return out;
  };
}

}  // namespace sprover::taskqueue
