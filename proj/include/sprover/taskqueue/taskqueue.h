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

// Delegation of pure work to isolated worker processes.
//
// A task becomes a request (a self-contained message), a worker performs it
// against the state shipped with it or one it cached earlier, and the
// response comes back through the worker's manager thread.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sprover/cancel.h"
#include "sprover/codec/codec.h"
#include "sprover/stm/stm.h"

namespace sprover::taskqueue {

using codec::Json;

// Frames are a 4-byte big-endian length followed by the body.
std::string frame(std::string_view body);
// Blocking. Returns false on error (errno-based).
bool write_frame(int fd, std::string_view body);
// Blocking. Empty on end of stream or error.
std::optional<std::string> read_frame(int fd);

inline constexpr std::uint32_t kMaxFrame = 256u << 20;

enum class TaskKind : std::uint8_t { Proof, Query, Par };
const char* to_string(TaskKind k);

struct ProofTask {
  stm::PureComputation comp;
  std::string target;
};

struct QueryTask {
  vernac::SpanId span = 0;
  vernac::CommandAst command;
  stm::StateId state = 0;
  std::shared_ptr<const stm::SystemState> snapshot;
};

struct ParTask {
  engine::Goal goal;
  engine::TacticAst tactic;
  kernel::Environment env;
  engine::HintDb hints;
};

using TaskPayload = std::variant<ProofTask, QueryTask, ParTask>;

enum class Outcome : std::uint8_t { Finished, Failed, Cancelled };
const char* to_string(Outcome o);

struct Request {
  std::uint64_t task_id = 0;
  int schema_version = codec::kSchemaVersion;
  TaskKind kind = TaskKind::Proof;
  // Full requests carry the base state; Delta requests only name it.
  bool full = true;
  std::string base_digest;
  Json snapshot;
  // Kind-specific: program, query command, or goal and tactic.
  Json body;
  // Artificial extra duration of proof tasks, for scheduling tests.
  int delay_ms = 0;
};

Json encode(const Request& r);
Request decode_request(const Json& j);

struct Response {
  std::uint64_t task_id = 0;
  Outcome outcome = Outcome::Finished;
  // Finished: {"term": ...} or {"text": ...}.
  Json payload;
  kernel::PromiseFailure failure;
  double wall_ms = 0;
  // Digests the worker holds after serving the request.
  std::vector<std::string> cached;
};

Json encode(const Response& r);
Response decode_response(const Json& j);

// A response as a promise outcome.
kernel::PromiseResult to_result(const Response& r);

using DoneCallback = std::function<void(const Response&)>;

struct Task {
  TaskPayload payload;
  int priority = 0;
  CancelSwitch cancel;
  // Called exactly once, from a queue thread (or from enqueue when the task
  // is dropped on arrival).
  DoneCallback on_done;
};

enum class Freshness { Fresh, Old };

// Empty when the task became obsolete (cancelled). An Old worker whose cache
// holds the task's base state receives a Delta request.
std::optional<Request> request_of_task(Freshness freshness, const Task& task,
                                       std::uint64_t task_id,
                                       const std::set<std::string>& worker_cache);

enum class Verdict { Stay, Reset };

// Logic failures keep the worker; infrastructure failures and cancellations
// replace it.
Verdict use_response(const Task& task, const Response& response);

// Base states by digest, least recently used evicted first.
class WorkerCache {
 public:
  explicit WorkerCache(std::size_t capacity = 4) : capacity_(capacity) {}
  void put(const std::string& digest, stm::SystemState state);
  const stm::SystemState* get(const std::string& digest);
  std::vector<std::string> digests() const;

 private:
  std::size_t capacity_;
  std::list<std::pair<std::string, stm::SystemState>> entries_;
};

// Executes one request. Pure apart from the cache.
Response perform(const Json& request, WorkerCache& cache);

// The worker process loop over a connected channel. Returns when the channel
// closes.
int worker_main(int fd);

// WORKER_COUNT, else available cores minus one, at least one.
int default_worker_count();

// SPROVER_WORKER, else a sprover-worker next to the running executable,
// else the build-time location.
std::string worker_executable();

struct Event {
  std::string kind;  // enqueue, drop, dispatch, response, discard, kill, spawn, death, requeue
  std::uint64_t task = 0;
  int worker = -1;
  std::string detail;
  std::chrono::steady_clock::time_point at;
};

struct QueueOptions {
  std::string worker_path;  // defaults to worker_executable()
  int delay_ms = 0;
};

class TaskQueue {
 public:
  // max_workers == 0: tasks accumulate until dumped. Throws
  // std::invalid_argument on a negative count.
  explicit TaskQueue(int max_workers, QueueOptions options = {});
  ~TaskQueue();
  TaskQueue(const TaskQueue&) = delete;
  TaskQueue& operator=(const TaskQueue&) = delete;

  std::uint64_t enqueue(Task task);

  // Pending tasks as Full requests, highest priority first; empties the
  // queue. Throws std::logic_error while tasks are in flight.
  std::vector<Request> dump();

  // Moves a pending task to another priority level, behind the tasks
  // already there. Returns false when the task is no longer pending.
  bool set_priority(std::uint64_t task_id, int priority);

  // Blocks until nothing is pending or in flight.
  void wait_idle();

  int max_workers() const { return max_workers_; }
  std::size_t pending() const;
  std::vector<Event> events() const;

 private:
  struct Pending {
    std::uint64_t id;
    Task task;
    int attempts = 0;
    bool retried = false;
  };
  struct Worker;

  void start_managers();
  void manager_loop(int index);
  void log(std::string kind, std::uint64_t task, int worker, std::string detail = {});
  void finish(Pending& p, const Response& r);
  void requeue(std::pair<int, std::uint64_t> key, Pending p);

  const int max_workers_;
  QueueOptions options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  // Ordered by (-priority, arrival).
  std::map<std::pair<int, std::uint64_t>, Pending> queue_;
  std::uint64_t next_id_ = 1;
  std::size_t in_flight_ = 0;
  bool stopping_ = false;
  bool started_ = false;
  std::vector<std::thread> managers_;
  std::vector<Event> events_;
};

// Task plumbing for the session side.

// Resolves the job's promise from the response, then calls `done`.
Task make_proof_task(const stm::ProofJob& job, int priority,
                     std::function<void(const kernel::PromiseResult&)> done = {});

// Runs par: subtasks on the queue and waits for all of them; sequential when
// the queue has no workers.
engine::ParRunner make_par_runner(TaskQueue& queue);

}  // namespace sprover::taskqueue
