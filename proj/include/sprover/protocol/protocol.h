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

// The editing service: newline-delimited JSON over a byte channel. Clients
// send document edits, the perspective and queries; the server streams
// feedback attached to span ids as states and proofs complete.
//
// Client messages:
//   {"type":"update","document_id":D,"edits":[{"retain":n}|{"insert":s}|{"delete":n}...]}
//   {"type":"perspective","document_id":D,"span_ids":[...]}
//   {"type":"query","span_id":S,"text":"Check ..."}
//   {"type":"shutdown"}
// Server messages:
//   {"type":"hello","version":1}
//   {"type":"ack","document_id":D,"revision":R}
//   {"type":"spans","revision":R,"spans":[{"span_id":S,"offset":o,"length":n}...]}
//   {"type":"feedback","span_id":S,"revision":R,"kind":K,...} with K one of
//     "status"       "status":"processing"|"processed"|"failed","message","range":[b,e]
//     "goals"        "goals":text
//     "markup"       "hyperlinks":[{"range":[b,e],"name":n,"target":S|null}...]
//     "query_result" "text":text
//     "error"        "message" (span_id -1 when no span applies)

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "sprover/codec/codec.h"
#include "sprover/stm/stm.h"
#include "sprover/taskqueue/taskqueue.h"

namespace sprover::protocol {

using codec::Json;
using vernac::SpanId;

inline constexpr int kProtocolVersion = 1;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edit {
  enum class Kind { Retain, Insert, Delete };
  Kind kind = Kind::Retain;
  std::size_t count = 0;  // Retain, Delete
  std::string text;       // Insert
  friend bool operator==(const Edit&, const Edit&) = default;
};

// Applies edits left to right; text past the last edit is retained. Throws
// ProtocolError when an edit runs past the end of the text.
std::string apply_edits(std::string_view text, const std::vector<Edit>& edits);

struct UpdateMsg {
  std::string document_id;
  std::vector<Edit> edits;
};
struct PerspectiveMsg {
  std::string document_id;
  std::vector<SpanId> span_ids;
};
struct QueryMsg {
  SpanId span_id = 0;
  std::string text;
};
struct ShutdownMsg {};

using ClientMessage = std::variant<UpdateMsg, PerspectiveMsg, QueryMsg, ShutdownMsg>;

Json encode(const ClientMessage& m);
// Throws ProtocolError.
ClientMessage decode_client(const Json& j);

// Feedback constructors.
Json status_feedback(SpanId span, std::uint64_t revision, stm::SpanStatus status,
                     const std::string& message, std::size_t begin, std::size_t end);
Json goals_feedback(SpanId span, std::uint64_t revision, const std::string& goals);
Json markup_feedback(SpanId span, std::uint64_t revision, const std::vector<stm::Hyperlink>& links);
Json query_feedback(SpanId span, std::uint64_t revision, const std::string& text);
Json error_feedback(SpanId span, std::uint64_t revision, const std::string& message);

struct ServerOptions {
  // Proof workers; 0 checks proofs in the session between messages.
  int workers = 0;
  std::vector<std::string> search_path;
  taskqueue::QueueOptions queue;
};

// One client connection. The reader thread parses messages, applies edits
// to its copy of the text and acknowledges updates; the session thread owns
// the document; the writer thread serializes every outgoing line and drops
// feedback of superseded revisions.
class Server {
 public:
  using LineSink = std::function<void(const std::string& line)>;

  Server(ServerOptions options, LineSink sink);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Reader side. Returns false after a shutdown message.
  bool feed_line(const std::string& line);
  // Runs the session until shutdown. Call once, from any thread.
  void run_session();

 private:
  struct UpdateEvent {
    std::uint64_t revision;
    std::string text;
  };
  struct ProofDone {
    stm::StateId qed_node;
    kernel::ProofPromise promise;
    kernel::PromiseResult result;
  };
  struct QueryDone {
    std::uint64_t revision;
    SpanId span;
    std::string text;
    bool ok;
    // Set for queries of the document, whose span then takes a final status.
    bool span_status;
  };
  using Event = std::variant<UpdateEvent, PerspectiveMsg, QueryMsg, ShutdownMsg, ProofDone, QueryDone>;

  void post(Event e);
  void emit(Json line);
  void writer_loop();

  // Session side.
  void on_update(UpdateEvent& u);
  void on_query(const QueryMsg& q);
  void on_proof_done(const ProofDone& d);
  void observe_pass();
  void run_local_jobs();
  bool update_pending();
  void send_status(SpanId span, stm::SpanStatus status, const std::string& message);
  void send_branch(const stm::ProofBranch& b, const kernel::PromiseResult& r);
  void run_query_task(SpanId span, const vernac::CommandAst& cmd,
                      std::shared_ptr<const stm::SystemState> state, int priority, bool span_status);
  void send_query_result(SpanId span, const std::string& text, bool ok, bool span_status);
  const stm::ProofBranch* branch_of_qed(stm::StateId qed_node) const;

  ServerOptions options_;
  LineSink sink_;

  // Reader state.
  std::string reader_doc_id_;
  std::string reader_text_;
  std::uint64_t reader_revision_ = 0;

  // Session inbox.
  std::mutex inbox_mu_;
  std::condition_variable inbox_cv_;
  std::deque<Event> inbox_;

  // Writer.
  mutable std::mutex out_mu_;
  std::condition_variable out_cv_;
  std::deque<Json> out_;
  std::uint64_t latest_revision_ = 0;
  bool out_closed_ = false;
  std::thread writer_;

  // Session state.
  std::unique_ptr<taskqueue::TaskQueue> queue_;
  std::unique_ptr<stm::Stm> stm_;
  std::uint64_t revision_ = 0;
  std::set<SpanId> perspective_;
  std::map<SpanId, stm::SpanStatus> sent_status_;
  std::map<SpanId, std::string> sent_goals_;
  std::map<stm::StateId, std::uint64_t> proof_tasks_;
  std::vector<std::pair<stm::ProofJob, int>> local_jobs_;
};

// Serves one connection over a pair of descriptors until shutdown or end of
// input. Sends the hello line first.
int serve_fds(int in_fd, int out_fd, const ServerOptions& options);

// Listens on host:port and serves the first connection.
int serve_tcp(const std::string& host, int port, const ServerOptions& options);

}  // namespace sprover::protocol
