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

#include "sprover/protocol/protocol.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <iostream>

#include "sprover/compile/compile.h"

namespace sprover::protocol {

using stm::SpanStatus;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Json feedback(SpanId span, std::uint64_t revision, const char* kind) {
  return Json{{"type", "feedback"}, {"span_id", span}, {"revision", revision}, {"kind", kind}};
}

bool is_cancelled(const kernel::PromiseResult& r) {
  const auto* f = std::get_if<kernel::PromiseFailure>(&r);
  return f && f->cancelled;
}

void write_line(int fd, const std::string& line) {
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t n = data.size();
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == ENOTSOCK) w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return;
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

std::string apply_edits(std::string_view text, const std::vector<Edit>& edits) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    switch (e.kind) {
      case Edit::Kind::Retain:
        if (e.count > text.size() - pos) throw ProtocolError("retain past the end of the text");
        out.append(text.substr(pos, e.count));
        pos += e.count;
        break;
      case Edit::Kind::Delete:
        if (e.count > text.size() - pos) throw ProtocolError("delete past the end of the text");
        pos += e.count;
        break;
      case Edit::Kind::Insert:
        out += e.text;
        break;
    }
  }
  out.append(text.substr(pos));
  return out;
}

Json encode(const ClientMessage& m) {
  return std::visit(
      Overloaded{
          [](const UpdateMsg& u) {
            Json edits = Json::array();
            for (const auto& e : u.edits) {
              switch (e.kind) {
                case Edit::Kind::Retain: edits.push_back(Json{{"retain", e.count}}); break;
                case Edit::Kind::Delete: edits.push_back(Json{{"delete", e.count}}); break;
                case Edit::Kind::Insert: edits.push_back(Json{{"insert", e.text}}); break;
              }
            }
            return Json{{"type", "update"}, {"document_id", u.document_id}, {"edits", edits}};
          },
          [](const PerspectiveMsg& p) {
            return Json{{"type", "perspective"}, {"document_id", p.document_id}, {"span_ids", p.span_ids}};
          },
          [](const QueryMsg& q) { return Json{{"type", "query"}, {"span_id", q.span_id}, {"text", q.text}}; },
          [](const ShutdownMsg&) { return Json{{"type", "shutdown"}}; },
      },
      m);
}

ClientMessage decode_client(const Json& j) {
  try {
    if (!j.is_object()) throw ProtocolError("message must be an object");
    const std::string type = j.at("type").get<std::string>();
    if (type == "update") {
      UpdateMsg u;
      u.document_id = j.at("document_id").get<std::string>();
      for (const auto& e : j.at("edits")) {
        if (!e.is_object() || e.size() != 1) throw ProtocolError("an edit has exactly one field");
        if (e.contains("retain")) {
          u.edits.push_back(Edit{Edit::Kind::Retain, e.at("retain").get<std::size_t>(), {}});
        } else if (e.contains("delete")) {
          u.edits.push_back(Edit{Edit::Kind::Delete, e.at("delete").get<std::size_t>(), {}});
        } else if (e.contains("insert")) {
          u.edits.push_back(Edit{Edit::Kind::Insert, 0, e.at("insert").get<std::string>()});
        } else {
          throw ProtocolError("unknown edit " + e.dump());
        }
      }
      return u;
    }
    if (type == "perspective") {
      return PerspectiveMsg{j.at("document_id").get<std::string>(),
                            j.at("span_ids").get<std::vector<SpanId>>()};
    }
    if (type == "query") return QueryMsg{j.at("span_id").get<SpanId>(), j.at("text").get<std::string>()};
    if (type == "shutdown") return ShutdownMsg{};
    throw ProtocolError("unknown message type '" + type + "'");
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

Json status_feedback(SpanId span, std::uint64_t revision, SpanStatus status,
                     const std::string& message, std::size_t begin, std::size_t end) {
  Json j = feedback(span, revision, "status");
  j["status"] = stm::to_string(status);
  j["message"] = message;
  j["range"] = Json::array({begin, end});
  return j;
}

Json goals_feedback(SpanId span, std::uint64_t revision, const std::string& goals) {
  Json j = feedback(span, revision, "goals");
  j["goals"] = goals;
  return j;
}

Json markup_feedback(SpanId span, std::uint64_t revision, const std::vector<stm::Hyperlink>& links) {
  Json j = feedback(span, revision, "markup");
  Json arr = Json::array();
  for (const auto& l : links) {
    arr.push_back(Json{{"range", Json::array({l.offset, l.offset + l.length})},
                       {"name", l.name},
                       {"target", l.target ? Json(*l.target) : Json(nullptr)}});
  }
  j["hyperlinks"] = std::move(arr);
  return j;
}

Json query_feedback(SpanId span, std::uint64_t revision, const std::string& text) {
  Json j = feedback(span, revision, "query_result");
  j["text"] = text;
  return j;
}

Json error_feedback(SpanId span, std::uint64_t revision, const std::string& message) {
  Json j = feedback(span, revision, "error");
  j["message"] = message;
  return j;
}

Server::Server(ServerOptions options, LineSink sink)
    : options_(std::move(options)), sink_(std::move(sink)) {
  stm::StmOptions so;
  std::vector<std::string> path = options_.search_path;
  so.require = [path](const kernel::Environment& env, const std::string& m) {
    return compile::require_load(env, m, path);
  };
  if (options_.workers > 0) {
    queue_ = std::make_unique<taskqueue::TaskQueue>(options_.workers, options_.queue);
    so.par_runner = taskqueue::make_par_runner(*queue_);
  }
  stm_ = std::make_unique<stm::Stm>(std::move(so));
  writer_ = std::thread([this] { writer_loop(); });
  emit(Json{{"type", "hello"}, {"version", kProtocolVersion}});
}

Server::~Server() {
  // Queue callbacks post to the inbox, so the queue goes first.
  queue_.reset();
  {
    std::lock_guard lock(out_mu_);
    out_closed_ = true;
  }
  out_cv_.notify_all();
  writer_.join();
}

void Server::emit(Json line) {
  {
    std::lock_guard lock(out_mu_);
    if (line.value("type", "") == "ack") {
      latest_revision_ = std::max(latest_revision_, line.at("revision").get<std::uint64_t>());
    }
    out_.push_back(std::move(line));
  }
  out_cv_.notify_one();
}

void Server::writer_loop() {
  for (;;) {
    Json line;
    {
      std::unique_lock lock(out_mu_);
      out_cv_.wait(lock, [this] { return out_closed_ || !out_.empty(); });
      if (out_.empty()) return;
      line = std::move(out_.front());
      out_.pop_front();
      // Feedback computed for a revision the client has already replaced.
      const std::string type = line.value("type", "");
      if ((type == "feedback" || type == "spans") && line.at("revision").get<std::uint64_t>() < latest_revision_) {
        continue;
      }
    }
    sink_(line.dump());
  }
}

void Server::post(Event e) {
  {
    std::lock_guard lock(inbox_mu_);
    inbox_.push_back(std::move(e));
  }
  inbox_cv_.notify_one();
}

bool Server::feed_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    emit(error_feedback(-1, reader_revision_, std::string("malformed JSON: ") + e.what()));
    return true;
  }
  ClientMessage m;
  try {
    m = decode_client(j);
  } catch (const ProtocolError& e) {
    emit(error_feedback(-1, reader_revision_, e.what()));
    return true;
  }
  if (auto* u = std::get_if<UpdateMsg>(&m)) {
    std::string base = u->document_id == reader_doc_id_ ? reader_text_ : std::string();
    std::string text;
    try {
      text = apply_edits(base, u->edits);
    } catch (const ProtocolError& e) {
      emit(error_feedback(-1, reader_revision_, e.what()));
      return true;
    }
    reader_doc_id_ = u->document_id;
    reader_text_ = text;
    ++reader_revision_;
    emit(Json{{"type", "ack"}, {"document_id", reader_doc_id_}, {"revision", reader_revision_}});
    post(UpdateEvent{reader_revision_, std::move(text)});
    return true;
  }
  if (auto* p = std::get_if<PerspectiveMsg>(&m)) {
    post(*p);
    return true;
  }
  if (auto* q = std::get_if<QueryMsg>(&m)) {
    post(*q);
    return true;
  }
  post(ShutdownMsg{});
  return false;
}

bool Server::update_pending() {
  std::lock_guard lock(inbox_mu_);
  return std::any_of(inbox_.begin(), inbox_.end(), [](const Event& e) {
    return std::holds_alternative<UpdateEvent>(e) || std::holds_alternative<ShutdownMsg>(e);
  });
}

void Server::run_session() {
  for (;;) {
    Event e;
    {
      std::unique_lock lock(inbox_mu_);
      if (inbox_.empty() && !local_jobs_.empty()) {
        lock.unlock();
        run_local_jobs();
        continue;
      }
      inbox_cv_.wait(lock, [this] { return !inbox_.empty(); });
      e = std::move(inbox_.front());
      inbox_.pop_front();
      // Only the newest text matters.
      if (std::holds_alternative<UpdateEvent>(e) &&
          std::any_of(inbox_.begin(), inbox_.end(),
                      [](const Event& x) { return std::holds_alternative<UpdateEvent>(x); })) {
        continue;
      }
    }
    if (std::holds_alternative<ShutdownMsg>(e)) break;
    std::visit(Overloaded{
                   [this](UpdateEvent& u) { on_update(u); },
                   [this](PerspectiveMsg& p) {
                     perspective_ = std::set<SpanId>(p.span_ids.begin(), p.span_ids.end());
                     observe_pass();
                   },
                   [this](QueryMsg& q) { on_query(q); },
                   [](ShutdownMsg&) {},
                   [this](ProofDone& d) { on_proof_done(d); },
                   [this](QueryDone& d) {
                     if (d.revision == revision_) send_query_result(d.span, d.text, d.ok, d.span_status);
                   },
               },
               e);
  }
}

void Server::send_status(SpanId span, SpanStatus status, const std::string& message) {
  const auto* ds = stm_->span(span);
  if (!ds) return;
  auto it = sent_status_.find(span);
  if (it != sent_status_.end()) {
    // processing -> processed | failed, each at most once per revision.
    if (it->second != SpanStatus::Processing || status == SpanStatus::Processing) return;
  }
  sent_status_[span] = status;
  emit(status_feedback(span, revision_, status, message, ds->span.offset,
                       ds->span.offset + ds->span.text.size()));
}

void Server::send_branch(const stm::ProofBranch& b, const kernel::PromiseResult& r) {
  for (const auto& ev : stm_->branch_statuses(b, r)) send_status(ev.span, ev.status, ev.message);
}

const stm::ProofBranch* Server::branch_of_qed(stm::StateId qed_node) const {
  return stm_->dag().branch_of_qed(qed_node);
}

void Server::on_update(UpdateEvent& u) {
  revision_ = u.revision;
  sent_status_.clear();
  sent_goals_.clear();
  stm::UpdateResult res = stm_->update_document(u.text);

  const auto& nodes = stm_->dag().nodes;
  const std::set<stm::StateId> live(nodes.begin(), nodes.end());
  for (auto it = proof_tasks_.begin(); it != proof_tasks_.end();) {
    it = live.count(it->first) ? std::next(it) : proof_tasks_.erase(it);
  }
  local_jobs_.erase(std::remove_if(local_jobs_.begin(), local_jobs_.end(),
                                   [](const auto& j) { return j.first.comp.cancel.is_set(); }),
                    local_jobs_.end());

  Json spans = Json::array();
  for (const auto& ds : stm_->spans()) {
    spans.push_back(Json{{"span_id", ds.span.id}, {"offset", ds.span.offset}, {"length", ds.span.text.size()}});
  }
  emit(Json{{"type", "spans"}, {"revision", revision_}, {"spans", std::move(spans)}});
  for (SpanId id : res.invalidated) send_status(id, SpanStatus::Processing, {});
  observe_pass();
}

void Server::observe_pass() {
  stm::ObserveHooks h;
  h.status = [this](SpanId s, SpanStatus st, const std::string& msg) { send_status(s, st, msg); };
  h.goals = [this](SpanId s, const std::string& g) {
    auto it = sent_goals_.find(s);
    if (it != sent_goals_.end() && it->second == g) return;
    sent_goals_[s] = g;
    emit(goals_feedback(s, revision_, g));
  };
  h.markup = [this](SpanId s, const std::vector<stm::Hyperlink>& links) {
    emit(markup_feedback(s, revision_, links));
  };
  h.enqueue_proof = [this](stm::ProofJob job, int prio) {
    if (!queue_) {
      local_jobs_.emplace_back(std::move(job), prio);
      return;
    }
    const stm::StateId node = job.qed_node;
    kernel::ProofPromise promise = job.promise;
    taskqueue::Task t = taskqueue::make_proof_task(
        job, prio, [this, node, promise](const kernel::PromiseResult& r) { post(ProofDone{node, promise, r}); });
    proof_tasks_[node] = queue_->enqueue(std::move(t));
  };
  h.reprioritize = [this](stm::StateId node, int prio) {
    if (queue_) {
      if (auto it = proof_tasks_.find(node); it != proof_tasks_.end()) queue_->set_priority(it->second, prio);
      return;
    }
    for (auto& [job, p] : local_jobs_) {
      if (job.qed_node == node) p = prio;
    }
  };
  h.enqueue_query = [this](SpanId s, const vernac::CommandAst& cmd,
                           std::shared_ptr<const stm::SystemState> st, int prio) {
    run_query_task(s, cmd, std::move(st), prio + 1, true);
  };
  h.interrupted = [this] { return update_pending(); };
  stm_->observe(perspective_, h);

  // Proofs whose outcome is already known.
  for (const auto& b : stm_->dag().proofs) {
    if (!b.qed_node) continue;
    auto p = stm_->promise_of(*b.qed_node);
    if (p && p->status() != kernel::ProofPromise::Status::Delegated) send_branch(b, p->force());
  }
}

void Server::run_local_jobs() {
  std::stable_sort(local_jobs_.begin(), local_jobs_.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  auto [job, prio] = std::move(local_jobs_.front());
  local_jobs_.erase(local_jobs_.begin());
  if (job.comp.cancel.is_set()) return;
  kernel::PromiseResult r = job.promise.force();
  on_proof_done(ProofDone{job.qed_node, job.promise, r});
}

void Server::on_proof_done(const ProofDone& d) {
  if (is_cancelled(d.result)) return;
  const stm::ProofBranch* b = branch_of_qed(d.qed_node);
  if (!b) return;
  auto current = stm_->promise_of(d.qed_node);
  if (!current || !current->same_cell(d.promise)) return;
  send_branch(*b, d.result);
}

void Server::send_query_result(SpanId span, const std::string& text, bool ok, bool span_status) {
  emit(ok ? query_feedback(span, revision_, text) : error_feedback(span, revision_, text));
  if (span_status) send_status(span, ok ? SpanStatus::Processed : SpanStatus::Failed, ok ? std::string() : text);
}

void Server::run_query_task(SpanId span, const vernac::CommandAst& cmd,
                            std::shared_ptr<const stm::SystemState> state, int priority, bool span_status) {
  if (!queue_) {
    try {
      send_query_result(span, stm::run_query(*state, cmd), true, span_status);
    } catch (const std::exception& e) {
      send_query_result(span, e.what(), false, span_status);
    }
    return;
  }
  taskqueue::Task t;
  t.payload = taskqueue::QueryTask{span, cmd, 0, std::move(state)};
  t.priority = priority;
  const std::uint64_t rev = revision_;
  t.on_done = [this, rev, span, span_status](const taskqueue::Response& r) {
    if (r.outcome == taskqueue::Outcome::Finished) {
      post(QueryDone{rev, span, r.payload.at("text").get<std::string>(), true, span_status});
    } else if (r.outcome == taskqueue::Outcome::Failed) {
      post(QueryDone{rev, span, r.failure.message, false, span_status});
    }
  };
  queue_->enqueue(std::move(t));
}

void Server::on_query(const QueryMsg& q) {
  vernac::ParsedCommand parsed;
  try {
    parsed = vernac::parse(q.text);
  } catch (const vernac::ParseError& e) {
    emit(error_feedback(q.span_id, revision_, e.what()));
    return;
  }
  if (vernac::classify(parsed.ast) != vernac::Classification::Query) {
    emit(error_feedback(q.span_id, revision_, "not a query: " + q.text));
    return;
  }
  const auto& dag = stm_->dag();
  std::optional<stm::StateId> node;
  if (auto it = dag.query_state.find(q.span_id); it != dag.query_state.end()) {
    node = it->second;
  } else if (auto n = dag.span_node.find(q.span_id); n != dag.span_node.end()) {
    node = n->second;
  } else if (q.span_id == -1 || stm_->spans().empty()) {
    node = dag.master_tip;
  }
  if (!node) {
    emit(error_feedback(q.span_id, revision_, "unknown span " + std::to_string(q.span_id)));
    return;
  }
  try {
    run_query_task(q.span_id, parsed.ast, stm_->compute_state(*node), 1, false);
  } catch (const stm::StateError& e) {
    emit(error_feedback(q.span_id, revision_, e.what()));
  }
}

int serve_fds(int in_fd, int out_fd, const ServerOptions& options) {
  Server server(options, [out_fd](const std::string& line) { write_line(out_fd, line); });
  std::thread session([&server] { server.run_session(); });
  std::string buffer;
  char chunk[4096];
  bool open = true;
  while (open) {
    ssize_t n = ::read(in_fd, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while (open && (nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      open = server.feed_line(line);
    }
  }
  if (open) server.feed_line(R"({"type":"shutdown"})");
  session.join();
  return 0;
}

int serve_tcp(const std::string& host, int port, const ServerOptions& options) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    std::cerr << "socket: " << std::strerror(errno) << "\n";
    return compile::kExitIo;
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    std::cerr << "bad listen address " << host << "\n";
    ::close(fd);
    return compile::kExitIo;
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 1) != 0) {
    std::cerr << "cannot listen on " << host << ":" << port << ": " << std::strerror(errno) << "\n";
    ::close(fd);
    return compile::kExitIo;
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::cerr << "listening on " << host << ":" << ntohs(addr.sin_port) << std::endl;
  int conn = ::accept(fd, nullptr, nullptr);
  ::close(fd);
  if (conn < 0) return compile::kExitIo;
  int rc = serve_fds(conn, conn, options);
  ::close(conn);
  return rc;
}

}  // namespace sprover::protocol
