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

#include "sprover/compile/compile.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

namespace sprover::compile {

namespace fs = std::filesystem;
using kernel::Environment;
using kernel::ProofPromise;

namespace {

constexpr std::string_view kVioMagic = "SVIO";
constexpr std::string_view kVoMagic = "SVO";

std::string pack(std::string_view magic, const Json& j) {
  std::string raw(magic);
  raw.push_back(static_cast<char>(kFormatVersion));
  raw += codec::canonical(j);
  return codec::gzip(raw);
}

Json unpack(std::string_view magic, std::string_view bytes) {
  std::string raw;
  try {
    raw = codec::gunzip(bytes);
  } catch (const codec::DecodeError& e) {
    throw CompileError(std::string("corrupt compiled file: ") + e.what(), kExitIo);
  }
  if (raw.size() < magic.size() + 1 || raw.compare(0, magic.size(), magic) != 0) {
    throw CompileError("not a " + std::string(magic) + " file", kExitIo);
  }
  if (static_cast<std::uint8_t>(raw[magic.size()]) != kFormatVersion) {
    throw CompileError("unsupported format version " +
                           std::to_string(static_cast<int>(static_cast<std::uint8_t>(raw[magic.size()]))),
                       kExitIo);
  }
  try {
    return Json::parse(raw.substr(magic.size() + 1));
  } catch (const Json::exception& e) {
    throw CompileError(std::string("corrupt compiled file: ") + e.what(), kExitIo);
  }
}

std::vector<stm::ProofJob> proof_jobs(stm::Stm& s) {
  std::vector<stm::ProofJob> jobs;
  stm::ObserveHooks hooks;
  hooks.enqueue_proof = [&](stm::ProofJob j, int) { jobs.push_back(std::move(j)); };
  s.observe({}, hooks);
  return jobs;
}

std::string span_prefix(const stm::Stm& s, vernac::SpanId id) {
  const auto* ds = s.span(id);
  if (!ds) return "";
  return "at offset " + std::to_string(ds->span.offset) + ": ";
}

// Builds the session and computes every master state. Throws CompileError.
Environment check_document(stm::Stm& s, std::string_view text) {
  s.update_document(text);
  const auto& errors = s.dag().build_errors;
  if (!errors.empty()) {
    const auto& [span, msg] = *errors.begin();
    throw CompileError(span_prefix(s, span) + msg, kExitDocument);
  }
  try {
    return s.master_environment();
  } catch (const stm::StateError& e) {
    throw CompileError((e.span() ? span_prefix(s, *e.span()) : "") + e.what(), kExitDocument);
  }
}

stm::StmOptions session_options(const CompileOptions& options) {
  stm::StmOptions so;
  std::vector<std::string> path = options.search_path;
  so.require = [path](const Environment& env, const std::string& m) {
    return require_load(env, m, path);
  };
  return so;
}

std::string request_target(const taskqueue::Request& r) {
  return r.body.at("name").get<std::string>();
}

// Installs outcomes into the document's own opaque entries.
void install(const Environment& env, const std::map<std::string, kernel::PromiseResult>& results) {
  for (const auto& e : env.entries()) {
    const auto* o = e.as_opaque();
    if (!o || !e.origin().empty()) continue;
    auto it = results.find(o->name);
    if (it == results.end()) continue;
    if (const auto* t = std::get_if<kernel::Term>(&it->second)) {
      o->promise->rebind(ProofPromise::finished(o->statement, 0, *t));
    } else {
      o->promise->rebind(ProofPromise::failed(o->statement, 0, std::get<kernel::PromiseFailure>(it->second)));
    }
  }
}

FullResult finish(const std::string& module, const std::string& digest, const Environment& env) {
  FullResult r;
  r.failures = kernel::check_swf(env, kernel::SwfScope::LocalOnly);
  r.vo.module = module;
  r.vo.source_digest = digest;
  r.vo.environment = codec::encode(env, codec::ProofMode::WithProofs);
  r.vo.swf = r.failures.empty();
  r.exit_code = r.failures.empty() ? kExitOk : kExitProof;
  return r;
}

std::string with_extension(const std::string& path, const std::string& ext) {
  fs::path p(path);
  p.replace_extension(ext);
  return p.string();
}

void report(const FullResult& r) {
  for (const auto& f : r.failures) std::cerr << "proof of " << f.name << " failed: " << f.error << "\n";
}

}  // namespace

Json encode(const VioFile& f) {
  Json spans = Json::array();
  for (const auto& s : f.spans) spans.push_back(Json{{"id", s.id}, {"offset", s.offset}, {"length", s.length}});
  Json reqs = Json::array();
  for (const auto& r : f.requests) reqs.push_back(taskqueue::encode(r));
  return Json{{"module", f.module},
              {"source_digest", f.source_digest},
              {"environment", f.environment},
              {"spans", std::move(spans)},
              {"requests", std::move(reqs)}};
}

VioFile decode_vio(const Json& j) {
  try {
    VioFile f;
    f.module = j.at("module").get<std::string>();
    f.source_digest = j.at("source_digest").get<std::string>();
    f.environment = j.at("environment");
    for (const auto& s : j.at("spans")) {
      f.spans.push_back(SpanEntry{s.at("id").get<vernac::SpanId>(), s.at("offset").get<std::size_t>(),
                                  s.at("length").get<std::size_t>()});
    }
    for (const auto& r : j.at("requests")) f.requests.push_back(taskqueue::decode_request(r));
    return f;
  } catch (const std::exception& e) {
    throw CompileError(std::string("malformed .vio: ") + e.what(), kExitIo);
  }
}

Json encode(const VoFile& f) {
  return Json{{"module", f.module},
              {"source_digest", f.source_digest},
              {"environment", f.environment},
              {"swf", f.swf}};
}

VoFile decode_vo(const Json& j) {
  try {
    VoFile f;
    f.module = j.at("module").get<std::string>();
    f.source_digest = j.at("source_digest").get<std::string>();
    f.environment = j.at("environment");
    f.swf = j.at("swf").get<bool>();
    return f;
  } catch (const Json::exception& e) {
    throw CompileError(std::string("malformed .vo: ") + e.what(), kExitIo);
  }
}

bool operator==(const VoFile& a, const VoFile& b) {
  return codec::canonical(encode(a)) == codec::canonical(encode(b));
}

std::string vio_bytes(const VioFile& f) { return pack(kVioMagic, encode(f)); }
std::string vo_bytes(const VoFile& f) { return pack(kVoMagic, encode(f)); }
VioFile vio_of_bytes(std::string_view bytes) { return decode_vio(unpack(kVioMagic, bytes)); }
VoFile vo_of_bytes(std::string_view bytes) { return decode_vo(unpack(kVoMagic, bytes)); }

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CompileError("cannot write " + path, kExitIo);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CompileError("cannot read " + path, kExitIo);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string source_digest(std::string_view text) { return codec::sha256_hex(text); }

std::vector<std::string> search_path(const std::vector<std::string>& include_dirs) {
  std::vector<std::string> out = include_dirs;
  if (const char* env = std::getenv("SPROVER_PATH")) {
    std::stringstream ss(env);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (!dir.empty()) out.push_back(dir);
    }
  }
  return out;
}

Environment require_load(const Environment& env, const std::string& module,
                         const std::vector<std::string>& path) {
  Json entries;
  std::map<std::string, taskqueue::Request> requests;
  bool found = false;
  for (const auto& dir : path) {
    fs::path vo = fs::path(dir) / (module + ".vo");
    fs::path vio = fs::path(dir) / (module + ".vio");
    if (fs::exists(vo)) {
      entries = vo_of_bytes(read_file(vo.string())).environment;
      found = true;
    } else if (fs::exists(vio)) {
      VioFile f = vio_of_bytes(read_file(vio.string()));
      entries = f.environment;
      for (auto& r : f.requests) requests.emplace(request_target(r), std::move(r));
      found = true;
    }
    if (found) break;
  }
  if (!found) throw std::runtime_error("module '" + module + "' not found on the search path");

  Environment loaded = codec::decode_environment(entries);
  Environment out = env;
  for (const auto& e : loaded.entries()) {
    const std::string origin = e.origin().empty() ? module : e.origin();
    if (const auto* existing = out.find(e.name())) {
      // Loaded before, directly or through another module.
      if (existing->origin() == origin) continue;
      throw std::runtime_error("name clash: '" + e.name() + "' from module '" + module +
                               "' is already defined");
    }
    const auto* o = e.as_opaque();
    auto r = requests.find(e.name());
    if (o && e.origin().empty() && r != requests.end()) {
      taskqueue::Request req = r->second;
      auto forcer = [req]() -> kernel::PromiseResult {
        taskqueue::WorkerCache cache;
        return taskqueue::to_result(taskqueue::perform(taskqueue::encode(req), cache));
      };
      kernel::Opaque item{o->name, o->statement,
                          std::make_shared<kernel::PromiseSlot>(
                              ProofPromise::delegated(o->statement, 0, 0, std::move(forcer)))};
      out = out.appended_unchecked(kernel::EnvEntry(std::move(item), origin));
    } else {
      out = out.appended_unchecked(kernel::EnvEntry(e.item(), origin));
    }
  }
  return out;
}

FullResult compile_full(std::string_view text, const std::string& module,
                        const CompileOptions& options) {
  std::unique_ptr<taskqueue::TaskQueue> queue;
  stm::StmOptions so = session_options(options);
  if (options.workers > 0) {
    queue = std::make_unique<taskqueue::TaskQueue>(options.workers);
    so.par_runner = taskqueue::make_par_runner(*queue);
  }
  stm::Stm s(so);
  Environment env = check_document(s, text);
  if (queue) {
    for (auto& job : proof_jobs(s)) queue->enqueue(taskqueue::make_proof_task(job, 0));
    queue->wait_idle();
  }
  return finish(module, source_digest(text), env);
}

VioFile compile_quick(std::string_view text, const std::string& module,
                      const CompileOptions& options) {
  stm::Stm s(session_options(options));
  Environment env = check_document(s, text);
  taskqueue::TaskQueue queue(0);
  for (auto& job : proof_jobs(s)) queue.enqueue(taskqueue::make_proof_task(job, 0));
  VioFile f;
  f.module = module;
  f.source_digest = source_digest(text);
  f.environment = codec::encode(env, codec::ProofMode::StatementsOnly);
  for (const auto& ds : s.spans()) f.spans.push_back(SpanEntry{ds.span.id, ds.span.offset, ds.span.text.size()});
  f.requests = queue.dump();
  return f;
}

taskqueue::Task task_of_request(const taskqueue::Request& r) {
  if (!r.full) throw CompileError("a dumped request must carry its state", kExitIo);
  stm::SystemState state = stm::decode_state(r.snapshot);
  taskqueue::Task t;
  switch (r.kind) {
    case taskqueue::TaskKind::Proof: {
      stm::PureComputation comp;
      comp.base_state = std::make_shared<const stm::SystemState>(std::move(state));
      comp.program = stm::decode_program(r.body.at("program"));
      comp.produces = codec::decode_formula(r.body.at("produces"));
      comp.closing_span = r.body.at("closing_span").get<vernac::SpanId>();
      comp.name = request_target(r);
      t.payload = taskqueue::ProofTask{comp, comp.name};
      break;
    }
    case taskqueue::TaskKind::Query:
      t.payload = taskqueue::QueryTask{r.body.at("span").get<vernac::SpanId>(),
                                       codec::decode_command(r.body.at("command")), 0,
                                       std::make_shared<const stm::SystemState>(std::move(state))};
      break;
    case taskqueue::TaskKind::Par:
      t.payload = taskqueue::ParTask{codec::decode_goal(r.body.at("goal")),
                                     codec::decode_tactic(r.body.at("tactic")), state.env, state.hints};
      break;
  }
  return t;
}

FullResult vio2vo(const VioFile& vio, int workers, const std::string& expected_digest) {
  if (!expected_digest.empty() && expected_digest != vio.source_digest) {
    throw CompileError("stale .vio: source digest differs", kExitDocument);
  }
  Environment env = codec::decode_environment(vio.environment);
  std::map<std::string, kernel::PromiseResult> results;
  if (workers == 0) {
    taskqueue::WorkerCache cache;
    for (const auto& r : vio.requests) {
      results[request_target(r)] = taskqueue::to_result(taskqueue::perform(taskqueue::encode(r), cache));
    }
  } else {
    std::mutex mu;
    taskqueue::TaskQueue queue(workers);
    for (const auto& r : vio.requests) {
      taskqueue::Task t = task_of_request(r);
      t.on_done = [&mu, &results, name = request_target(r)](const taskqueue::Response& resp) {
        std::lock_guard lock(mu);
        results[name] = taskqueue::to_result(resp);
      };
      queue.enqueue(std::move(t));
    }
    queue.wait_idle();
  }
  install(env, results);
  return finish(vio.module, vio.source_digest, env);
}

std::string module_name(const std::string& path) { return fs::path(path).stem().string(); }

int compile_file(const std::string& path, bool quick, const CompileOptions& options) {
  try {
    const std::string text = read_file(path);
    const std::string module = module_name(path);
    if (quick) {
      write_file(with_extension(path, ".vio"), vio_bytes(compile_quick(text, module, options)));
      return kExitOk;
    }
    FullResult r = compile_full(text, module, options);
    write_file(with_extension(path, ".vo"), vo_bytes(r.vo));
    report(r);
    return r.exit_code;
  } catch (const CompileError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return e.exit_code();
  }
}

int vio2vo_file(const std::string& path, int workers) {
  try {
    VioFile vio = vio_of_bytes(read_file(path));
    std::string expected;
    const std::string source = with_extension(path, ".v");
    if (fs::exists(source)) expected = source_digest(read_file(source));
    FullResult r = vio2vo(vio, workers, expected);
    write_file(with_extension(path, ".vo"), vo_bytes(r.vo));
    report(r);
    return r.exit_code;
  } catch (const CompileError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return e.exit_code();
  }
}

namespace {

// Relative cost of one auto search goal and of one formula node in a
// definition body, as measured on the reference build (see README).
constexpr double kGoalCost = 1.0;
constexpr double kNodeCost = 1.5;
constexpr int kLeavesPerDefinition = 64;

// A balanced conjunction/disjunction tree over P and Q with `leaves` leaves.
std::string filler_body(int leaves, int& flip) {
  if (leaves == 1) return (flip++ % 2) ? "P" : "Q";
  int left = leaves / 2;
  std::string op = (flip % 3 == 0) ? " \\/ " : " /\\ ";
  return "(" + filler_body(left, flip) + op + filler_body(leaves - left, flip) + ")";
}

}  // namespace

std::string bench_generate(const BenchParams& p) {
  std::string out = "(* Synthetic benchmark: " + std::to_string(p.theorems) + " theorems, depth " +
                    std::to_string(p.depth) + ". *)\n";
  for (int i = 0; i < p.theorems; ++i) {
    out += "Theorem bench_" + std::to_string(i) + " : (B -> B) -> (B -> B) -> C -> B \\/ C.\n";
    out += "Proof.\n  auto " + std::to_string(p.depth) + ".\nQed.\n";
  }
  const double per_proof = kGoalCost * std::ldexp(1.0, std::max(0, p.depth - 4));
  const double fraction = std::clamp(p.proof_fraction, 0.01, 1.0);
  const double master = p.theorems * per_proof * (1.0 - fraction) / fraction;
  const long definitions = std::lround(master / (kNodeCost * kLeavesPerDefinition));
  for (long i = 0; i < definitions; ++i) {
    int flip = static_cast<int>(i);
    out += "Definition fill_" + std::to_string(i) + " (P Q : Prop) := " +
           filler_body(kLeavesPerDefinition, flip) + ".\n";
  }
  return out;
}

BenchTimes bench_run(std::string_view text, int workers) {
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  BenchTimes t;
  CompileOptions opts;
  opts.workers = workers;
  auto t0 = Clock::now();
  compile_full(text, "bench", opts);
  t.full_ms = ms(Clock::now() - t0);
  t0 = Clock::now();
  VioFile vio = compile_quick(text, "bench", opts);
  t.quick_ms = ms(Clock::now() - t0);
  t0 = Clock::now();
  vio2vo(vio, workers);
  t.vio2vo_ms = ms(Clock::now() - t0);
  return t;
}

}  // namespace sprover::compile
