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

// Batch compilation. The full chain checks every proof and writes a .vo; the
// quick chain only computes statements and writes a .vio holding the pending
// proof requests, which vio2vo later completes into the same .vo.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sprover/codec/codec.h"
#include "sprover/kernel/typecheck.h"
#include "sprover/stm/stm.h"
#include "sprover/taskqueue/taskqueue.h"

namespace sprover::compile {

using codec::Json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitDocument = 1;
inline constexpr int kExitProof = 2;
inline constexpr int kExitIo = 3;

inline constexpr std::uint8_t kFormatVersion = 1;

// Carries the exit status the CLI reports for it.
class CompileError : public std::runtime_error {
 public:
  CompileError(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct SpanEntry {
  vernac::SpanId id = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  friend bool operator==(const SpanEntry&, const SpanEntry&) = default;
};

// Statements of every entry, one pending request per opaque proof of the
// document itself.
struct VioFile {
  std::string module;
  std::string source_digest;
  Json environment;
  std::vector<SpanEntry> spans;
  std::vector<taskqueue::Request> requests;
};

// Proof terms of the document's own entries. `swf` is set only when every
// one of them was forced and checked.
struct VoFile {
  std::string module;
  std::string source_digest;
  Json environment;
  bool swf = false;
};

Json encode(const VioFile& f);
VioFile decode_vio(const Json& j);
Json encode(const VoFile& f);
VoFile decode_vo(const Json& j);

// Structural equality: same canonical encoding.
bool operator==(const VoFile& a, const VoFile& b);

// File bytes: gzip of magic, version byte and canonical JSON. Reading throws
// CompileError with kExitIo.
std::string vio_bytes(const VioFile& f);
std::string vo_bytes(const VoFile& f);
VioFile vio_of_bytes(std::string_view bytes);
VoFile vo_of_bytes(std::string_view bytes);

void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

std::string source_digest(std::string_view text);

struct CompileOptions {
  int workers = 0;
  // Directories searched for compiled modules, in order.
  std::vector<std::string> search_path;
};

// The -I directories followed by SPROVER_PATH (colon-separated).
std::vector<std::string> search_path(const std::vector<std::string>& include_dirs);

// Appends the entries of `module` (its .vo, else its .vio) found on the
// search path. Entries keep the module they come from as their origin and
// are skipped when already present from that origin, so requiring a module
// twice is harmless. Opaque entries from a .vio
// stay Delegated, backed by the stored request. Throws std::runtime_error on
// a missing module or a name clash.
kernel::Environment require_load(const kernel::Environment& env, const std::string& module,
                                 const std::vector<std::string>& search_path);

struct FullResult {
  VoFile vo;
  std::vector<kernel::SwfFailure> failures;
  int exit_code = kExitOk;
};

// Throws CompileError(kExitDocument) on parse or master errors.
FullResult compile_full(std::string_view text, const std::string& module,
                        const CompileOptions& options);
VioFile compile_quick(std::string_view text, const std::string& module,
                      const CompileOptions& options);

// Runs the pending requests on `workers` workers (in process when zero).
// Throws CompileError(kExitDocument) when `expected_digest` is non-empty and
// differs from the file's.
FullResult vio2vo(const VioFile& vio, int workers, const std::string& expected_digest = {});

// Rebuilds a queue task from a dumped request.
taskqueue::Task task_of_request(const taskqueue::Request& r);

// File-level drivers: read FILE.v, write FILE.vo / FILE.vio next to it.
// Return the exit status; errors are printed to stderr.
int compile_file(const std::string& path, bool quick, const CompileOptions& options);
int vio2vo_file(const std::string& path, int workers);

// Module name of a source or compiled file: its stem.
std::string module_name(const std::string& path);

struct BenchParams {
  int theorems = 100;
  // Auto search depth of each proof; the search visits about 2^(depth-4)
  // goals before succeeding.
  int depth = 14;
  // Share of sequential checking time spent in proofs.
  double proof_fraction = 0.9;
};

// Deterministic. Independent theorems followed by definitions sized so that
// the master work is (1 - fraction) / fraction of the proof work.
std::string bench_generate(const BenchParams& p);

struct BenchTimes {
  double full_ms = 0;
  double quick_ms = 0;
  double vio2vo_ms = 0;
};

BenchTimes bench_run(std::string_view text, int workers);

}  // namespace sprover::compile
