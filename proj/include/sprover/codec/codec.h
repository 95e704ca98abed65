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

// The one serialization used on the wire and in compiled files: canonical
// JSON (sorted keys, no insignificant whitespace), SHA-256 digests over it,
// and deterministic gzip for files.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "sprover/engine/engine.h"
#include "sprover/kernel/environment.h"
#include "sprover/vernac/vernac.h"

namespace sprover::codec {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json encode(const kernel::Formula& f);
kernel::Formula decode_formula(const Json& j);

Json encode(const kernel::Term& t);
kernel::Term decode_term(const Json& j);

Json encode(const kernel::PromiseFailure& f);
kernel::PromiseFailure decode_failure(const Json& j);

Json encode(const engine::Goal& g);
engine::Goal decode_goal(const Json& j);

Json encode(const engine::HintDb& h);
engine::HintDb decode_hints(const Json& j);

Json encode(const engine::TacticAst& t);
engine::TacticAst decode_tactic(const Json& j);

Json encode(const engine::ProofState& ps);
engine::ProofState decode_proof_state(const Json& j);

Json encode(const vernac::CommandAst& c);
vernac::CommandAst decode_command(const Json& j);

enum class ProofMode { StatementsOnly, WithProofs };

// With StatementsOnly, opaque entries carry their statement alone. With
// WithProofs, finished terms and failures of the document's own entries are
// written too; delegated promises are written as pending. Entries loaded from
// other modules never carry proofs.
Json encode(const kernel::Environment& env, ProofMode mode);

// Opaque entries come back Finished or Failed when the encoding carries an
// outcome, otherwise Delegated without a computation handle.
kernel::Environment decode_environment(const Json& j);

std::string canonical(const Json& j);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

// sha256_hex(canonical(j)).
std::string digest(const Json& j);

// Deterministic gzip (no timestamp, no file name). Throws DecodeError on
// corrupt input to gunzip.
std::string gzip(std::string_view bytes);
std::string gunzip(std::string_view bytes);

}  // namespace sprover::codec
