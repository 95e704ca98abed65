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

// Sentence chopping, parsing and classification of the command language.

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sprover/engine/engine.h"
#include "sprover/kernel/syntax.h"

namespace sprover::vernac {

using kernel::Formula;

using SpanId = std::int64_t;

struct Span {
  SpanId id = 0;
  // Raw sentence text, from its first non-blank character up to and
  // including the terminating '.'.
  std::string text;
  // Start position in the document, in bytes.
  std::size_t offset = 0;
  // Set for a trailing piece of text that could not be chopped (unterminated
  // comment or string, or missing final '.').
  bool unparsable = false;

  friend bool operator==(const Span&, const Span&) = default;
};

// Splits at '.' followed by whitespace or end of text, ignoring dots inside
// (nestable) comments and string literals. Ids are first_id, first_id+1, ...
std::vector<Span> chop(std::string_view text, SpanId first_id = 1);

struct DefinitionCmd {
  std::string name;
  std::vector<std::string> params;
  Formula body;
  friend bool operator==(const DefinitionCmd&, const DefinitionCmd&) = default;
};
struct AxiomCmd {
  std::string name;
  Formula statement;
  friend bool operator==(const AxiomCmd&, const AxiomCmd&) = default;
};
struct TheoremCmd {
  std::string name;
  Formula statement;
  friend bool operator==(const TheoremCmd&, const TheoremCmd&) = default;
};
struct HintCmd {
  engine::HintKind kind;
  std::vector<std::string> names;
  friend bool operator==(const HintCmd&, const HintCmd&) = default;
};
struct TacticCmd {
  engine::TacticAst tactic;
  friend bool operator==(const TacticCmd&, const TacticCmd&) = default;
};
struct QedCmd {
  friend bool operator==(const QedCmd&, const QedCmd&) = default;
};
struct CheckCmd {
  Formula formula;
  friend bool operator==(const CheckCmd&, const CheckCmd&) = default;
};
struct PrintCmd {
  std::string name;
  friend bool operator==(const PrintCmd&, const PrintCmd&) = default;
};
struct RequireCmd {
  std::string module;
  friend bool operator==(const RequireCmd&, const RequireCmd&) = default;
};

using CommandAst = std::variant<DefinitionCmd, AxiomCmd, TheoremCmd, HintCmd, TacticCmd, QedCmd,
                                CheckCmd, PrintCmd, RequireCmd>;

std::string to_string(const CommandAst& cmd);

// An identifier occurrence in the source text of a command, relative to the
// start of the span.
struct NameRef {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  friend bool operator==(const NameRef&, const NameRef&) = default;
};

struct ParsedCommand {
  CommandAst ast;
  // Global names referenced by the command (not binders it introduces).
  std::vector<NameRef> references;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        position_(position) {}
  // Offset within the span text.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Throws ParseError.
ParsedCommand parse(const Span& span);
ParsedCommand parse(std::string_view sentence);

enum class Classification : std::uint8_t { Global, Branch, Tactic, Merge, Query };

Classification classify(const CommandAst& ast);
const char* to_string(Classification c);

// Turns bare atoms naming definitions into nullary applications and checks
// every application against the environment. `bound` names (definition
// parameters) shadow definitions. Throws kernel::KernelError.
Formula resolve_formula(const kernel::Environment& env, const Formula& f,
                        const std::vector<std::string>& bound = {});

}  // namespace sprover::vernac
