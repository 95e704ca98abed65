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

#include "sprover/vernac/vernac.h"

#include <algorithm>
#include <cctype>
#include <optional>

namespace sprover::vernac {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

// Skips a string literal starting at text[i] == '"'. Returns the index just
// past the closing quote, or npos when unterminated. "" is an escaped quote.
std::size_t skip_string(std::string_view text, std::size_t i) {
  ++i;
  while (i < text.size()) {
    if (text[i] == '"') {
      if (i + 1 < text.size() && text[i + 1] == '"') {
        i += 2;
        continue;
      }
      return i + 1;
    }
    ++i;
  }
  return std::string_view::npos;
}

// Skips a (possibly nested) comment starting at text[i] == '(' '*'. Strings
// inside comments are honored. Returns npos when unterminated.
std::size_t skip_comment(std::string_view text, std::size_t i) {
  int depth = 0;
  while (i < text.size()) {
    if (text[i] == '(' && i + 1 < text.size() && text[i + 1] == '*') {
      ++depth;
      i += 2;
    } else if (text[i] == '*' && i + 1 < text.size() && text[i + 1] == ')') {
      --depth;
      i += 2;
      if (depth == 0) return i;
    } else if (text[i] == '"') {
      i = skip_string(text, i);
      if (i == std::string_view::npos) return i;
    } else {
      ++i;
    }
  }
  return std::string_view::npos;
}

bool is_terminator(std::string_view text, std::size_t i) {
  return text[i] == '.' && (i + 1 == text.size() || is_space(text[i + 1]));
}

}  // namespace

std::vector<Span> chop(std::string_view text, SpanId first_id) {
  std::vector<Span> spans;
  constexpr auto npos = std::string_view::npos;
  std::size_t start = npos;
  bool has_content = false;
  std::size_t i = 0;

  auto emit = [&](std::size_t end, bool unparsable) {
    spans.push_back(Span{first_id++, std::string(text.substr(start, end - start)), start,
                         unparsable});
    start = npos;
    has_content = false;
  };

  while (i < text.size()) {
    char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (start == npos) start = i;
    if (c == '(' && i + 1 < text.size() && text[i + 1] == '*') {
      std::size_t end = skip_comment(text, i);
      if (end == npos) {
        emit(text.size(), true);
        return spans;
      }
      i = end;
      continue;
    }
    if (c == '"') {
      std::size_t end = skip_string(text, i);
      if (end == npos) {
        emit(text.size(), true);
        return spans;
      }
      has_content = true;
      i = end;
      continue;
    }
    has_content = true;
    if (is_terminator(text, i)) {
      emit(i + 1, false);
    }
    ++i;
  }
  if (start != npos && has_content) emit(text.size(), true);
  return spans;
}

namespace {

struct Token {
  enum class Kind { Ident, Number, Symbol, String, Dot, End };
  Kind kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '(' && i + 1 < s.size() && s[i + 1] == '*') {
      std::size_t end = skip_comment(s, i);
      if (end == std::string_view::npos) throw ParseError("unterminated comment", i);
      i = end;
      continue;
    }
    if (c == '"') {
      std::size_t end = skip_string(s, i);
      if (end == std::string_view::npos) throw ParseError("unterminated string", i);
      out.push_back({Token::Kind::String, std::string(s.substr(i, end - i)), i});
      i = end;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      out.push_back({Token::Kind::Ident, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({Token::Kind::Number, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (c == '.') {
      if (!is_terminator(s, i)) throw ParseError("unexpected '.'", i);
      out.push_back({Token::Kind::Dot, ".", i});
      ++i;
      continue;
    }
    static constexpr std::string_view kSymbols[] = {":=", "->", "/\\", "\\/", ":", "~",
                                                     "(",  ")",  ","};
    bool matched = false;
    for (auto sym : kSymbols) {
      if (s.substr(i, sym.size()) == sym) {
        out.push_back({Token::Kind::Symbol, std::string(sym), i});
        i += sym.size();
        matched = true;
        break;
      }
    }
    if (!matched) throw ParseError(std::string("unexpected character '") + c + "'", i);
  }
  out.push_back({Token::Kind::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(lex(text)) {}

  ParsedCommand command() {
    const Token& head = peek();
    if (head.kind != Token::Kind::Ident) fail("expected a command");
    const std::string word = head.text;
    CommandAst ast;
    if (word == "Definition") {
      next();
      DefinitionCmd d;
      d.name = binder_name();
      d.params = params();
      expect_symbol(":=");
      bound_ = d.params;
      d.body = formula();
      bound_.clear();
      ast = std::move(d);
    } else if (word == "Axiom" || word == "Theorem") {
      next();
      std::string name = binder_name();
      expect_symbol(":");
      Formula f = formula();
      if (word == "Axiom") {
        ast = AxiomCmd{std::move(name), std::move(f)};
      } else {
        ast = TheoremCmd{std::move(name), std::move(f)};
      }
    } else if (word == "Hint") {
      next();
      const Token& k = peek();
      engine::HintKind kind;
      if (k.kind == Token::Kind::Ident && k.text == "Resolve") {
        kind = engine::HintKind::Resolve;
      } else if (k.kind == Token::Kind::Ident && k.text == "Unfold") {
        kind = engine::HintKind::Unfold;
      } else {
        fail("expected Resolve or Unfold");
      }
      next();
      ast = HintCmd{kind, name_list()};
    } else if (word == "Qed") {
      next();
      ast = QedCmd{};
    } else if (word == "Check") {
      next();
      ast = CheckCmd{formula()};
    } else if (word == "Print") {
      next();
      ast = PrintCmd{reference_name()};
    } else if (word == "Require") {
      next();
      ast = RequireCmd{binder_name()};
    } else if (word == "par") {
      next();
      expect_symbol(":");
      ast = TacticCmd{engine::TacticAst::par(tactic())};
    } else {
      ast = TacticCmd{tactic()};
    }
    if (peek().kind != Token::Kind::Dot) fail("expected '.'");
    next();
    if (peek().kind != Token::Kind::End) fail("text after the end of the command");
    return ParsedCommand{std::move(ast), std::move(refs_)};
  }

 private:
  using K = engine::TacticAst::Kind;

  engine::TacticAst tactic() {
    const Token& t = peek();
    if (t.kind != Token::Kind::Ident) fail("expected a tactic");
    const std::string w = t.text;
    next();
    if (w == "Proof") return engine::TacticAst::simple(K::ProofMarker);
    if (w == "intro") {
      if (peek().kind == Token::Kind::Ident) return engine::TacticAst::named(K::Intro, binder_name());
      return engine::TacticAst::simple(K::Intro);
    }
    if (w == "intros") return engine::TacticAst::simple(K::Intros);
    if (w == "apply") return engine::TacticAst::named(K::Apply, reference_name());
    if (w == "exact") return engine::TacticAst::named(K::Exact, reference_name());
    if (w == "split") return engine::TacticAst::simple(K::Split);
    if (w == "left") return engine::TacticAst::simple(K::Left);
    if (w == "right") return engine::TacticAst::simple(K::Right);
    if (w == "assumption") return engine::TacticAst::simple(K::Assumption);
    if (w == "idtac") return engine::TacticAst::simple(K::Idtac);
    if (w == "fail") return engine::TacticAst::simple(K::Fail);
    if (w == "unfold") return engine::TacticAst::unfold(name_list());
    if (w == "auto") {
      if (peek().kind == Token::Kind::Number) {
        int d = std::stoi(peek().text);
        next();
        return engine::TacticAst::autom(d);
      }
      return engine::TacticAst::autom();
    }
    if (w == "par") fail("par: cannot be nested", t.offset);
    fail("unknown command or tactic '" + w + "'", t.offset);
  }

  std::vector<std::string> name_list() {
    std::vector<std::string> names;
    names.push_back(reference_name());
    for (;;) {
      if (is_symbol(",")) {
        next();
        names.push_back(reference_name());
      } else if (peek().kind == Token::Kind::Ident) {
        names.push_back(reference_name());
      } else {
        return names;
      }
    }
  }

  // "(P Q : Prop)" groups or bare names.
  std::vector<std::string> params() {
    std::vector<std::string> out;
    for (;;) {
      if (is_symbol("(")) {
        next();
        std::vector<std::string> group;
        while (peek().kind == Token::Kind::Ident) group.push_back(binder_name());
        if (group.empty()) fail("expected a parameter name");
        expect_symbol(":");
        const Token& ty = peek();
        if (ty.kind != Token::Kind::Ident || ty.text != "Prop") fail("parameters must be of type Prop");
        next();
        expect_symbol(")");
        out.insert(out.end(), group.begin(), group.end());
      } else if (peek().kind == Token::Kind::Ident) {
        out.push_back(binder_name());
      } else {
        return out;
      }
    }
  }

  Formula formula() {
    Formula lhs = disjunction();
    if (is_symbol("->")) {
      next();
      return Formula::impl(std::move(lhs), formula());
    }
    return lhs;
  }

  Formula disjunction() {
    Formula lhs = conjunction();
    if (is_symbol("\\/")) {
      next();
      return Formula::disj(std::move(lhs), disjunction());
    }
    return lhs;
  }

  Formula conjunction() {
    Formula lhs = unary();
    if (is_symbol("/\\")) {
      next();
      return Formula::conj(std::move(lhs), conjunction());
    }
    return lhs;
  }

  Formula unary() {
    if (is_symbol("~")) {
      next();
      return Formula::impl(unary(), Formula::falsity());
    }
    if (peek().kind == Token::Kind::Ident && !is_keyword(peek().text)) {
      std::string head = reference_name();
      std::vector<Formula> args;
      while (starts_atom()) args.push_back(atom());
      if (args.empty()) return Formula::atom(std::move(head));
      return Formula::def_app(std::move(head), std::move(args));
    }
    return atom();
  }

  bool starts_atom() const {
    const Token& t = peek();
    return t.kind == Token::Kind::Ident || (t.kind == Token::Kind::Symbol && t.text == "(");
  }

  Formula atom() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "True") {
        next();
        return Formula::truth();
      }
      if (t.text == "False") {
        next();
        return Formula::falsity();
      }
      return Formula::atom(reference_name());
    }
    if (is_symbol("(")) {
      next();
      Formula f = formula();
      expect_symbol(")");
      return f;
    }
    fail("expected a formula");
  }

  static bool is_keyword(const std::string& w) { return w == "True" || w == "False"; }

  // A name that introduces something; not recorded as a reference.
  std::string binder_name() {
    const Token& t = peek();
    if (t.kind != Token::Kind::Ident || is_keyword(t.text)) fail("expected a name");
    std::string n = t.text;
    next();
    return n;
  }

  std::string reference_name() {
    const Token& t = peek();
    if (t.kind != Token::Kind::Ident || is_keyword(t.text)) fail("expected a name");
    std::string n = t.text;
    if (std::find(bound_.begin(), bound_.end(), n) == bound_.end()) {
      refs_.push_back(NameRef{n, t.offset, n.size()});
    }
    next();
    return n;
  }

  bool is_symbol(std::string_view s) const {
    return peek().kind == Token::Kind::Symbol && peek().text == s;
  }

  void expect_symbol(std::string_view s) {
    if (!is_symbol(s)) fail("expected '" + std::string(s) + "'");
    next();
  }

  const Token& peek() const { return tokens_[pos_]; }
  void next() {
    if (pos_ + 1 < tokens_.size()) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const { fail(msg, peek().offset); }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    const Token& t = peek();
    std::string found = t.kind == Token::Kind::End ? "end of text" : "'" + t.text + "'";
    throw ParseError(msg + ", found " + found, at);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<std::string> bound_;
  std::vector<NameRef> refs_;
};

}  // namespace

ParsedCommand parse(std::string_view sentence) { return Parser(sentence).command(); }

ParsedCommand parse(const Span& span) {
  if (span.unparsable) {
    // Surface the precise lexical problem when there is one.
    parse(std::string_view(span.text));
    throw ParseError("missing '.' at the end of the sentence", span.text.size());
  }
  return parse(std::string_view(span.text));
}

Classification classify(const CommandAst& ast) {
  struct Visitor {
    Classification operator()(const DefinitionCmd&) const { return Classification::Global; }
    Classification operator()(const AxiomCmd&) const { return Classification::Global; }
    Classification operator()(const HintCmd&) const { return Classification::Global; }
    Classification operator()(const RequireCmd&) const { return Classification::Global; }
    Classification operator()(const TheoremCmd&) const { return Classification::Branch; }
    Classification operator()(const TacticCmd&) const { return Classification::Tactic; }
    Classification operator()(const QedCmd&) const { return Classification::Merge; }
    Classification operator()(const CheckCmd&) const { return Classification::Query; }
    Classification operator()(const PrintCmd&) const { return Classification::Query; }
  };
  return std::visit(Visitor{}, ast);
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::Global: return "global";
    case Classification::Branch: return "branch";
    case Classification::Tactic: return "tactic";
    case Classification::Merge: return "merge";
    case Classification::Query: return "query";
  }
  return "?";
}

std::string to_string(const CommandAst& cmd) {
  struct Visitor {
    std::string operator()(const DefinitionCmd& d) const {
      std::string s = "Definition " + d.name;
      for (const auto& p : d.params) s += " (" + p + " : Prop)";
      return s + " := " + kernel::to_string(d.body) + ".";
    }
    std::string operator()(const AxiomCmd& a) const {
      return "Axiom " + a.name + " : " + kernel::to_string(a.statement) + ".";
    }
    std::string operator()(const TheoremCmd& t) const {
      return "Theorem " + t.name + " : " + kernel::to_string(t.statement) + ".";
    }
    std::string operator()(const HintCmd& h) const {
      std::string s = h.kind == engine::HintKind::Resolve ? "Hint Resolve" : "Hint Unfold";
      for (const auto& n : h.names) s += " " + n;
      return s + ".";
    }
    std::string operator()(const TacticCmd& t) const { return engine::to_string(t.tactic) + "."; }
    std::string operator()(const QedCmd&) const { return "Qed."; }
    std::string operator()(const CheckCmd& c) const {
      return "Check " + kernel::to_string(c.formula) + ".";
    }
    std::string operator()(const PrintCmd& p) const { return "Print " + p.name + "."; }
    std::string operator()(const RequireCmd& r) const { return "Require " + r.module + "."; }
  };
  return std::visit(Visitor{}, cmd);
}

Formula resolve_formula(const kernel::Environment& env, const Formula& f,
                        const std::vector<std::string>& bound) {
  switch (f.kind()) {
    case Formula::Kind::Atom:
      if (std::find(bound.begin(), bound.end(), f.name()) == bound.end() &&
          env.find_definition(f.name())) {
        Formula app = Formula::def_app(f.name(), {});
        kernel::check_formula(env, app);
        return app;
      }
      return f;
    case Formula::Kind::True:
    case Formula::Kind::False:
      return f;
    case Formula::Kind::Impl:
      return Formula::impl(resolve_formula(env, f.lhs(), bound), resolve_formula(env, f.rhs(), bound));
    case Formula::Kind::And:
      return Formula::conj(resolve_formula(env, f.lhs(), bound), resolve_formula(env, f.rhs(), bound));
    case Formula::Kind::Or:
      return Formula::disj(resolve_formula(env, f.lhs(), bound), resolve_formula(env, f.rhs(), bound));
    case Formula::Kind::DefApp: {
      if (std::find(bound.begin(), bound.end(), f.name()) != bound.end()) {
        throw kernel::KernelError("parameter '" + f.name() + "' cannot be applied");
      }
      std::vector<Formula> args;
      for (const auto& a : f.args()) args.push_back(resolve_formula(env, a, bound));
      Formula app = Formula::def_app(f.name(), std::move(args));
      kernel::check_formula(env, app);
      return app;
    }
  }
  return f;
}

}  // namespace sprover::vernac
