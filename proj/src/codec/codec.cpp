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

#include "sprover/codec/codec.h"

#include <openssl/sha.h>
#include <zlib.h>

#include <array>
#include <cstdio>

namespace sprover::codec {

using kernel::Formula;
using kernel::Term;

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw DecodeError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::string str(const Json& j) {
  if (!j.is_string()) throw DecodeError("expected a string");
  return j.get<std::string>();
}

const Json& at(const Json& j, std::size_t i) {
  if (!j.is_array() || j.size() <= i) throw DecodeError("malformed array");
  return j[i];
}

std::vector<std::string> strings(const Json& j) {
  if (!j.is_array()) throw DecodeError("expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(str(e));
  return out;
}

}  // namespace

// Formulas and terms are tagged arrays: ["impl", lhs, rhs].
Json encode(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::Atom: return Json::array({"atom", f.name()});
    case Formula::Kind::True: return Json::array({"true"});
    case Formula::Kind::False: return Json::array({"false"});
    case Formula::Kind::Impl: return Json::array({"impl", encode(f.lhs()), encode(f.rhs())});
    case Formula::Kind::And: return Json::array({"and", encode(f.lhs()), encode(f.rhs())});
    case Formula::Kind::Or: return Json::array({"or", encode(f.lhs()), encode(f.rhs())});
    case Formula::Kind::DefApp: {
      Json args = Json::array();
      for (const auto& a : f.args()) args.push_back(encode(a));
      return Json::array({"app", f.name(), std::move(args)});
    }
  }
  throw DecodeError("unreachable formula kind");
}

Formula decode_formula(const Json& j) {
  const std::string tag = str(at(j, 0));
  if (tag == "atom") return Formula::atom(str(at(j, 1)));
  if (tag == "true") return Formula::truth();
  if (tag == "false") return Formula::falsity();
  if (tag == "impl") return Formula::impl(decode_formula(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "and") return Formula::conj(decode_formula(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "or") return Formula::disj(decode_formula(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "app") {
    std::vector<Formula> args;
    const Json& a = at(j, 2);
    if (!a.is_array()) throw DecodeError("malformed application");
    for (const auto& e : a) args.push_back(decode_formula(e));
    return Formula::def_app(str(at(j, 1)), std::move(args));
  }
  throw DecodeError("unknown formula tag '" + tag + "'");
}

Json encode(const Term& t) {
  using K = Term::Kind;
  switch (t.kind()) {
    case K::Var: return Json::array({"var", t.name()});
    case K::Lam:
      return Json::array({"lam", t.name(), encode(t.annotation()), encode(t.child(0))});
    case K::App: return Json::array({"app", encode(t.child(0)), encode(t.child(1))});
    case K::Pair: return Json::array({"pair", encode(t.child(0)), encode(t.child(1))});
    case K::Fst: return Json::array({"fst", encode(t.child(0))});
    case K::Snd: return Json::array({"snd", encode(t.child(0))});
    case K::Inl: return Json::array({"inl", encode(t.child(0)), encode(t.annotation())});
    case K::Inr: return Json::array({"inr", encode(t.child(0)), encode(t.annotation())});
    case K::Case:
      return Json::array({"case", encode(t.child(0)), t.name(), encode(t.child(1)), t.name2(),
                          encode(t.child(2))});
    case K::TT: return Json::array({"tt"});
    case K::Exfalso: return Json::array({"exfalso", encode(t.child(0)), encode(t.annotation())});
    case K::Hole: return Json::array({"hole", t.hole_id()});
  }
  throw DecodeError("unreachable term kind");
}

Term decode_term(const Json& j) {
  const std::string tag = str(at(j, 0));
  if (tag == "var") return Term::var(str(at(j, 1)));
  if (tag == "lam") {
    return Term::lam(str(at(j, 1)), decode_formula(at(j, 2)), decode_term(at(j, 3)));
  }
  if (tag == "app") return Term::app(decode_term(at(j, 1)), decode_term(at(j, 2)));
  if (tag == "pair") return Term::pair(decode_term(at(j, 1)), decode_term(at(j, 2)));
  if (tag == "fst") return Term::fst(decode_term(at(j, 1)));
  if (tag == "snd") return Term::snd(decode_term(at(j, 1)));
  if (tag == "inl") return Term::inl(decode_term(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "inr") return Term::inr(decode_term(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "case") {
    return Term::case_of(decode_term(at(j, 1)), str(at(j, 2)), decode_term(at(j, 3)),
                         str(at(j, 4)), decode_term(at(j, 5)));
  }
  if (tag == "tt") return Term::tt();
  if (tag == "exfalso") return Term::exfalso(decode_term(at(j, 1)), decode_formula(at(j, 2)));
  if (tag == "hole") {
    const Json& id = at(j, 1);
    if (!id.is_number_unsigned()) throw DecodeError("malformed hole");
    return Term::hole(id.get<std::uint32_t>());
  }
  throw DecodeError("unknown term tag '" + tag + "'");
}

Json encode(const kernel::PromiseFailure& f) {
  Json j{{"message", f.message}, {"cancelled", f.cancelled}, {"infrastructure", f.infrastructure}};
  j["span_id"] = f.span_id ? Json(*f.span_id) : Json(nullptr);
  return j;
}

kernel::PromiseFailure decode_failure(const Json& j) {
  kernel::PromiseFailure f;
  f.message = str(field(j, "message"));
  f.cancelled = field(j, "cancelled").get<bool>();
  f.infrastructure = field(j, "infrastructure").get<bool>();
  const Json& s = field(j, "span_id");
  if (!s.is_null()) f.span_id = s.get<std::int64_t>();
  return f;
}

Json encode(const engine::Goal& g) {
  Json hyps = Json::array();
  for (const auto& [n, f] : g.hypotheses) hyps.push_back(Json::array({n, encode(f)}));
  return Json{{"hypotheses", std::move(hyps)}, {"conclusion", encode(g.conclusion)}, {"hole", g.hole}};
}

engine::Goal decode_goal(const Json& j) {
  engine::Goal g;
  for (const auto& h : field(j, "hypotheses")) {
    g.hypotheses.emplace_back(str(at(h, 0)), decode_formula(at(h, 1)));
  }
  g.conclusion = decode_formula(field(j, "conclusion"));
  g.hole = field(j, "hole").get<std::uint32_t>();
  return g;
}

Json encode(const engine::HintDb& h) {
  return Json{{"resolve", h.resolve}, {"unfold", h.unfold}};
}

engine::HintDb decode_hints(const Json& j) {
  return engine::HintDb{strings(field(j, "resolve")), strings(field(j, "unfold"))};
}

namespace {

constexpr std::array<const char*, 14> kTacticNames = {
    "intro", "intros", "apply", "exact", "split", "left", "right", "assumption", "unfold",
    "auto",  "idtac",  "fail",  "proof", "par"};

}  // namespace

Json encode(const engine::TacticAst& t) {
  Json j{{"kind", kTacticNames.at(static_cast<std::size_t>(t.kind))}};
  if (t.name) j["name"] = *t.name;
  if (!t.names.empty()) j["names"] = t.names;
  if (t.depth) j["depth"] = *t.depth;
  if (t.inner) j["inner"] = encode(*t.inner);
  return j;
}

engine::TacticAst decode_tactic(const Json& j) {
  const std::string kind = str(field(j, "kind"));
  engine::TacticAst t;
  bool found = false;
  for (std::size_t i = 0; i < kTacticNames.size(); ++i) {
    if (kind == kTacticNames[i]) {
      t.kind = static_cast<engine::TacticAst::Kind>(i);
      found = true;
    }
  }
  if (!found) throw DecodeError("unknown tactic '" + kind + "'");
  if (j.contains("name")) t.name = str(j.at("name"));
  if (j.contains("names")) t.names = strings(j.at("names"));
  if (j.contains("depth")) t.depth = j.at("depth").get<int>();
  if (j.contains("inner")) t.inner = std::make_shared<const engine::TacticAst>(decode_tactic(j.at("inner")));
  return t;
}

Json encode(const engine::ProofState& ps) {
  Json goals = Json::array();
  for (const auto& g : ps.goals) goals.push_back(encode(g));
  return Json{{"statement", encode(ps.statement)}, {"goals", std::move(goals)},
              {"partial", encode(ps.partial)},     {"hints", encode(ps.hints)},
              {"next_hole", ps.next_hole}};
}

engine::ProofState decode_proof_state(const Json& j) {
  engine::ProofState ps;
  ps.statement = decode_formula(field(j, "statement"));
  for (const auto& g : field(j, "goals")) ps.goals.push_back(decode_goal(g));
  ps.partial = decode_term(field(j, "partial"));
  ps.hints = decode_hints(field(j, "hints"));
  ps.next_hole = field(j, "next_hole").get<std::uint32_t>();
  return ps;
}

Json encode(const vernac::CommandAst& c) {
  struct Visitor {
    Json operator()(const vernac::DefinitionCmd& d) const {
      return Json{{"cmd", "definition"}, {"name", d.name}, {"params", d.params}, {"body", encode(d.body)}};
    }
    Json operator()(const vernac::AxiomCmd& a) const {
      return Json{{"cmd", "axiom"}, {"name", a.name}, {"statement", encode(a.statement)}};
    }
    Json operator()(const vernac::TheoremCmd& t) const {
      return Json{{"cmd", "theorem"}, {"name", t.name}, {"statement", encode(t.statement)}};
    }
    Json operator()(const vernac::HintCmd& h) const {
      return Json{{"cmd", "hint"},
                  {"kind", h.kind == engine::HintKind::Resolve ? "resolve" : "unfold"},
                  {"names", h.names}};
    }
    Json operator()(const vernac::TacticCmd& t) const {
      return Json{{"cmd", "tactic"}, {"tactic", encode(t.tactic)}};
    }
    Json operator()(const vernac::QedCmd&) const { return Json{{"cmd", "qed"}}; }
    Json operator()(const vernac::CheckCmd& c) const {
      return Json{{"cmd", "check"}, {"formula", encode(c.formula)}};
    }
    Json operator()(const vernac::PrintCmd& p) const { return Json{{"cmd", "print"}, {"name", p.name}}; }
    Json operator()(const vernac::RequireCmd& r) const {
      return Json{{"cmd", "require"}, {"module", r.module}};
    }
  };
  return std::visit(Visitor{}, c);
}

vernac::CommandAst decode_command(const Json& j) {
  const std::string cmd = str(field(j, "cmd"));
  if (cmd == "definition") {
    return vernac::DefinitionCmd{str(field(j, "name")), strings(field(j, "params")),
                                 decode_formula(field(j, "body"))};
  }
  if (cmd == "axiom") return vernac::AxiomCmd{str(field(j, "name")), decode_formula(field(j, "statement"))};
  if (cmd == "theorem") {
    return vernac::TheoremCmd{str(field(j, "name")), decode_formula(field(j, "statement"))};
  }
  if (cmd == "hint") {
    const std::string kind = str(field(j, "kind"));
    if (kind != "resolve" && kind != "unfold") throw DecodeError("unknown hint kind");
    return vernac::HintCmd{kind == "resolve" ? engine::HintKind::Resolve : engine::HintKind::Unfold,
                           strings(field(j, "names"))};
  }
  if (cmd == "tactic") return vernac::TacticCmd{decode_tactic(field(j, "tactic"))};
  if (cmd == "qed") return vernac::QedCmd{};
  if (cmd == "check") return vernac::CheckCmd{decode_formula(field(j, "formula"))};
  if (cmd == "print") return vernac::PrintCmd{str(field(j, "name"))};
  if (cmd == "require") return vernac::RequireCmd{str(field(j, "module"))};
  throw DecodeError("unknown command '" + cmd + "'");
}

Json encode(const kernel::Environment& env, ProofMode mode) {
  Json entries = Json::array();
  for (const auto& e : env.entries()) {
    Json j;
    if (const auto* d = e.as_definition()) {
      j = Json{{"kind", "definition"}, {"name", d->name}, {"params", d->params}, {"body", encode(d->body)}};
    } else if (const auto* a = e.as_axiom()) {
      j = Json{{"kind", "axiom"}, {"name", a->name}, {"statement", encode(a->statement)}};
    } else {
      const auto* o = e.as_opaque();
      j = Json{{"kind", "opaque"}, {"name", o->name}, {"statement", encode(o->statement)}};
      if (mode == ProofMode::WithProofs && e.origin().empty()) {
        kernel::ProofPromise p = o->promise->get();
        switch (p.status()) {
          case kernel::ProofPromise::Status::Finished: j["proof"] = encode(*p.term()); break;
          case kernel::ProofPromise::Status::Failed: j["failure"] = encode(*p.failure()); break;
          case kernel::ProofPromise::Status::Delegated: break;
        }
      }
    }
    j["origin"] = e.origin();
    entries.push_back(std::move(j));
  }
  return entries;
}

kernel::Environment decode_environment(const Json& j) {
  if (!j.is_array()) throw DecodeError("environment must be an array");
  kernel::Environment env;
  for (const auto& e : j) {
    const std::string kind = str(field(e, "kind"));
    const std::string name = str(field(e, "name"));
    const std::string origin = str(field(e, "origin"));
    if (kind == "definition") {
      env = env.appended_unchecked(kernel::EnvEntry(
          kernel::Definition{name, strings(field(e, "params")), decode_formula(field(e, "body"))},
          origin));
    } else if (kind == "axiom") {
      env = env.appended_unchecked(
          kernel::EnvEntry(kernel::Axiom{name, decode_formula(field(e, "statement"))}, origin));
    } else if (kind == "opaque") {
      Formula st = decode_formula(field(e, "statement"));
      kernel::ProofPromise p =
          e.contains("proof")     ? kernel::ProofPromise::finished(st, 0, decode_term(e.at("proof")))
          : e.contains("failure") ? kernel::ProofPromise::failed(st, 0, decode_failure(e.at("failure")))
                                  : kernel::ProofPromise::delegated(st, 0, 0, nullptr);
      env = env.appended_unchecked(kernel::EnvEntry(
          kernel::Opaque{name, st, std::make_shared<kernel::PromiseSlot>(std::move(p))}, origin));
    } else {
      throw DecodeError("unknown entry kind '" + kind + "'");
    }
  }
  return env;
}

std::string canonical(const Json& j) { return j.dump(); }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md.data());
  std::string out;
  out.reserve(md.size() * 2);
  char buf[3];
  for (unsigned char c : md) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    out += buf;
  }
  return out;
}

std::string digest(const Json& j) { return sha256_hex(canonical(j)); }

std::string gzip(std::string_view bytes) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; zlib writes mtime 0.
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  std::string out(deflateBound(&zs, bytes.size()), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::string gunzip(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw std::runtime_error("inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 15];
  int rc;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DecodeError("corrupt gzip data");
    }
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

}  // namespace sprover::codec
