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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.h"
#include "gen.h"
#include "oracle.h"
#include "sprover/compile/compile.h"

namespace sprover::compile {
namespace {

namespace fs = std::filesystem;
using kernel::Formula;
using kernel::Term;

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("sprover-compile-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    std::string p = (path / name).string();
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }
};

const char* const kFailing =
    "Theorem ok : True.\nProof.\n  exact I.\nQed.\n"
    "Theorem bad : False.\nProof.\n  fail.\nQed.\n";

const char* const kLib =
    "Definition both (A B : Prop) := A /\\ B.\n"
    "Axiom p : P.\n"
    "Theorem pp : both P P.\nProof.\n  unfold both.\n  split.\n  exact p.\n  exact p.\nQed.\n";

const char* const kClient =
    "Require Lib.\n"
    "Theorem use : both P P.\nProof.\n  exact pp.\nQed.\n";

std::string env_text(const Json& env) { return codec::canonical(env); }

TEST_CASE("compile_full: the decidable document") {
  FullResult r = compile_full(testing::kDecidableDoc, "Dec", {});
  CHECK(r.exit_code == kExitOk);
  CHECK(r.vo.swf);
  CHECK(r.vo.module == "Dec");
  REQUIRE(r.vo.environment.size() == 2);
  CHECK(codec::decode_term(r.vo.environment[1].at("proof")) ==
        Term::inr(Term::lam("h", Formula::falsity(), Term::var("h")), Formula::falsity()));
  CHECK(r.vo.source_digest == codec::sha256_hex(testing::kDecidableDoc));
}

TEST_CASE("compile_full: empty document") {
  FullResult r = compile_full("", "Empty", {});
  CHECK(r.exit_code == kExitOk);
  CHECK(r.vo.swf);
  CHECK(r.vo.environment.empty());
}

TEST_CASE("compile_full: a failing proof exits 2 without the certificate") {
  for (int workers : {0, 1}) {
    FullResult r = compile_full(kFailing, "F", {workers, {}});
    CHECK(r.exit_code == kExitProof);
    CHECK_FALSE(r.vo.swf);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].name == "bad");
  }
}

TEST_CASE("compile_full: document errors exit 1") {
  try {
    compile_full("Definition d := True.\nFrobnicate.\n", "E", {});
    FAIL("expected an error");
  } catch (const CompileError& e) {
    CHECK(e.exit_code() == kExitDocument);
  }
  CHECK_THROWS_AS(compile_full("Axiom a : nosuch P.\n", "E", {}), CompileError);
  CHECK_THROWS_AS(compile_full("Theorem t : True.\nProof.\n", "E", {}), CompileError);
}

TEST_CASE("compile_full: deterministic across runs and worker counts") {
  auto doc = testing::generate_document(42);
  std::string text = doc.text();
  FullResult a = compile_full(text, "G", {0, {}});
  FullResult b = compile_full(text, "G", {0, {}});
  FullResult c = compile_full(text, "G", {2, {}});
  CHECK(vo_bytes(a.vo) == vo_bytes(b.vo));
  CHECK(vo_bytes(a.vo) == vo_bytes(c.vo));
  CHECK(env_text(a.vo.environment) ==
        env_text(codec::encode(testing::run_sequential(text), codec::ProofMode::WithProofs)));
}

TEST_CASE("quick chain: vio2vo completes the same .vo") {
  for (const char* doc : {testing::kDecidableDoc, testing::kHintDoc, kFailing}) {
    FullResult full = compile_full(doc, "M", {});
    VioFile vio = compile_quick(doc, "M", {});
    CHECK(vio.requests.size() == (std::string(doc) == kFailing ? 2u : 1u));
    for (const auto& e : vio.environment) CHECK_FALSE(e.contains("proof"));
    VioFile back = vio_of_bytes(vio_bytes(vio));
    for (int workers : {0, 1}) {
      FullResult done = vio2vo(back, workers);
      CHECK(done.vo == full.vo);
      CHECK(done.exit_code == full.exit_code);
    }
  }
}

TEST_CASE("files: magic, version and corruption") {
  VioFile vio = compile_quick(testing::kDecidableDoc, "M", {});
  std::string raw = codec::gunzip(vio_bytes(vio));
  CHECK(raw.substr(0, 4) == "SVIO");
  CHECK(raw[4] == static_cast<char>(kFormatVersion));
  std::string vo = codec::gunzip(vo_bytes(compile_full(testing::kDecidableDoc, "M", {}).vo));
  CHECK(vo.substr(0, 3) == "SVO");
  try {
    vio_of_bytes("garbage");
    FAIL("expected an error");
  } catch (const CompileError& e) {
    CHECK(e.exit_code() == kExitIo);
  }
  CHECK_THROWS_AS(vo_of_bytes(vio_bytes(vio)), CompileError);
  std::string wrong = raw;
  wrong[4] = 9;
  CHECK_THROWS_AS(vio_of_bytes(codec::gzip(wrong)), CompileError);
  CHECK_THROWS_AS(vio2vo(vio, 0, "0000"), CompileError);
}

TEST_CASE("require: loads a .vo and keeps dependency proofs opaque") {
  TempDir dir;
  FullResult lib = compile_full(kLib, "Lib", {});
  REQUIRE(lib.exit_code == kExitOk);
  write_file((dir.path / "Lib.vo").string(), vo_bytes(lib.vo));

  CompileOptions opts{0, {dir.path.string()}};
  FullResult client = compile_full(kClient, "Client", opts);
  CHECK(client.exit_code == kExitOk);
  REQUIRE(client.vo.environment.size() == 4);
  CHECK(client.vo.environment[2].at("origin") == "Lib");
  CHECK_FALSE(client.vo.environment[2].contains("proof"));
  CHECK(client.vo.environment[3].contains("proof"));

  kernel::Environment env = require_load({}, "Lib", opts.search_path);
  kernel::ProofPromise::reset_term_accesses();
  CHECK(kernel::well_typed(env, {}, Term::var("pp"), Formula::def_app("both", {Formula::atom("P"), Formula::atom("P")})));
  CHECK(kernel::ProofPromise::term_accesses() == 0);

  // Idempotent, and clashes with local names are errors.
  CHECK(require_load(env, "Lib", opts.search_path).size() == env.size());
  CHECK(compile_full("Require Lib.\nRequire Lib.\n", "Twice", opts).exit_code == kExitOk);
  CHECK_THROWS_AS(compile_full("Axiom p : Q.\nRequire Lib.\n", "Clash", opts), CompileError);
  CHECK_THROWS_AS(compile_full("Require Nowhere.\n", "Missing", opts), CompileError);
  CHECK_THROWS_AS(compile_full("Theorem t : True.\nProof.\n  Require Lib.\nQed.\n", "InProof", opts), CompileError);
}

TEST_CASE("require: a .vio dependency is forced on demand") {
  TempDir dir;
  VioFile lib = compile_quick(kLib, "Lib", {});
  write_file((dir.path / "Lib.vio").string(), vio_bytes(lib));
  CompileOptions opts{0, {dir.path.string()}};
  kernel::Environment env = require_load({}, "Lib", opts.search_path);
  const auto* pp = env.find("pp");
  REQUIRE(pp);
  CHECK(pp->origin() == "Lib");
  auto promise = pp->as_opaque()->promise->get();
  CHECK(promise.status() == kernel::ProofPromise::Status::Delegated);
  CHECK(kernel::check_swf(env).empty());
  FullResult client = compile_full(kClient, "Client", opts);
  CHECK(client.exit_code == kExitOk);
}

TEST_CASE("transitive requires keep the original origin") {
  TempDir dir;
  CompileOptions opts{0, {dir.path.string()}};
  write_file((dir.path / "Lib.vo").string(), vo_bytes(compile_full(kLib, "Lib", opts).vo));
  write_file((dir.path / "Client.vo").string(), vo_bytes(compile_full(kClient, "Client", opts).vo));
  FullResult top = compile_full("Require Client.\nRequire Lib.\nCheck both P P.\n", "Top", opts);
  CHECK(top.exit_code == kExitOk);
  REQUIRE(top.vo.environment.size() == 4);
  CHECK(top.vo.environment[0].at("origin") == "Lib");
  CHECK(top.vo.environment[3].at("origin") == "Client");
}

TEST_CASE("file drivers: exit codes and outputs") {
  TempDir dir;
  std::string ok = dir.file("Ok.v", testing::kDecidableDoc);
  CHECK(compile_file(ok, false, {}) == kExitOk);
  CHECK(fs::exists(dir.path / "Ok.vo"));
  VoFile full = vo_of_bytes(read_file((dir.path / "Ok.vo").string()));

  CHECK(compile_file(ok, true, {}) == kExitOk);
  REQUIRE(fs::exists(dir.path / "Ok.vio"));
  fs::remove(dir.path / "Ok.vo");
  CHECK(vio2vo_file((dir.path / "Ok.vio").string(), 0) == kExitOk);
  CHECK(vo_of_bytes(read_file((dir.path / "Ok.vo").string())) == full);

  // A source edited after the quick compilation makes the .vio stale.
  dir.file("Ok.v", std::string(testing::kDecidableDoc) + "Check True.\n");
  CHECK(vio2vo_file((dir.path / "Ok.vio").string(), 0) == kExitDocument);

  CHECK(compile_file(dir.file("Bad.v", kFailing), false, {}) == kExitProof);
  CHECK(compile_file(dir.file("Broken.v", "Frobnicate.\n"), false, {}) == kExitDocument);
  CHECK(compile_file((dir.path / "Missing.v").string(), false, {}) == kExitIo);
  CHECK(module_name("/a/b/Foo.v") == "Foo");
  CHECK(module_name("Foo.vio") == "Foo");
}

TEST_CASE("search_path: include directories then SPROVER_PATH") {
  ::setenv("SPROVER_PATH", "/x:/y", 1);
  CHECK(search_path({"/i"}) == std::vector<std::string>{"/i", "/x", "/y"});
  ::unsetenv("SPROVER_PATH");
  CHECK(search_path({"/i"}) == std::vector<std::string>{"/i"});
}

TEST_CASE("bench_generate: deterministic, error free, sized by the fraction") {
  BenchParams small{3, 10, 0.5};
  std::string a = bench_generate(small);
  CHECK(a == bench_generate(small));
  kernel::Environment env = testing::run_sequential(a);
  std::size_t theorems = 0, fillers = 0;
  for (const auto& e : env.entries()) {
    theorems += e.as_opaque() != nullptr;
    fillers += e.as_definition() != nullptr;
  }
  CHECK(theorems == 3);
  CHECK(fillers > 0);
  BenchParams heavier{3, 10, 0.9};
  CHECK(bench_generate(heavier).size() < a.size());
}

}  // namespace
}  // namespace sprover::compile
