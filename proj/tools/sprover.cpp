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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sprover/compile/compile.h"
#include "sprover/protocol/protocol.h"

namespace compile = sprover::compile;

int main(int argc, char** argv) {
  CLI::App app{"sprover: asynchronous proof checker"};
  app.require_subcommand(1);

  auto* cc = app.add_subcommand("compile", "Compile a .v file to .vo (or .vio with --quick)");
  std::string file;
  bool quick = false;
  int workers = sprover::taskqueue::default_worker_count();
  std::vector<std::string> includes;
  cc->add_option("FILE", file, "Source file")->required();
  cc->add_flag("--quick", quick, "Skip proofs and write a .vio");
  cc->add_option("--workers", workers, "Worker processes")->check(CLI::NonNegativeNumber);
  cc->add_option("-I", includes, "Directory searched by Require");

  auto* v2v = app.add_subcommand("vio2vo", "Complete a .vio into a .vo");
  std::string vio;
  int v2v_workers = sprover::taskqueue::default_worker_count();
  v2v->add_option("FILE", vio, ".vio file")->required();
  v2v->add_option("--workers", v2v_workers, "Worker processes")->check(CLI::NonNegativeNumber);

  auto* bench = app.add_subcommand("bench", "Synthetic benchmark");
  bench->require_subcommand(1);
  compile::BenchParams params;
  auto add_params = [&](CLI::App* sub) {
    sub->add_option("--theorems", params.theorems, "Number of theorems")->check(CLI::NonNegativeNumber);
    sub->add_option("--depth", params.depth, "Auto search depth")->check(CLI::PositiveNumber);
    sub->add_option("--fraction", params.proof_fraction, "Proof share of checking time")
        ->check(CLI::Range(0.01, 1.0));
  };
  auto* gen = bench->add_subcommand("gen", "Print a benchmark document");
  add_params(gen);
  auto* run = bench->add_subcommand("run", "Time the full, quick and vio2vo chains");
  add_params(run);
  int bench_workers = 1;
  run->add_option("--workers", bench_workers, "Worker processes")->check(CLI::NonNegativeNumber);

  auto* serve = app.add_subcommand("serve", "Run the editing service on stdio or a TCP port");
  std::string listen;
  int serve_workers = sprover::taskqueue::default_worker_count();
  std::vector<std::string> serve_includes;
  serve->add_option("--listen", listen, "host:port to listen on instead of stdio");
  serve->add_option("--workers", serve_workers, "Worker processes")->check(CLI::NonNegativeNumber);
  serve->add_option("-I", serve_includes, "Directory searched by Require");

  CLI11_PARSE(app, argc, argv);

  if (*cc) {
    compile::CompileOptions opts;
    opts.workers = workers;
    opts.search_path = compile::search_path(includes);
    return compile::compile_file(file, quick, opts);
  }
  if (*serve) {
    sprover::protocol::ServerOptions opts;
    opts.workers = serve_workers;
    opts.search_path = compile::search_path(serve_includes);
    if (listen.empty()) return sprover::protocol::serve_fds(0, 1, opts);
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "--listen expects host:port\n";
      return compile::kExitIo;
    }
    return sprover::protocol::serve_tcp(listen.substr(0, colon), std::stoi(listen.substr(colon + 1)), opts);
  }
  if (*v2v) return compile::vio2vo_file(vio, v2v_workers);
  if (*gen) {
    std::cout << compile::bench_generate(params);
    return compile::kExitOk;
  }
  if (*run) {
    auto t = compile::bench_run(compile::bench_generate(params), bench_workers);
    sprover::codec::Json j{{"full_ms", t.full_ms},   {"quick_ms", t.quick_ms},
                           {"vio2vo_ms", t.vio2vo_ms}, {"theorems", params.theorems},
                           {"depth", params.depth},  {"fraction", params.proof_fraction},
                           {"workers", bench_workers}};
    std::cout << j.dump() << "\n";
    return compile::kExitOk;
  }
  return compile::kExitOk;
}
