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

// Worker process. The single argument names the channel: "fd:N".

#include <cstdio>
#include <cstdlib>
#include <string>

#include "sprover/taskqueue/taskqueue.h"

int main(int argc, char** argv) {
  if (argc != 2 || std::string(argv[1]).rfind("fd:", 0) != 0) {
    std::fprintf(stderr, "usage: sprover-worker fd:N\n");
    return 2;
  }
  int fd = std::atoi(argv[1] + 3);
  return sprover::taskqueue::worker_main(fd);
}
