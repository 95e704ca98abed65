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

// Reference documents shared by unit and acceptance tests.

#pragma once

namespace sprover::testing {

// The decidable-False document: the proof unfolds by hand.
inline constexpr const char* kDecidableDoc =
    "Definition decidable (P : Prop) := P \\/ ~ P.\n"
    "\n"
    "Theorem dec_False : decidable False.\n"
    "Proof.\n"
    "  unfold decidable, not.\n"
    "  auto.\n"
    "Qed.\n";

// The same proof with the unfolding moved into a hint declared mid-proof.
inline constexpr const char* kHintDoc =
    "Definition decidable (P : Prop) := P \\/ ~ P.\n"
    "\n"
    "Theorem dec_False : decidable False.\n"
    "Proof.\n"
    "  Hint Unfold decidable, not.\n"
    "  auto.\n"
    "Qed.\n";

}  // namespace sprover::testing
