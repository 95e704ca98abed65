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

#pragma once

#include <atomic>
#include <memory>

namespace sprover {

// A set-once flag shared by every copy. Once set it stays set.
class CancelSwitch {
 public:
  CancelSwitch() : flag_(std::make_shared<std::atomic<bool>>(false)) {}

  void set() const { flag_->store(true, std::memory_order_release); }
  bool is_set() const { return flag_->load(std::memory_order_acquire); }

  bool same_switch(const CancelSwitch& other) const { return flag_ == other.flag_; }

 private:
  std::shared_ptr<std::atomic<bool>> flag_;
};

}  // namespace sprover
