//
// Copyright 2026 The HPTR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef HPTR_TESTS_TEST_UTIL_H_
#define HPTR_TESTS_TEST_UTIL_H_

#include <cmath>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace hptr {

inline const absl::Status& ToStatus(const absl::Status& status) {
  return status;
}

template <typename T>
const absl::Status& ToStatus(const absl::StatusOr<T>& value) {
  return value.status();
}

// Error kind is the message prefix before the first ':'.
template <typename S>
std::string ErrorKind(const S& value) {
  const std::string message(ToStatus(value).message());
  return message.substr(0, message.find(':'));
}

// Three binomial standard errors around p for the given number of draws.
inline double ThreeSe(double p, double draws) {
  return 3.0 * std::sqrt(p * (1.0 - p) / draws);
}

}  // namespace hptr

#define ASSERT_OK(expr) ASSERT_TRUE((expr).ok()) << ::hptr::ToStatus(expr)
#define EXPECT_OK(expr) EXPECT_TRUE((expr).ok()) << ::hptr::ToStatus(expr)

#endif  // HPTR_TESTS_TEST_UTIL_H_
