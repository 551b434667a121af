// Copyright 2026 The fairpate Authors.
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

#ifndef FAIRPATE_STATUS_MACROS_H_
#define FAIRPATE_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define FAIRPATE_RETURN_IF_ERROR(expr)         \
  do {                                         \
    const ::absl::Status _status = (expr);     \
    if (!_status.ok()) return _status;         \
  } while (0)

#define FAIRPATE_STATUS_CONCAT_INNER(a, b) a##b
#define FAIRPATE_STATUS_CONCAT(a, b) FAIRPATE_STATUS_CONCAT_INNER(a, b)

#define FAIRPATE_ASSIGN_OR_RETURN_IMPL(tmp, lhs, expr) \
  auto tmp = (expr);                                   \
  if (!tmp.ok()) return tmp.status();                  \
  lhs = std::move(tmp).value()

// Evaluates `expr` (an absl::StatusOr<T>), returning its status on error and
// otherwise moving the value into `lhs`.
#define FAIRPATE_ASSIGN_OR_RETURN(lhs, expr)                                \
  FAIRPATE_ASSIGN_OR_RETURN_IMPL(                                           \
      FAIRPATE_STATUS_CONCAT(_status_or_value, __LINE__), lhs, expr)

#endif  // FAIRPATE_STATUS_MACROS_H_
