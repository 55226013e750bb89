/*
 * Copyright 2026 The mcdrop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace mcdrop {

// Exit-code classes used by the command line tool.
enum class ErrorClass { Usage = 1, Data = 2 };

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ErrorClass cls)
      : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

#define MCDROP_DEFINE_ERROR(Name, Cls)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(what, ErrorClass::Cls) {} \
  };

// Tensor or layer shapes that do not line up.
MCDROP_DEFINE_ERROR(DimensionError, Data)
// A dropout layer in the cached feature part.
MCDROP_DEFINE_ERROR(SplitViolation, Data)
// Invalid configuration value or unsupported combination.
MCDROP_DEFINE_ERROR(ConfigError, Usage)
// Invalid function argument (T = 0, q outside (0,1), ...).
MCDROP_DEFINE_ERROR(ArgumentError, Usage)
// Numerical tripwire, e.g. strongly negative variance.
MCDROP_DEFINE_ERROR(NumericalError, Data)
// Label values outside {0,1}.
MCDROP_DEFINE_ERROR(LabelError, Data)
// A metric that is undefined for the given input (AP without positives).
MCDROP_DEFINE_ERROR(UndefinedMetricError, Data)
// Training produced a non-finite loss.
MCDROP_DEFINE_ERROR(DivergenceError, Data)
// Synthetic data cannot be generated as requested.
MCDROP_DEFINE_ERROR(GenerationError, Data)
// Unreadable or malformed files.
MCDROP_DEFINE_ERROR(IoError, Data)
// Reports that were not produced on the same test set.
MCDROP_DEFINE_ERROR(ComparabilityError, Data)
// Two code paths that must agree did not.
MCDROP_DEFINE_ERROR(CorrectnessError, Data)

#undef MCDROP_DEFINE_ERROR

}  // namespace mcdrop
