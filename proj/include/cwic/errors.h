// Copyright 2026 The cwic Authors.
// SPDX-License-Identifier: Apache-2.0
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

#pragma once

#include <stdexcept>
#include <string>

namespace cwic {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto its exit-code table.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation needs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Reflection padding requested with pad >= spatial extent.
class PaddingError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed. The message names the op or stage.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid model/CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or corrupted bitstream.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Bitstream was produced by a different model than the one supplied.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

// Unreadable or unsupported image / dataset file.
class IngestError : public Error {
 public:
  using Error::Error;
};

// Checkpoint file is malformed or has an unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace cwic
