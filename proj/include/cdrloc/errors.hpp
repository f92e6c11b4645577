// Copyright 2026 The cdrloc Authors
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

#ifndef CDRLOC_ERRORS_HPP_
#define CDRLOC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cdrloc {

/// Base class for all cdrloc failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// -- geometry ---------------------------------------------------------------

class OutOfProjectionRange : public Error {
 public:
  using Error::Error;
};

class DegeneratePolygon : public Error {
 public:
  using Error::Error;
};

// -- parsing ----------------------------------------------------------------

class MalformedRow : public Error {
 public:
  MalformedRow(int line_no, const std::string& reason)
      : Error("line " + std::to_string(line_no) + ": " + reason),
        line_no_(line_no) {}
  int line_no() const { return line_no_; }

 private:
  int line_no_;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class DuplicateCellId : public Error {
 public:
  using Error::Error;
};

class MissingProperty : public Error {
 public:
  using Error::Error;
};

class InvalidPolygon : public Error {
 public:
  using Error::Error;
};

class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

// -- coverage optimization --------------------------------------------------

class UnknownCell : public Error {
 public:
  using Error::Error;
};

class NonFiniteEncountered : public Error {
 public:
  using Error::Error;
};

// -- filtering --------------------------------------------------------------

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class SingularInnovation : public Error {
 public:
  using Error::Error;
};

// -- evaluation -------------------------------------------------------------

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class MissingVariant : public Error {
 public:
  using Error::Error;
};

// -- configuration ----------------------------------------------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdrloc

#endif  // CDRLOC_ERRORS_HPP_
