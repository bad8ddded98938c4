#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pico {

// Base for every error the toolchain reports to a user. Anything else that
// escapes is an internal error (exit code 2 in the CLI).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : Error("line " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int column() const { return col_; }

 private:
  int line_;
  int col_;
};

class ElaborationError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class SchedulingConflict : public Error {
 public:
  struct Blocker {
    int offset;
    std::vector<std::string> signals;
  };
  SchedulingConflict(std::string signal, std::vector<Blocker> blockers);
  const std::string& signal() const { return signal_; }
  const std::vector<Blocker>& blockers() const { return blockers_; }

 private:
  std::string signal_;
  std::vector<Blocker> blockers_;
};

class NoReserveError : public Error {
 public:
  using Error::Error;
};

class TapRouteError : public Error {
 public:
  using Error::Error;
};

class FileFormatError : public Error {
 public:
  FileFormatError(const std::string& path, int line, const std::string& msg)
      : Error(path + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class MissingFile : public Error {
 public:
  using Error::Error;
};

class UnknownScope : public Error {
 public:
  using Error::Error;
};

class UnknownSignal : public Error {
 public:
  using Error::Error;
};

class UnknownInstance : public Error {
 public:
  using Error::Error;
};

class TypeMismatch : public Error {
 public:
  using Error::Error;
};

class BadSpec : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Shell and protocol errors.
class EngineHalted : public Error {
 public:
  using Error::Error;
};

class NotLoaded : public Error {
 public:
  using Error::Error;
};

class UnknownVerb : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace pico
