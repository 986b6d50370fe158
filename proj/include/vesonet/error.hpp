#pragma once

#include <stdexcept>
#include <string>

namespace vesonet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidPathError : Error {
  using Error::Error;
};

struct NoPathError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// World state that can only arise from a bug (vehicle off its segment, ...).
struct IntegrityError : Error {
  using Error::Error;
};

struct UndefinedSimilarityError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(what), line(line), column(column) {}
  std::size_t line;
  std::size_t column;
};

}  // namespace vesonet
