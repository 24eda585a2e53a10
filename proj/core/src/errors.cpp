#include "ebtrend/errors.hpp"

namespace ebtrend {

QuadratureError::QuadratureError(const std::string& what, double achieved_error)
    : Error(what), achieved_error_(achieved_error) {}

namespace {

std::string with_location(const std::string& what, std::size_t line, std::size_t column) {
  if (line == 0) return what;
  std::string out = "line " + std::to_string(line);
  if (column != 0) out += ", column " + std::to_string(column);
  return out + ": " + what;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(with_location(what, line, column)), detail_(what), line_(line), column_(column) {}

}  // namespace ebtrend
