#include "topkcal/error.hpp"

namespace topkcal {

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

std::string at_line(const std::string& message, std::size_t line) {
  return message + " (line " + std::to_string(line) + ")";
}

}  // namespace topkcal
