#include "hkc/errors.hpp"

namespace hkc {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "model validation failed";
  for (const auto& s : issues) {
    out += "\n  - ";
    out += s;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::invalid_argument(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace hkc
