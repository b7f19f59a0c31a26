#pragma once

#include <stdexcept>
#include <string>

namespace bhcsvm {

/// Every failure raised by the library. The message starts with a short
/// stable tag ("shape", "degenerate labels", "depth infeasible", ...) so
/// callers and tests can match on it.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bhcsvm
