#pragma once

#include <stdexcept>
#include <string>

namespace dpl {

// Raised when a request exceeds a hard resource guard (array size, pair
// count, enumeration budget).  The CLI maps this to exit status 3.
class BudgetExceeded : public std::runtime_error {
public:
    explicit BudgetExceeded(const std::string& guard, const std::string& detail)
        : std::runtime_error("budget guard '" + guard + "' tripped: " + detail),
          guard_(guard) {}

    const std::string& guard() const noexcept { return guard_; }

private:
    std::string guard_;
};

// Invalid experiment configuration; maps to exit status 2.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace dpl
