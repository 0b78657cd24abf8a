#pragma once

#include <stdexcept>
#include <string>

namespace pulseforge {

// All toolkit errors carry a stable machine-readable code alongside the
// human-readable message. The CLI maps codes onto exit classes.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace pulseforge
