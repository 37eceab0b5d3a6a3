#pragma once

#include <stdexcept>
#include <string>

namespace transmusic {

// Error categories map 1:1 onto the CLI exit codes: 2 config, 3 I/O, 4 numeric.
class Error : public std::runtime_error {
public:
    enum class Kind { Config = 2, Io = 3, Numeric = 4 };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Bad shapes, bad arguments, bad configs, capability violations.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(Kind::Io, what) {}
};

// Non-finite values, failed convergence, numeric-domain violations.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(Kind::Numeric, what) {}
};

} // namespace transmusic
