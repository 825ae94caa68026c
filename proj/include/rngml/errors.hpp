#pragma once

#include <stdexcept>
#include <string>

namespace rngml {

// Violated precondition or invalid configuration value. The CLI maps this
// to exit code 2.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (stream header, config, report). Exit code 2 as well,
// kept separate so tests can assert the failure class.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem problems (missing input, unwritable output). Exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

} // namespace rngml
