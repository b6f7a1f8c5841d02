// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#pragma once

#include <stdexcept>
#include <string>

namespace matr {

// Error categories; the CLI maps them to exit codes 1/2/3.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

#define MATR_CHECK(cond, msg) \
    do { \
        if (!(cond)) throw std::logic_error(std::string("internal: ") + (msg)); \
    } while (0)

}  // namespace matr
