#pragma once

#include <stdexcept>
#include <string>

namespace pmgeo {

// Error categories, mapped to CLI exit codes (usage=1, data=2, solver=3).
enum class ErrorKind { usage, data, solver };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    const char* kind_name() const noexcept {
        switch (kind_) {
            case ErrorKind::usage: return "usage";
            case ErrorKind::data: return "data";
            case ErrorKind::solver: return "solver";
        }
        return "unknown";
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void throw_solver(const std::string& msg) { throw Error(ErrorKind::solver, msg); }

}  // namespace pmgeo
