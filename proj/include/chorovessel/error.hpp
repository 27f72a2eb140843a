#pragma once

#include <stdexcept>
#include <string>

namespace chorovessel {

enum class ErrorKind {
    Input,      // malformed files, bad arguments, contract violations by the caller
    NotFound,   // unknown image/round ids, missing files
    Conflict,   // stale revisions, already-assigned images, out-of-order rounds
    Backend,    // external segmenter unreachable or misbehaving
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }
[[noreturn]] inline void input_error(const std::string& what) { throw Error(ErrorKind::Input, what); }

}  // namespace chorovessel
