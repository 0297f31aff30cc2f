#ifndef DSV_ERROR_HPP
#define DSV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dsv {

// Mirrors the CLI / C-API exit codes.
enum class ErrorCode : int {
    ok = 0,
    invalid_input = 1,
    usage = 2,
    runtime_abort = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail_invalid(const std::string& what) {
    throw Error(ErrorCode::invalid_input, what);
}

[[noreturn]] inline void fail_runtime(const std::string& what) {
    throw Error(ErrorCode::runtime_abort, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail_invalid(what);
}

}  // namespace dsv

#endif
