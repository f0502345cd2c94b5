#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <sys/types.h>

#include "effstack/stacks.hpp"

extern "C" std::uint64_t effstack_test_salted_call(const std::uint64_t salts[6],
                                                   std::uint64_t (*fn)(std::uint64_t),
                                                   std::uint64_t arg, std::uint64_t out[6]);

namespace effstack::testing {

/// The file-reading tutorial: a coroutine performs read_file("example.txt"),
/// the handler replies with a fixed string, the coroutine stores what it
/// received. Returns the received string (must be verbatim the handler's).
std::string run_read_file_tutorial(StackStrategy& strategy);
inline constexpr const char* kTutorialText = "halooooooooooooo";

struct ChildResult {
    bool exited;       // normal exit vs signal
    int exit_code;     // valid when exited
    int term_signal;   // valid when !exited
    std::string stderr_output;
};

/// Forks, runs body in the child (which must terminate one way or
/// another; a returning body _exits 0), captures the child's stderr.
ChildResult run_in_child(const std::function<void()>& body);

} // namespace effstack::testing
