#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace effstack::bench {

/// One benchmark result row. median_ns is the median of `samples`, all
/// taken under a monotonic clock after the warm-up runs were discarded.
struct BenchRecord {
    std::string benchmark;
    std::string strategy;
    std::vector<std::pair<std::string, std::string>> params;
    int repeats = 0;
    std::int64_t median_ns = 0;
    std::optional<std::string> output_value;
    std::vector<std::int64_t> samples;
};

/// Raised for documented skips (CLI exit code 2), e.g. expand under the
/// fixed strategy.
class BenchSkip : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultRepeats = 31;
inline constexpr int kDefaultWarmups = 3;

/// Cold-start switch latency: per sample, a fresh coroutine whose body
/// yields once; timed section covers the two resumes only.
BenchRecord bench_switch(std::size_t frame_size, int repeats, int warmups);

/// Handler does mutex-guarded accumulation work per effect; returns the
/// coroutine's returned value (== iterations) as output_value.
BenchRecord bench_complex(std::int64_t iterations, int repeats, int warmups);

/// Deep recursion with a 1 KiB zeroed local per frame; times the single
/// resume that drives the recursion to its perform. Refuses to run under
/// the fixed strategy (documented skip).
BenchRecord bench_expand(int max_depth, int repeats, int warmups);

/// num_threads OS threads, each folding 1000 coroutine runs; output_value
/// is the aggregated (deterministic) sum.
BenchRecord bench_mt(int num_threads, std::int64_t iterations, int repeats, int warmups);

/// Reverse-mode AD demo; output_value is the derivative printed with six
/// decimal places.
BenchRecord bench_ad(std::size_t iters, int repeats, int warmups);

/// Workload bodies, exposed so tests can check outputs without timing.
struct ComplexOutcome {
    std::int64_t result;      // coroutine return value (== iterations)
    std::int64_t accumulator; // handler-side work accumulator
};
ComplexOutcome run_complex_workload(std::int64_t iterations);
std::int64_t run_mt_workload(int num_threads, std::int64_t iterations);
/// One coroutine-driven fold of the mt benchmark (one thread's inner run).
std::int64_t run_async(std::int64_t iterations, int thread_id);

/// CSV row: benchmark,strategy,param_key=val;...,repeats,median_ns,output_value
std::string to_csv_row(const BenchRecord& record);
std::string csv_header();
std::string to_table_row(const BenchRecord& record);

} // namespace effstack::bench
