#include "effstack/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <sstream>
#include <thread>

#include "effstack/ad.hpp"
#include "effstack/effects.hpp"

namespace effstack::bench {

namespace {

using Clock = std::chrono::steady_clock;
static_assert(Clock::is_steady, "benchmark samples need a monotonic clock");

std::int64_t elapsed_ns(Clock::time_point start, Clock::time_point stop) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
}

std::int64_t median_of(std::vector<std::int64_t> samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    if (n % 2 == 1)
        return samples[n / 2];
    return (samples[n / 2 - 1] + samples[n / 2]) / 2;
}

void require_repeats(int repeats, int warmups) {
    if (repeats < 5)
        throw std::invalid_argument("benchmarks take the median of at least 5 repeats");
    if (warmups < 0)
        throw std::invalid_argument("warmups must be non-negative");
}

BenchRecord make_record(std::string benchmark,
                        std::vector<std::pair<std::string, std::string>> params,
                        std::vector<std::int64_t> samples, std::optional<std::string> output) {
    BenchRecord record;
    record.benchmark = std::move(benchmark);
    record.strategy = default_strategy().name();
    record.params = std::move(params);
    record.repeats = static_cast<int>(samples.size());
    record.median_ns = median_of(samples);
    record.output_value = std::move(output);
    record.samples = std::move(samples);
    return record;
}

// --- switch ---------------------------------------------------------------

void* switch_body(void* arg) {
    (void)arg;
    yield(*current_coroutine(), 0, 0);
    return nullptr;
}

// --- complex ----------------------------------------------------------------

struct ComplexYield {
    static constexpr EffectId id = 0;
    static constexpr const char* name = "complex_yield";
    struct Payload {};
    using Reply = void;
};

struct ComplexState {
    std::mutex mutex;
    std::int64_t global = 0;
};

void extra_work(ComplexState& state) {
    int sum = 0;
    for (int i = 0; i < 100; ++i)
        sum += i;
    state.global += sum;
}

void* complex_body(void* arg) {
    std::int64_t iterations = *static_cast<std::int64_t*>(arg);
    for (std::int64_t i = 0; i < iterations; ++i) {
        volatile int cal = static_cast<int>(i * 2);
        (void)cal;
        perform<ComplexYield>({});
    }
    return reinterpret_cast<void*>(static_cast<std::intptr_t>(iterations));
}

std::int64_t handle_complex_loop(ComplexState& state, Coroutine& k) {
    Request request = resume(k, 0, handles(ComplexYield::id));
    while (!request.is_return()) {
        state.mutex.lock();
        extra_work(state);
        state.mutex.unlock();
        request = resume(k, 0, handles(ComplexYield::id));
    }
    return return_value<std::int64_t>(request);
}

// --- expand -----------------------------------------------------------------

struct FillStack {
    static constexpr EffectId id = 0;
    static constexpr const char* name = "fill_stack";
    struct Payload {};
    using Reply = void;
};

void fill_stack_rec(int depth, int max_depth) {
    with_stack_room(2048, [&] {
        char buffer[1024];
        std::memset(buffer, 0, sizeof(buffer));
        if (depth < max_depth) {
            fill_stack_rec(depth + 1, max_depth);
        } else {
            perform<FillStack>({});
        }
        // keep the buffer alive across the recursion
        asm volatile("" ::"r"(buffer) : "memory");
    });
}

void* fill_fn(void* arg) {
    int max_depth = *static_cast<int*>(arg);
    fill_stack_rec(0, max_depth);
    return nullptr;
}

// --- mt ----------------------------------------------------------------------

struct AsyncOp {
    static constexpr EffectId id = 0;
    static constexpr const char* name = "async_op";
    struct Payload {
        std::int64_t x;
    };
    using Reply = void;
};

std::int64_t concurrent_operation(std::int64_t x, std::int64_t y) {
    return (x + y) ^ 0xABCDEF;
}

struct ThreadArgs {
    std::int64_t iterations;
    int thread_id;
};

void* async_loop(void* arg) {
    auto* args = static_cast<ThreadArgs*>(arg);
    for (std::int64_t i = args->iterations; i > 0; --i)
        perform<AsyncOp>({i});
    return reinterpret_cast<void*>(static_cast<std::intptr_t>(args->thread_id));
}

std::int64_t handle_async_rec(Coroutine& k) {
    Request request = resume(k, 0, handles(AsyncOp::id));
    if (request.is_return())
        return return_value<std::int64_t>(request);
    std::int64_t x = payload_of<AsyncOp>(request).x;
    return concurrent_operation(x, handle_async_rec(k));
}

} // namespace

std::int64_t run_async(std::int64_t iterations, int thread_id) {
    ThreadArgs args{iterations, thread_id};
    auto k = Coroutine::create(async_loop, &args);
    return handle_async_rec(*k);
}

std::int64_t run_mt_workload(int num_threads, std::int64_t iterations) {
    std::vector<std::thread> threads;
    std::vector<std::int64_t> results(static_cast<std::size_t>(num_threads), 0);
    threads.reserve(static_cast<std::size_t>(num_threads));
    for (int t = 0; t < num_threads; ++t) {
        threads.emplace_back([&results, t, iterations] {
            std::int64_t local = 0;
            for (int rep = 0; rep < 1000; ++rep)
                local += run_async(iterations, t + 1);
            results[static_cast<std::size_t>(t)] = local;
        });
    }
    for (auto& thread : threads)
        thread.join();
    std::int64_t total = 0;
    for (std::int64_t r : results)
        total += r;
    return total;
}

ComplexOutcome run_complex_workload(std::int64_t iterations) {
    ComplexState state;
    auto k = Coroutine::create(complex_body, &iterations);
    std::int64_t result = handle_complex_loop(state, *k);
    return ComplexOutcome{result, state.global};
}

BenchRecord bench_switch(std::size_t frame_size, int repeats, int warmups) {
    require_repeats(repeats, warmups);
    std::vector<std::int64_t> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < warmups + repeats; ++i) {
        auto k = Coroutine::create_sized(switch_body, nullptr, frame_size);
        auto start = Clock::now();
        resume_handling_all(*k, 0);
        resume_handling_all(*k, 0);
        auto stop = Clock::now();
        if (i >= warmups)
            samples.push_back(elapsed_ns(start, stop));
    }
    return make_record("switch", {{"frame_size", std::to_string(frame_size)}},
                       std::move(samples), std::nullopt);
}

BenchRecord bench_complex(std::int64_t iterations, int repeats, int warmups) {
    require_repeats(repeats, warmups);
    std::vector<std::int64_t> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    std::int64_t result = 0;
    for (int i = 0; i < warmups + repeats; ++i) {
        ComplexState state;
        auto k = Coroutine::create(complex_body, &iterations);
        auto start = Clock::now();
        result = handle_complex_loop(state, *k);
        auto stop = Clock::now();
        if (i >= warmups)
            samples.push_back(elapsed_ns(start, stop));
    }
    return make_record("complex", {{"iters", std::to_string(iterations)}}, std::move(samples),
                       std::to_string(result));
}

BenchRecord bench_expand(int max_depth, int repeats, int warmups) {
    require_repeats(repeats, warmups);
    if (&default_strategy() == &fixed_stack())
        throw BenchSkip("expand does not run under the fixed strategy: the workload exists to "
                        "exercise stack growth, which a fixed frame cannot do");
    std::vector<std::int64_t> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < warmups + repeats; ++i) {
        int depth = max_depth;
        auto k = Coroutine::create(fill_fn, &depth);
        auto start = Clock::now();
        resume_handling_all(*k, 0);
        auto stop = Clock::now();
        // the coroutine is deleted while suspended at its perform
        if (i >= warmups)
            samples.push_back(elapsed_ns(start, stop));
    }
    return make_record("expand", {{"depth", std::to_string(max_depth)}}, std::move(samples),
                       std::nullopt);
}

BenchRecord bench_mt(int num_threads, std::int64_t iterations, int repeats, int warmups) {
    require_repeats(repeats, warmups);
    std::vector<std::int64_t> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    std::int64_t output = 0;
    bool first = true;
    for (int i = 0; i < warmups + repeats; ++i) {
        auto start = Clock::now();
        std::int64_t total = run_mt_workload(num_threads, iterations);
        auto stop = Clock::now();
        if (first) {
            output = total;
            first = false;
        } else if (total != output) {
            throw std::runtime_error("mt benchmark produced a non-deterministic aggregate");
        }
        if (i >= warmups)
            samples.push_back(elapsed_ns(start, stop));
    }
    return make_record("mt",
                       {{"threads", std::to_string(num_threads)},
                        {"iters", std::to_string(iterations)}},
                       std::move(samples), std::to_string(output));
}

BenchRecord bench_ad(std::size_t iters, int repeats, int warmups) {
    require_repeats(repeats, warmups);
    std::vector<std::int64_t> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    double derivative = 0.0;
    for (int i = 0; i < warmups + repeats; ++i) {
        auto start = Clock::now();
        ad::AdResult result = ad::run_ad(iters);
        auto stop = Clock::now();
        derivative = result.derivative;
        if (i >= warmups)
            samples.push_back(elapsed_ns(start, stop));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%lf", derivative);
    return make_record("ad", {{"iters", std::to_string(iters)}}, std::move(samples),
                       std::string(buf));
}

// --- output formatting ------------------------------------------------------

namespace {

std::string params_field(const BenchRecord& record) {
    std::string out;
    for (const auto& [key, value] : record.params) {
        if (!out.empty())
            out += ';';
        out += key;
        out += '=';
        out += value;
    }
    return out;
}

} // namespace

std::string csv_header() {
    return "benchmark,strategy,params,repeats,median_ns,output_value";
}

std::string to_csv_row(const BenchRecord& record) {
    std::ostringstream out;
    out << record.benchmark << ',' << record.strategy << ',' << params_field(record) << ','
        << record.repeats << ',' << record.median_ns << ','
        << (record.output_value ? *record.output_value : "");
    return out.str();
}

std::string to_table_row(const BenchRecord& record) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %-18s %-28s %6d %14lld %18s", record.benchmark.c_str(),
                  record.strategy.c_str(), params_field(record).c_str(), record.repeats,
                  static_cast<long long>(record.median_ns),
                  record.output_value ? record.output_value->c_str() : "-");
    return std::string(buf);
}

} // namespace effstack::bench
