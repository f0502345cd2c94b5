#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "effstack/bench.hpp"
#include "effstack/effects.hpp"

namespace {

struct CommonOptions {
    std::string strategy;
    std::string format = "table";
    int repeats = effstack::bench::kDefaultRepeats;
    int warmups = effstack::bench::kDefaultWarmups;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--strategy", opts.strategy,
                    "stack strategy: fixed, segmented, overcommit-kernel, overcommit-user "
                    "(default: EFFSTACK_STRATEGY or fixed)");
    cmd->add_option("--format", opts.format, "output format: csv or table")
        ->check(CLI::IsMember({"csv", "table"}));
    cmd->add_option("--repeats", opts.repeats, "timed repetitions (median is reported)")
        ->check(CLI::Range(5, 1000000));
    cmd->add_option("--warmups", opts.warmups, "discarded warm-up runs")
        ->check(CLI::Range(0, 1000000));
}

void apply_strategy(const CommonOptions& opts) {
    if (opts.strategy.empty())
        return;
    effstack::StackStrategy* s = effstack::strategy_by_name(opts.strategy);
    if (!s)
        throw CLI::ValidationError("--strategy", "unknown strategy '" + opts.strategy + "'");
    effstack::set_default_strategy(*s);
}

void print_record(const effstack::bench::BenchRecord& record, const std::string& format) {
    if (format == "csv") {
        std::printf("%s\n%s\n", effstack::bench::csv_header().c_str(),
                    effstack::bench::to_csv_row(record).c_str());
    } else {
        std::printf("%-8s %-18s %-28s %6s %14s %18s\n", "bench", "strategy", "params", "reps",
                    "median_ns", "output");
        std::printf("%s\n", effstack::bench::to_table_row(record).c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"effstack benchmark harness"};
    app.require_subcommand(1);

    CommonOptions opts;

    std::size_t frame_size = effstack::FixedStack::kDefaultFrameSize;
    auto* cmd_switch = app.add_subcommand("switch", "cold-start stack switch latency");
    cmd_switch->add_option("--frame-size", frame_size, "coroutine frame size in bytes");
    add_common(cmd_switch, opts);

    std::int64_t complex_iters = 10000;
    auto* cmd_complex = app.add_subcommand("complex", "context switching with handler-side work");
    cmd_complex->add_option("--iters", complex_iters, "effects performed by the coroutine");
    add_common(cmd_complex, opts);

    int depth = 100;
    auto* cmd_expand = app.add_subcommand("expand", "stack expansion during deep recursion");
    cmd_expand->add_option("--depth", depth, "recursion depth (1 KiB of locals per level)");
    add_common(cmd_expand, opts);

    int threads = 4;
    std::int64_t mt_iters = 10000;
    auto* cmd_mt = app.add_subcommand("mt", "multi-threaded asynchronous folding");
    cmd_mt->add_option("--threads", threads, "OS threads");
    cmd_mt->add_option("--iters", mt_iters, "effects per coroutine run");
    add_common(cmd_mt, opts);

    std::size_t ad_iters = 100;
    auto* cmd_ad = app.add_subcommand("ad", "reverse-mode automatic differentiation demo");
    cmd_ad->add_option("--iters", ad_iters, "series terms in the differentiated program");
    add_common(cmd_ad, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        apply_strategy(opts);
        effstack::bench::BenchRecord record;
        if (cmd_switch->parsed())
            record = effstack::bench::bench_switch(frame_size, opts.repeats, opts.warmups);
        else if (cmd_complex->parsed())
            record = effstack::bench::bench_complex(complex_iters, opts.repeats, opts.warmups);
        else if (cmd_expand->parsed())
            record = effstack::bench::bench_expand(depth, opts.repeats, opts.warmups);
        else if (cmd_mt->parsed())
            record = effstack::bench::bench_mt(threads, mt_iters, opts.repeats, opts.warmups);
        else
            record = effstack::bench::bench_ad(ad_iters, opts.repeats, opts.warmups);
        print_record(record, opts.format);
    } catch (const effstack::bench::BenchSkip& skip) {
        std::fprintf(stderr, "skipped: %s\n", skip.what());
        return 2;
    } catch (const std::exception& error) {
        std::fprintf(stderr, "error: %s\n", error.what());
        return 1;
    }
    return 0;
}
