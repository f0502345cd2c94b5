#include "effstack/stacks.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include <unistd.h>

namespace effstack {

std::size_t page_size() {
    static const std::size_t page = static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
    return page;
}

FixedStack& fixed_stack() {
    static FixedStack s;
    return s;
}

SegmentedStack& segmented_stack() {
    static SegmentedStack s;
    return s;
}

KernelOvercommitStack& kernel_overcommit_stack() {
    static KernelOvercommitStack s;
    return s;
}

UserOvercommitStack& user_overcommit_stack() {
    static UserOvercommitStack s;
    return s;
}

StackStrategy* strategy_by_name(std::string_view name) {
    if (name == "fixed")
        return &fixed_stack();
    if (name == "segmented")
        return &segmented_stack();
    if (name == "overcommit-kernel")
        return &kernel_overcommit_stack();
    if (name == "overcommit-user")
        return &user_overcommit_stack();
    return nullptr;
}

namespace {

std::atomic<StackStrategy*> g_default_strategy{nullptr};

StackStrategy& strategy_from_env() {
    const char* env = std::getenv("EFFSTACK_STRATEGY");
    if (!env || !*env)
        return fixed_stack();
    StackStrategy* s = strategy_by_name(env);
    if (!s)
        throw std::runtime_error(std::string("EFFSTACK_STRATEGY: unknown strategy '") + env +
                                 "' (expected fixed, segmented, overcommit-kernel or overcommit-user)");
    return *s;
}

std::atomic<bool> g_poison_frames{[] {
    const char* env = std::getenv("EFFSTACK_POISON");
    return env && std::strcmp(env, "1") == 0;
}()};

} // namespace

StackStrategy& default_strategy() {
    StackStrategy* s = g_default_strategy.load(std::memory_order_acquire);
    if (!s) {
        s = &strategy_from_env();
        g_default_strategy.store(s, std::memory_order_release);
    }
    return *s;
}

void set_default_strategy(StackStrategy& strategy) {
    g_default_strategy.store(&strategy, std::memory_order_release);
}

bool poison_frames_enabled() {
    return g_poison_frames.load(std::memory_order_relaxed);
}

void set_poison_frames(bool enabled) {
    g_poison_frames.store(enabled, std::memory_order_relaxed);
}

} // namespace effstack
