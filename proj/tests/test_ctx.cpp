#include "doctest.h"

#include <cstdlib>
#include <random>
#include <vector>

#include "effstack/ctx.hpp"
#include "effstack/effects.hpp"
#include "support/test_support.hpp"

using namespace effstack;

namespace {

struct RawStack {
    char* base;
    char* top;

    explicit RawStack(std::size_t size = 64 * 1024) {
        base = static_cast<char*>(std::aligned_alloc(16, size));
        REQUIRE(base != nullptr);
        top = base + size;
    }
    ~RawStack() { std::free(base); }
};

// Shared slots for raw ctx tests (single-threaded).
ResumeContext g_main;
ResumeContext g_coro;
Word g_seen_argument;
void* g_local_address;
void* g_returned;

constexpr Word kReturnMarker = 0xE0F0;

void raw_on_return(void* result) {
    g_returned = result;
    context_restore(g_main, kReturnMarker);
}

void* observe_entry(void* argument) {
    int local = 0;
    g_seen_argument = reinterpret_cast<Word>(argument);
    g_local_address = &local;
    context_switch(g_coro, g_main, 11);
    return reinterpret_cast<void*>(77);
}

void* pingpong_entry(void*) {
    Word got = context_switch(g_coro, g_main, 7);
    context_switch(g_coro, g_main, got + 100);
    return nullptr;
}

} // namespace

TEST_CASE("bootstrap runs entry with its argument on the new stack") {
    RawStack stack;
    g_coro = context_bootstrap(observe_entry, reinterpret_cast<void*>(Word{0}), stack.top,
                               raw_on_return);
    Word w = context_switch(g_main, g_coro, 0);
    CHECK(w == 11);
    CHECK(g_seen_argument == 0);
    CHECK(g_local_address < static_cast<void*>(stack.top));
    CHECK(g_local_address >= static_cast<void*>(stack.base));
    // finish the coroutine; entry's return value routes through on_return
    w = context_switch(g_main, g_coro, 0);
    CHECK(w == kReturnMarker);
    CHECK(g_returned == reinterpret_cast<void*>(77));
}

TEST_CASE("switch payloads ping-pong between contexts") {
    RawStack stack;
    g_coro = context_bootstrap(pingpong_entry, nullptr, stack.top, raw_on_return);
    Word a = context_switch(g_main, g_coro, 0);
    CHECK(a == 7);
    Word b = context_switch(g_main, g_coro, 9);
    CHECK(b == 109); // 9 + 100: the reply word round-tripped
    context_switch(g_main, g_coro, 0);
}

TEST_CASE("switching to a consumed context is a contract violation") {
    RawStack stack;
    bool entered = false;
    static bool* entered_ptr;
    entered_ptr = &entered;
    auto entry = [](void*) -> void* {
        *entered_ptr = true;
        context_restore(g_main, 1); // leaves g_coro consumed
    };
    g_coro = context_bootstrap(entry, nullptr, stack.top, raw_on_return);
    context_switch(g_main, g_coro, 0);
    CHECK(entered);
    CHECK_THROWS_AS(context_switch(g_main, g_coro, 0), ContractViolation);
}

TEST_CASE("bootstrap rejects a misaligned stack pointer") {
    RawStack stack;
    CHECK_THROWS_AS(
        context_bootstrap(observe_entry, nullptr, stack.top - 8, raw_on_return),
        ContractViolation);
}

// --- register preservation and stack-pointer stability through the
// --- effects-level yield/resume path

namespace {

std::uint64_t yield_rounds(std::uint64_t n) {
    Coroutine* self = current_coroutine();
    for (std::uint64_t i = 0; i < n; ++i)
        yield(*self, 0, 0);
    return 42;
}

struct SaltCase {
    std::uint64_t salts[6];
    std::uint64_t out[6];
    std::uint64_t rounds;
    std::uint64_t fn_result;
};

void* salted_body(void* arg) {
    auto* c = static_cast<SaltCase*>(arg);
    c->fn_result = effstack_test_salted_call(c->salts, &yield_rounds, c->rounds, c->out);
    return nullptr;
}

} // namespace

TEST_CASE("yield/resume round trips preserve callee-saved registers bit-exactly") {
    std::mt19937_64 rng(20240521);
    set_default_strategy(fixed_stack());
    for (int trial = 0; trial < 8; ++trial) {
        SaltCase c{};
        for (auto& s : c.salts)
            s = rng();
        c.rounds = 5000;
        auto k = Coroutine::create_sized(salted_body, &c, 32 * 1024);
        Request r = resume_handling_all(*k);
        std::uint64_t spins = 0;
        while (!r.is_return()) {
            ++spins;
            r = resume_handling_all(*k);
        }
        CHECK(spins == c.rounds);
        CHECK(c.fn_result == 42);
        for (int i = 0; i < 6; ++i)
            CHECK(c.out[i] == c.salts[i]);
    }
}

TEST_CASE("suspended stack pointer stays constant across round trips") {
    set_default_strategy(fixed_stack());
    SaltCase c{};
    c.rounds = 100000;
    auto k = Coroutine::create_sized(salted_body, &c, 32 * 1024);
    Request r = resume_handling_all(*k);
    const void* first_sp = k->saved_stack_pointer();
    while (!r.is_return()) {
        CHECK(k->saved_stack_pointer() == first_sp);
        r = resume_handling_all(*k);
    }
}
