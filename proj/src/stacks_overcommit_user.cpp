#include "effstack/stacks.hpp"

#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>

#include <signal.h>
#include <sys/mman.h>
#include <unistd.h>

namespace effstack {

namespace {

char* align_down_16(char* p) {
    return reinterpret_cast<char*>(reinterpret_cast<Word>(p) & ~Word{0xF});
}

std::size_t round_up_page(std::size_t size) {
    const std::size_t page = page_size();
    return (size + page - 1) & ~(page - 1);
}

[[noreturn]] void fail_errno(const char* what) {
    throw std::runtime_error(std::string(what) + ": " + std::strerror(errno));
}

struct Region {
    std::uintptr_t base = 0;
    std::size_t total = 0;
    std::size_t allowed = 0;
    std::size_t guard = 0;
    std::atomic<std::size_t> committed{0};
    std::atomic<std::uint64_t> faults{0};
};

// Read-mostly region registry. The fault handler scans the slot array
// lock-free; init/release serialize on the mutex. A region's owner
// coroutine cannot be running while the region is released, so the
// handler never observes a region mid-teardown (wild-pointer faults from
// unrelated threads are outside the supported model).
constexpr int kMaxRegions = 256;
std::atomic<Region*> g_regions[kMaxRegions];
std::atomic<int> g_region_hwm{0};
std::mutex g_registry_mutex;
int g_live_regions = 0;
struct sigaction g_old_sigsegv;
bool g_handler_installed = false;

// --- async-signal-safe diagnostics --------------------------------------

void write_str(const char* s) {
    (void)!write(STDERR_FILENO, s, std::strlen(s));
}

void write_hex(std::uintptr_t value) {
    char buf[2 + 16];
    buf[0] = '0';
    buf[1] = 'x';
    int n = 2;
    bool started = false;
    for (int shift = 60; shift >= 0; shift -= 4) {
        unsigned digit = (value >> shift) & 0xF;
        if (!started && digit == 0 && shift != 0)
            continue;
        started = true;
        buf[n++] = "0123456789abcdef"[digit];
    }
    (void)!write(STDERR_FILENO, buf, n);
}

void write_dec(std::uint64_t value) {
    char buf[20];
    int n = 0;
    do {
        buf[n++] = static_cast<char>('0' + value % 10);
        value /= 10;
    } while (value);
    for (int i = 0; i < n / 2; ++i)
        std::swap(buf[i], buf[n - 1 - i]);
    (void)!write(STDERR_FILENO, buf, n);
}

void dump_regions() {
    write_str("effstack: registered overcommit regions:\n");
    int hwm = g_region_hwm.load(std::memory_order_acquire);
    for (int i = 0; i < hwm; ++i) {
        Region* r = g_regions[i].load(std::memory_order_acquire);
        if (!r)
            continue;
        write_str("  base=");
        write_hex(r->base);
        write_str(" allowed=");
        write_dec(r->allowed);
        write_str(" committed=");
        write_dec(r->committed.load(std::memory_order_relaxed));
        write_str(" faults=");
        write_dec(r->faults.load(std::memory_order_relaxed));
        write_str("\n");
    }
}

[[noreturn]] void fatal_stack_overflow(const Region* r, std::uintptr_t addr) {
    write_str("effstack: stack overflow: fault at ");
    write_hex(addr);
    write_str(" hit the guard of region ");
    write_hex(r->base);
    write_str("\n");
    dump_regions();
    abort();
}

[[noreturn]] void fatal_in_handler(const char* message) {
    write_str("effstack: ");
    write_str(message);
    write_str("\n");
    dump_regions();
    _exit(1);
}

// --- fault handling ------------------------------------------------------

Region* region_containing(std::uintptr_t addr) {
    int hwm = g_region_hwm.load(std::memory_order_acquire);
    for (int i = 0; i < hwm; ++i) {
        Region* r = g_regions[i].load(std::memory_order_acquire);
        if (r && addr >= r->base && addr < r->base + r->total)
            return r;
    }
    return nullptr;
}

void delegate_fault(int sig, siginfo_t* info, void* context) {
    if ((g_old_sigsegv.sa_flags & SA_SIGINFO) && g_old_sigsegv.sa_sigaction) {
        write_str("effstack: delegating fault to previous handler\n");
        g_old_sigsegv.sa_sigaction(sig, info, context);
        return;
    }
    if (!(g_old_sigsegv.sa_flags & SA_SIGINFO) && g_old_sigsegv.sa_handler != SIG_DFL &&
        g_old_sigsegv.sa_handler != SIG_IGN && g_old_sigsegv.sa_handler != nullptr) {
        write_str("effstack: delegating fault to previous handler\n");
        g_old_sigsegv.sa_handler(sig);
        return;
    }
    // No previous disposition: fall back to the default one. Returning
    // re-executes the faulting instruction, which then terminates the
    // process.
    write_str("effstack: no previous handler, restoring default disposition\n");
    signal(SIGSEGV, SIG_DFL);
}

void fault_handler(int sig, siginfo_t* info, void* context) {
    const std::uintptr_t addr = reinterpret_cast<std::uintptr_t>(info->si_addr);
    Region* r = region_containing(addr);
    if (!r) {
        delegate_fault(sig, info, context);
        return;
    }

    const std::uintptr_t allowed_start = r->base + r->guard;
    if (addr < allowed_start)
        fatal_stack_overflow(r, addr);

    const std::size_t committed = r->committed.load(std::memory_order_relaxed);
    if (addr < allowed_start + committed)
        fatal_in_handler("fault in already committed region");
    if (committed >= r->allowed)
        fatal_stack_overflow(r, addr);

    // Batch commit: one page the first time, then double the committed
    // run, clamped to the allowance. The faulting instruction retries and
    // faults again until the frontier passes it.
    std::size_t commit = committed == 0 ? page_size() : committed;
    if (committed + commit > r->allowed)
        commit = r->allowed - committed;

    if (mprotect(reinterpret_cast<void*>(allowed_start + committed), commit,
                 PROT_READ | PROT_WRITE) != 0)
        fatal_in_handler("mprotect failed in fault handler");

    r->committed.store(committed + commit, std::memory_order_relaxed);
    r->faults.fetch_add(1, std::memory_order_relaxed);
}

// --- per-thread alternate signal stack -----------------------------------

struct AltStackGuard {
    void* memory = nullptr;
    std::size_t size = 0;
    bool active = false;

    void ensure() {
        if (active)
            return;
        size = 64 * 1024;
        memory = mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
        if (memory == MAP_FAILED)
            fail_errno("overcommit-user: alternate signal stack allocation failed");
        stack_t ss{};
        ss.ss_sp = memory;
        ss.ss_size = size;
        ss.ss_flags = 0;
        if (sigaltstack(&ss, nullptr) != 0) {
            int saved = errno;
            munmap(memory, size);
            memory = nullptr;
            errno = saved;
            fail_errno("overcommit-user: sigaltstack failed");
        }
        active = true;
    }

    ~AltStackGuard() {
        if (!active)
            return;
        stack_t ss{};
        ss.ss_flags = SS_DISABLE;
        sigaltstack(&ss, nullptr);
        munmap(memory, size);
    }
};

thread_local AltStackGuard tl_alt_stack;

void install_handler_locked() {
    struct sigaction sa;
    std::memset(&sa, 0, sizeof(sa));
    sa.sa_flags = SA_SIGINFO | SA_ONSTACK;
    sa.sa_sigaction = fault_handler;
    sigemptyset(&sa.sa_mask);
    if (sigaction(SIGSEGV, &sa, &g_old_sigsegv) != 0)
        fail_errno("overcommit-user: sigaction failed");
    g_handler_installed = true;
}

void restore_handler_locked() {
    if (!g_handler_installed)
        return;
    sigaction(SIGSEGV, &g_old_sigsegv, nullptr);
    g_handler_installed = false;
}

void register_region(Region* r) {
    std::lock_guard<std::mutex> lock(g_registry_mutex);
    int slot = -1;
    for (int i = 0; i < kMaxRegions; ++i) {
        if (g_regions[i].load(std::memory_order_relaxed) == nullptr) {
            slot = i;
            break;
        }
    }
    if (slot < 0)
        throw std::runtime_error("overcommit-user: region registry full");
    g_regions[slot].store(r, std::memory_order_release);
    int hwm = g_region_hwm.load(std::memory_order_relaxed);
    if (slot + 1 > hwm)
        g_region_hwm.store(slot + 1, std::memory_order_release);
    if (g_live_regions++ == 0)
        install_handler_locked();
}

void deregister_region(Region* r) {
    std::lock_guard<std::mutex> lock(g_registry_mutex);
    for (int i = 0; i < kMaxRegions; ++i) {
        if (g_regions[i].load(std::memory_order_relaxed) == r) {
            g_regions[i].store(nullptr, std::memory_order_release);
            break;
        }
    }
    if (--g_live_regions == 0)
        restore_handler_locked();
}

} // namespace

StackFrame UserOvercommitStack::init_stack_frame(std::size_t frame_size) {
    const std::size_t guard = page_size();
    const std::size_t allowed = round_up_page(frame_size);
    const std::size_t total = guard + allowed;

    // Reserve the whole region inaccessible; the fault handler commits
    // pages on demand.
    void* region_mem = mmap(nullptr, total, PROT_NONE,
                            MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (region_mem == MAP_FAILED)
        fail_errno("overcommit-user: mmap failed");

    auto* region = new Region;
    region->base = reinterpret_cast<std::uintptr_t>(region_mem);
    region->total = total;
    region->allowed = allowed;
    region->guard = guard;

    tl_alt_stack.ensure();
    try {
        register_region(region);
    } catch (...) {
        munmap(region_mem, total);
        delete region;
        throw;
    }

    StackFrame frame;
    frame.base = region_mem;
    frame.cursor = region;
    frame.initial_sp = align_down_16(static_cast<char*>(region_mem) + total);
    frame.size = frame_size;
    frame.usable = static_cast<std::size_t>(frame.initial_sp - (static_cast<char*>(region_mem) + guard));
    live_frames_.fetch_add(1, std::memory_order_relaxed);
    return frame;
}

void UserOvercommitStack::release_stack_frame(StackFrame& frame) {
    if (!frame.base)
        throw ContractViolation("overcommit-user: release of an already released frame");
    auto* region = static_cast<Region*>(frame.cursor);
    deregister_region(region);
    if (munmap(frame.base, region->total) != 0)
        std::fprintf(stderr, "effstack: overcommit-user munmap failed: %s\n", std::strerror(errno));
    delete region;
    frame = StackFrame{};
    live_frames_.fetch_sub(1, std::memory_order_relaxed);
}

std::size_t UserOvercommitStack::committed_bytes(const StackFrame& frame) const {
    const auto* region = static_cast<const Region*>(frame.cursor);
    return region->committed.load(std::memory_order_relaxed);
}

bool UserOvercommitStack::lookup_region(const void* addr, RegionInfo& out) {
    Region* r = region_containing(reinterpret_cast<std::uintptr_t>(addr));
    if (!r)
        return false;
    out.base = r->base;
    out.total = r->total;
    out.allowed = r->allowed;
    out.guard = r->guard;
    out.committed = r->committed.load(std::memory_order_relaxed);
    out.faults_absorbed = r->faults.load(std::memory_order_relaxed);
    return true;
}

int UserOvercommitStack::live_region_count() {
    std::lock_guard<std::mutex> lock(g_registry_mutex);
    return g_live_regions;
}

} // namespace effstack
