#include "effstack/stacks.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/mman.h>

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

} // namespace

StackFrame KernelOvercommitStack::init_stack_frame(std::size_t frame_size) {
    const std::size_t guard = page_size();
    const std::size_t allowed = round_up_page(frame_size);
    const std::size_t total = guard + allowed;

    void* region = mmap(nullptr, total, PROT_READ | PROT_WRITE,
                        MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (region == MAP_FAILED)
        fail_errno("overcommit-kernel: mmap failed");
    if (mprotect(region, guard, PROT_NONE) != 0) {
        int saved = errno;
        munmap(region, total);
        errno = saved;
        fail_errno("overcommit-kernel: guard page protection failed");
    }

    StackFrame frame;
    frame.base = region;
    frame.initial_sp = align_down_16(static_cast<char*>(region) + total);
    frame.size = frame_size;
    frame.usable = static_cast<std::size_t>(frame.initial_sp - (static_cast<char*>(region) + guard));
    live_frames_.fetch_add(1, std::memory_order_relaxed);
    return frame;
}

void KernelOvercommitStack::release_stack_frame(StackFrame& frame) {
    if (!frame.base)
        throw ContractViolation("overcommit-kernel: release of an already released frame");
    const std::size_t total = page_size() + round_up_page(frame.size);
    if (munmap(frame.base, total) != 0)
        std::fprintf(stderr, "effstack: overcommit-kernel munmap failed: %s\n", std::strerror(errno));
    frame = StackFrame{};
    live_frames_.fetch_sub(1, std::memory_order_relaxed);
}

std::size_t KernelOvercommitStack::committed_bytes(const StackFrame& frame) const {
    const std::size_t page = page_size();
    const std::size_t allowed = round_up_page(frame.size);
    const std::size_t pages = allowed / page;
    std::vector<unsigned char> residency(pages);
    char* allowed_start = static_cast<char*>(frame.base) + page;
    if (mincore(allowed_start, allowed, residency.data()) != 0)
        return 0;
    std::size_t resident = 0;
    for (unsigned char entry : residency)
        if (entry & 1)
            ++resident;
    return resident * page;
}

} // namespace effstack
