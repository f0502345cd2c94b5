#include "effstack/stacks.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

namespace effstack {

namespace {

char* align_down_16(char* p) {
    return reinterpret_cast<char*>(reinterpret_cast<Word>(p) & ~Word{0xF});
}

} // namespace

StackFrame FixedStack::init_stack_frame(std::size_t frame_size) {
    void* block = std::malloc(frame_size);
    if (!block)
        throw std::bad_alloc();
    if (poison_frames_enabled())
        std::memset(block, 0x13, frame_size);

    StackFrame frame;
    frame.base = block;
    frame.initial_sp = align_down_16(static_cast<char*>(block) + frame_size);
    frame.size = frame_size;
    frame.usable = static_cast<std::size_t>(frame.initial_sp - static_cast<char*>(block));
    live_frames_.fetch_add(1, std::memory_order_relaxed);
    return frame;
}

void FixedStack::release_stack_frame(StackFrame& frame) {
    if (!frame.base)
        throw ContractViolation("fixed: release of an already released frame");
    std::free(frame.base);
    frame = StackFrame{};
    live_frames_.fetch_sub(1, std::memory_order_relaxed);
}

std::size_t FixedStack::committed_bytes(const StackFrame& frame) const {
    return frame.size;
}

} // namespace effstack
