#include "effstack/stacks.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>

namespace effstack {

namespace {

char* align_down_16(char* p) {
    return reinterpret_cast<char*>(reinterpret_cast<Word>(p) & ~Word{0xF});
}

void link(StackSegment* first, StackSegment* second) {
    first->next = second;
    second->prev = first;
}

void check_canary(const StackSegment* segment) {
    if (segment->canary != kSegmentCanary) {
        std::fprintf(stderr, "effstack: segment canary smashed at %p (size %zu)\n",
                     static_cast<const void*>(segment), segment->size);
        std::abort();
    }
}

} // namespace

StackSegment* SegmentedStack::init_segment(std::size_t frame_size) {
    const std::size_t overhead = sizeof(StackSegment);
    auto* segment = static_cast<StackSegment*>(std::malloc(frame_size + overhead));
    if (!segment)
        throw std::bad_alloc();
    if (poison_frames_enabled())
        std::memset(segment, 0x13, frame_size + overhead);
    segment->prev = nullptr;
    segment->next = nullptr;
    segment->size = frame_size;
    segment->canary = kSegmentCanary;
    return segment;
}

StackFrame SegmentedStack::init_stack_frame(std::size_t frame_size) {
    StackSegment* head = init_segment(frame_size);

    StackFrame frame;
    frame.base = head;
    frame.cursor = head;
    frame.initial_sp = align_down_16(reinterpret_cast<char*>(head + 1) + head->size);
    frame.size = frame_size;
    frame.usable = static_cast<std::size_t>(frame.initial_sp - reinterpret_cast<char*>(head + 1));
    live_frames_.fetch_add(1, std::memory_order_relaxed);
    return frame;
}

void SegmentedStack::release_stack_frame(StackFrame& frame) {
    if (!frame.base)
        throw ContractViolation("segmented: release of an already released frame");
    auto* segment = static_cast<StackSegment*>(frame.base);
    while (segment) {
        check_canary(segment);
        StackSegment* next = segment->next;
        std::free(segment);
        segment = next;
    }
    frame = StackFrame{};
    live_frames_.fetch_sub(1, std::memory_order_relaxed);
}

std::size_t SegmentedStack::committed_bytes(const StackFrame& frame) const {
    std::size_t total = 0;
    for (const auto* segment = static_cast<const StackSegment*>(frame.base); segment;
         segment = segment->next)
        total += segment->size;
    return total;
}

SegmentedStack::Growth SegmentedStack::allocate_growth_frame(StackFrame& frame, std::size_t needed,
                                                             const void* old_stack_top,
                                                             std::size_t param_bytes) {
    auto* current = static_cast<StackSegment*>(frame.cursor);
    if (!current)
        throw ContractViolation("segmented: growth on a frame without a current segment");

    std::size_t new_size = needed + param_bytes;
    if (new_size < kMinSegmentSize)
        new_size = kMinSegmentSize;

    StackSegment* next;
    if (current->next == nullptr) {
        next = init_segment(new_size);
        growth_allocations_.fetch_add(1, std::memory_order_relaxed);
        link(current, next);
    } else if (current->next->size < needed + param_bytes) {
        // Retained segment is too small: splice a bigger one in front of
        // it, keeping the small one downstream for later reuse.
        next = init_segment(new_size);
        growth_allocations_.fetch_add(1, std::memory_order_relaxed);
        link(next, current->next);
        link(current, next);
    } else {
        next = current->next;
    }

    frame.cursor = next;

    char* new_sp = reinterpret_cast<char*>(next + 1) + next->size - param_bytes;
    new_sp = align_down_16(new_sp);
    if (param_bytes)
        std::memcpy(new_sp, old_stack_top, param_bytes);
    return Growth{new_sp, next->size - param_bytes};
}

void* SegmentedStack::release_growth_frame(StackFrame& frame) {
    auto* current = static_cast<StackSegment*>(frame.cursor);
    if (!current)
        throw ContractViolation("segmented: growth release on a frame without a current segment");
    if (!current->prev)
        throw ContractViolation("segmented: growth release at the head of the segment chain");
    frame.cursor = current->prev;
    return reinterpret_cast<char*>(current->prev) + sizeof(StackSegment);
}

bool SegmentedStack::has_room(const StackFrame& frame, const void* sp, std::size_t needed) {
    const auto* segment = static_cast<const StackSegment*>(frame.cursor);
    const char* floor = reinterpret_cast<const char*>(segment + 1);
    const char* p = static_cast<const char*>(sp);
    return p >= floor && static_cast<std::size_t>(p - floor) >= needed;
}

} // namespace effstack
