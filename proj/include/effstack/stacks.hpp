#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "effstack/ctx.hpp"

namespace effstack {

/// One coroutine stack as handed out by a strategy. `base` is the
/// strategy's handle (heap block, head segment, or region base); `cursor`
/// is strategy-private state (the segmented strategy keeps the current
/// segment there). `usable` is how many writable bytes lie below
/// initial_sp in the initial extent.
struct StackFrame {
    void* base = nullptr;
    void* cursor = nullptr;
    char* initial_sp = nullptr;
    std::size_t size = 0;
    std::size_t usable = 0;
};

/// Allocation policy for coroutine stacks. init returns a frame whose
/// initial_sp is 16-byte aligned; release returns all OS resources and
/// must be called exactly once per frame.
class StackStrategy {
public:
    virtual ~StackStrategy() = default;

    virtual const char* name() const = 0;
    virtual std::size_t default_frame_size() const = 0;
    virtual StackFrame init_stack_frame(std::size_t frame_size) = 0;
    virtual void release_stack_frame(StackFrame& frame) = 0;

    /// Bytes of the frame currently backed by committed memory. Exact for
    /// the user overcommit strategy, best-effort residency for the kernel
    /// one, total allocated bytes for fixed/segmented.
    virtual std::size_t committed_bytes(const StackFrame& frame) const = 0;

    /// Frames handed out and not yet released (allocator accounting).
    std::int64_t live_frames() const { return live_frames_.load(std::memory_order_relaxed); }

protected:
    std::atomic<std::int64_t> live_frames_{0};
};

// --- segmented strategy -----------------------------------------------

struct StackSegment {
    StackSegment* prev;
    StackSegment* next;
    std::size_t size; // usable bytes, header excluded
    Word canary;
};

inline constexpr Word kSegmentCanary = 0x9999999999999999ull;

class SegmentedStack final : public StackStrategy {
public:
    static constexpr std::size_t kDefaultFrameSize = 1024;
    static constexpr std::size_t kMinSegmentSize = 0;
    /// Foreign/library calls from a segmented stack must run on a segment
    /// of at least this size; there is no automatic system-stack
    /// trampoline.
    static constexpr std::size_t kSyscallSegmentSize = 8 * 1024;

    const char* name() const override { return "segmented"; }
    std::size_t default_frame_size() const override { return kDefaultFrameSize; }
    StackFrame init_stack_frame(std::size_t frame_size) override;
    void release_stack_frame(StackFrame& frame) override;
    std::size_t committed_bytes(const StackFrame& frame) const override;

    /// Allocates and initializes a detached segment (no links, canary set).
    StackSegment* init_segment(std::size_t frame_size);

    struct Growth {
        char* sp;           // 16-byte aligned top of the new extent
        std::size_t usable; // bytes available below sp
    };

    /// Advances the frame to a segment with at least needed+param_bytes
    /// usable bytes, reusing a retained next segment when it is large
    /// enough, splicing a fresh one in front of it otherwise. param_bytes
    /// are copied from old_stack_top to the new top.
    Growth allocate_growth_frame(StackFrame& frame, std::size_t needed, const void* old_stack_top,
                                 std::size_t param_bytes);

    /// Steps the frame back to the previous segment. The vacated segment
    /// stays linked for reuse. Returns the address just past the previous
    /// segment's header.
    void* release_growth_frame(StackFrame& frame);

    /// True when at least `needed` bytes remain between sp and the floor
    /// of the frame's current segment.
    static bool has_room(const StackFrame& frame, const void* sp, std::size_t needed);

    /// Segments allocated by allocate_growth_frame since the last reset
    /// (the hot-split retention counter; initial frames do not count).
    std::uint64_t growth_allocations() const {
        return growth_allocations_.load(std::memory_order_relaxed);
    }
    void reset_growth_allocations() { growth_allocations_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> growth_allocations_{0};
};

// --- fixed strategy ----------------------------------------------------

class FixedStack final : public StackStrategy {
public:
    static constexpr std::size_t kDefaultFrameSize = 150 * 1024;

    const char* name() const override { return "fixed"; }
    std::size_t default_frame_size() const override { return kDefaultFrameSize; }
    StackFrame init_stack_frame(std::size_t frame_size) override;
    void release_stack_frame(StackFrame& frame) override;
    std::size_t committed_bytes(const StackFrame& frame) const override;
};

// --- overcommit strategies ----------------------------------------------

class KernelOvercommitStack final : public StackStrategy {
public:
    static constexpr std::size_t kDefaultFrameSize = 150 * 1024;

    const char* name() const override { return "overcommit-kernel"; }
    std::size_t default_frame_size() const override { return kDefaultFrameSize; }
    StackFrame init_stack_frame(std::size_t frame_size) override;
    void release_stack_frame(StackFrame& frame) override;
    std::size_t committed_bytes(const StackFrame& frame) const override;
};

class UserOvercommitStack final : public StackStrategy {
public:
    static constexpr std::size_t kDefaultFrameSize = 150 * 1024;

    const char* name() const override { return "overcommit-user"; }
    std::size_t default_frame_size() const override { return kDefaultFrameSize; }
    StackFrame init_stack_frame(std::size_t frame_size) override;
    void release_stack_frame(StackFrame& frame) override;
    std::size_t committed_bytes(const StackFrame& frame) const override;

    /// Registry introspection for tests and diagnostics.
    struct RegionInfo {
        std::uintptr_t base;
        std::size_t total;
        std::size_t allowed;
        std::size_t guard;
        std::size_t committed;
        std::uint64_t faults_absorbed;
    };
    /// Looks up the registered region containing addr.
    static bool lookup_region(const void* addr, RegionInfo& out);
    static int live_region_count();
};

// --- process-wide configuration -----------------------------------------

std::size_t page_size();

FixedStack& fixed_stack();
SegmentedStack& segmented_stack();
KernelOvercommitStack& kernel_overcommit_stack();
UserOvercommitStack& user_overcommit_stack();

/// nullptr when the name is not one of fixed | segmented |
/// overcommit-kernel | overcommit-user.
StackStrategy* strategy_by_name(std::string_view name);

/// Process default strategy. First use reads EFFSTACK_STRATEGY; an unset
/// variable selects fixed, an invalid value throws.
StackStrategy& default_strategy();
void set_default_strategy(StackStrategy& strategy);

/// Debug poison: fill fresh fixed/segmented frames with 0x13. Off unless
/// EFFSTACK_POISON=1 or enabled here.
bool poison_frames_enabled();
void set_poison_frames(bool enabled);

} // namespace effstack
