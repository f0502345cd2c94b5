#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#if !defined(__x86_64__)
#error "effstack currently supports x86-64 System V only"
#endif

namespace effstack {

using Word = std::uintptr_t;

/// Thrown on API misuse (state-machine violations, stale contexts, bad
/// arguments). These checks are enabled in all build types.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Callee-saved slot order inside ResumeContext::callee_saved.
// The switch primitives in ctx_x86_64.S rely on this exact layout.
enum CalleeSlot { kSlotRbp = 0, kSlotRbx, kSlotR12, kSlotR13, kSlotR14, kSlotR15 };
inline constexpr int kCalleeSavedCount = 6;

/// Saved machine state of a suspended execution: resume address, stack
/// pointer, the System V callee-saved registers and the floating-point
/// control words (mxcsr + x87 cw). Signal masks are deliberately not
/// saved or restored across switches (they cost a syscall per switch).
///
/// A context is one-shot: switching to it consumes it, and the switch
/// that saved the current execution arms the save slot again. Switching
/// to a consumed (stale) context throws ContractViolation.
struct ResumeContext {
    void* ip = nullptr;
    void* sp = nullptr;
    Word callee_saved[kCalleeSavedCount] = {};
    std::uint32_t mxcsr = 0;
    std::uint16_t fpcw = 0;
    bool live = false;
};

static_assert(offsetof(ResumeContext, ip) == 0);
static_assert(offsetof(ResumeContext, sp) == 8);
static_assert(offsetof(ResumeContext, callee_saved) == 16);
static_assert(offsetof(ResumeContext, mxcsr) == 64);
static_assert(offsetof(ResumeContext, fpcw) == 68);

extern "C" {
// Raw primitives (ctx_x86_64.S). save and restore may alias: the restore
// side is fully read before the save side is written.
Word effstack_context_switch_raw(ResumeContext* save, const ResumeContext* restore, Word payload);
[[noreturn]] void effstack_context_restore_raw(const ResumeContext* restore, Word payload);
// Runs fn(arg) with the stack pointer switched to `sp` (16-byte aligned),
// then switches back. fn must not throw or switch away.
Word effstack_call_on_stack(void* sp, Word (*fn)(Word), Word arg);
}

using ContextEntry = void* (*)(void*);
using ContextReturnHandler = void (*)(void*); // must not return

/// Builds a context that, when first switched to, runs entry(argument) on
/// the stack topped by initial_sp. If entry returns, on_return(result) is
/// invoked on the same stack; it must not return. Nothing is written to
/// the new stack here: the first touch happens on first switch.
///
/// initial_sp must be 16-byte aligned and top a writable region of at
/// least 1 KiB.
ResumeContext context_bootstrap(ContextEntry entry, void* argument, void* initial_sp,
                                ContextReturnHandler on_return);

/// Saves the current execution into save_into and resumes restore_from.
/// Returns the payload passed by whichever switch later restores
/// save_into. Undefined if restore_from was already consumed (detected
/// and reported via ContractViolation).
Word context_switch(ResumeContext& save_into, ResumeContext& restore_from, Word payload);

/// One-way variant: resumes restore_from without saving the current
/// execution. Used by the coroutine exit protocol.
[[noreturn]] void context_restore(ResumeContext& restore_from, Word payload);

} // namespace effstack
