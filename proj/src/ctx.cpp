#include "effstack/ctx.hpp"

namespace effstack {

extern "C" void effstack_context_entry();

namespace {

std::uint32_t read_mxcsr() {
    std::uint32_t v;
    asm volatile("stmxcsr %0" : "=m"(v));
    return v;
}

std::uint16_t read_fpcw() {
    std::uint16_t v;
    asm volatile("fnstcw %0" : "=m"(v));
    return v;
}

} // namespace

ResumeContext context_bootstrap(ContextEntry entry, void* argument, void* initial_sp,
                                ContextReturnHandler on_return) {
    if ((reinterpret_cast<Word>(initial_sp) & 0xF) != 0)
        throw ContractViolation("context_bootstrap: initial_sp is not 16-byte aligned");
    if (entry == nullptr || on_return == nullptr)
        throw ContractViolation("context_bootstrap: null entry or return handler");

    ResumeContext ctx;
    ctx.ip = reinterpret_cast<void*>(&effstack_context_entry);
    ctx.sp = initial_sp;
    // The entry shim picks these up from the restored callee-saved set,
    // so bootstrap itself never touches the new stack.
    ctx.callee_saved[kSlotRbx] = reinterpret_cast<Word>(on_return);
    ctx.callee_saved[kSlotR12] = reinterpret_cast<Word>(entry);
    ctx.callee_saved[kSlotR13] = reinterpret_cast<Word>(argument);
    ctx.mxcsr = read_mxcsr();
    ctx.fpcw = read_fpcw();
    ctx.live = true;
    return ctx;
}

Word context_switch(ResumeContext& save_into, ResumeContext& restore_from, Word payload) {
    if (!restore_from.live)
        throw ContractViolation("context_switch: target context already consumed");
    restore_from.live = false;
    save_into.live = true;
    return effstack_context_switch_raw(&save_into, &restore_from, payload);
}

void context_restore(ResumeContext& restore_from, Word payload) {
    if (!restore_from.live)
        throw ContractViolation("context_restore: target context already consumed");
    restore_from.live = false;
    effstack_context_restore_raw(&restore_from, payload);
}

} // namespace effstack
