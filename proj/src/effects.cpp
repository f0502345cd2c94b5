#include "effstack/effects.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

namespace effstack {

namespace {

thread_local Coroutine* tl_current = nullptr;

constexpr EffectId kPoisonEffect = 0xDEADDEADDEADDEADull;
constexpr Word kPoisonWord = 0xDEADDEADDEADDEADull;

// A coroutine needs at least this much initial stack to bootstrap and run
// the suspension machinery.
constexpr std::size_t kMinBootstrapBytes = 1024;

const char* state_name(CoroutineState s) {
    switch (s) {
    case CoroutineState::Suspended: return "SUSPENDED";
    case CoroutineState::Running: return "RUNNING";
    case CoroutineState::Finished: return "FINISHED";
    }
    return "?";
}

[[noreturn]] void default_unhandled_effect(EffectId effect, const char* name) {
    std::fprintf(stderr, "effstack: unhandled effect %" PRIu64 " (%s); coroutine chain:\n", effect,
                 name ? name : "unregistered");
    for (Coroutine* k = tl_current; k; k = k->parent())
        std::fprintf(stderr, "  coroutine %p state=%s handles=%#" PRIx64 "\n",
                     static_cast<void*>(k), state_name(k->state()), k->handled_effects());
    std::fprintf(stderr, "  <root>\n");
    std::abort();
}

UnhandledEffectHandler g_unhandled = &default_unhandled_effect;

std::mutex g_effect_names_mutex;
const char* g_effect_names[64] = {};

[[noreturn]] void coroutine_return_trampoline(void* result) {
    Coroutine* self = tl_current;
    exit_with_request(*self, Request{kReturnEffect, reinterpret_cast<Word>(result)});
}

bool target_on_current_chain(Coroutine* current, Coroutine& target) {
    for (Coroutine* p = current; p; p = p->parent())
        if (p == &target)
            return true;
    return false;
}

} // namespace

Coroutine* current_coroutine() {
    return tl_current;
}

Coroutine::Coroutine(StackStrategy& strategy, StackFrame frame, Entry entry, void* argument)
    : strategy_(&strategy), frame_(frame) {
    leaf_ = this;
    ctx_ = context_bootstrap(entry, argument, frame_.initial_sp, &coroutine_return_trampoline);
}

std::unique_ptr<Coroutine> Coroutine::create_with(StackStrategy& strategy, Entry entry,
                                                  void* argument, std::size_t frame_size) {
    StackFrame frame = strategy.init_stack_frame(frame_size);
    if (frame.usable < kMinBootstrapBytes) {
        strategy.release_stack_frame(frame);
        throw ContractViolation("coroutine: frame too small for bootstrap");
    }
    return std::unique_ptr<Coroutine>(new Coroutine(strategy, frame, entry, argument));
}

std::unique_ptr<Coroutine> Coroutine::create_sized(Entry entry, void* argument,
                                                   std::size_t frame_size) {
    return create_with(default_strategy(), entry, argument, frame_size);
}

std::unique_ptr<Coroutine> Coroutine::create(Entry entry, void* argument) {
    StackStrategy& strategy = default_strategy();
    return create_with(strategy, entry, argument, strategy.default_frame_size());
}

Coroutine::~Coroutine() {
    if (state_ == CoroutineState::Running) {
        std::fprintf(stderr, "effstack: deleting a RUNNING coroutine %p\n", static_cast<void*>(this));
        std::abort();
    }
    strategy_->release_stack_frame(frame_);
}

Request resume(Coroutine& k, Word reply, EffectSet handled) {
    if (k.state_ == CoroutineState::Finished)
        throw ContractViolation("resume: coroutine is FINISHED");
    if (k.state_ == CoroutineState::Running)
        throw ContractViolation("resume: coroutine is already RUNNING");
    if (!k.resumable_)
        throw ContractViolation(
            "resume: coroutine was suspended through a deeper target; resume the coroutine the "
            "request was received from");

    k.parent_ = tl_current;
    k.handled_ = handled;
    for (Coroutine* p = k.leaf_;; p = p->parent_) {
        p->state_ = CoroutineState::Running;
        if (p == &k)
            break;
    }
    tl_current = k.leaf_;
    k.pending_ = Request{kPoisonEffect, kPoisonWord};

    context_switch(k.ctx_, k.ctx_, reply);

    return k.pending_;
}

Word suspend_with_request(Coroutine& target, Request request) {
    Coroutine* current = tl_current;
    if (!current)
        throw ContractViolation("yield: not inside a coroutine");
    if (!target_on_current_chain(current, target))
        throw ContractViolation("yield: target is neither the current coroutine nor an ancestor");

    for (Coroutine* p = current;; p = p->parent_) {
        p->state_ = CoroutineState::Suspended;
        p->resumable_ = (p == &target);
        if (p == &target)
            break;
    }
    target.leaf_ = current;
    target.pending_ = request;
    tl_current = target.parent_;

    return context_switch(target.ctx_, target.ctx_, 0);
}

Word yield(Coroutine& target, EffectId effect, Word payload) {
    return suspend_with_request(target, Request{effect, payload});
}

void exit_with_request(Coroutine& target, Request request) {
    Coroutine* current = tl_current;
    if (!current)
        throw ContractViolation("exit: not inside a coroutine");
    if (!target_on_current_chain(current, target))
        throw ContractViolation("exit: target is neither the current coroutine nor an ancestor");

    for (Coroutine* p = current;; p = p->parent_) {
        p->state_ = CoroutineState::Finished;
        p->resumable_ = false;
        if (p == &target)
            break;
    }
    target.pending_ = request;
    tl_current = target.parent_;

    context_restore(target.ctx_, 0);
}

void exit_to(Coroutine& target, Word payload) {
    exit_with_request(target, Request{kReturnEffect, payload});
}

Coroutine* locate_handler(EffectId effect) {
    if (effect > 63)
        return nullptr;
    for (Coroutine* p = tl_current; p; p = p->parent_)
        if ((p->handled_ >> effect) & 1)
            return p;
    return nullptr;
}

Word perform_raw(EffectId effect, Word payload_address) {
    if (!tl_current)
        throw ContractViolation("perform: not inside a coroutine");
    if (effect > 63)
        throw ContractViolation("perform: effect id out of range [0, 63]");
    Coroutine* handler = locate_handler(effect);
    if (!handler)
        g_unhandled(effect, effect_name(effect));
    return suspend_with_request(*handler, Request{effect, payload_address});
}

void throw_raw(EffectId effect, Word payload_address) {
    if (!tl_current)
        throw ContractViolation("throw: not inside a coroutine");
    if (effect > 63)
        throw ContractViolation("throw: effect id out of range [0, 63]");
    Coroutine* handler = locate_handler(effect);
    if (!handler)
        g_unhandled(effect, effect_name(effect));
    exit_with_request(*handler, Request{effect, payload_address});
}

UnhandledEffectHandler set_unhandled_effect_handler(UnhandledEffectHandler handler) {
    UnhandledEffectHandler previous = g_unhandled;
    g_unhandled = handler ? handler : &default_unhandled_effect;
    return previous;
}

const char* effect_name(EffectId id) {
    if (id > 63)
        return nullptr;
    std::lock_guard<std::mutex> lock(g_effect_names_mutex);
    return g_effect_names[id];
}

namespace detail {

bool register_effect(EffectId id, const char* name) {
    if (id > 63)
        throw ContractViolation("effect declaration: id out of range [0, 63]");
    std::lock_guard<std::mutex> lock(g_effect_names_mutex);
    const char* existing = g_effect_names[id];
    if (existing && std::strcmp(existing, name) != 0)
        throw ContractViolation(std::string("effect declaration: id already in use by '") +
                                existing + "'");
    g_effect_names[id] = name;
    return true;
}

} // namespace detail

void debug_reset_effect_registry() {
    std::lock_guard<std::mutex> lock(g_effect_names_mutex);
    for (auto& name : g_effect_names)
        name = nullptr;
}

} // namespace effstack
