#pragma once

#include <cstdint>
#include <memory>
#include <type_traits>
#include <utility>

#include "effstack/ctx.hpp"
#include "effstack/stacks.hpp"

namespace effstack {

enum class CoroutineState { Suspended, Running, Finished };

using EffectId = std::uint64_t;
using EffectSet = std::uint64_t;

/// Reserved tag carried by return requests; deliberately outside [0, 63].
inline constexpr EffectId kReturnEffect = ~EffectId{0};
inline constexpr EffectSet kHandlesAll = ~EffectSet{0};

constexpr EffectSet handles(EffectId id) {
    return EffectSet{1} << id;
}

/// What a resume call gets back: an effect tag plus one word of payload.
/// For effects the payload is the address of the arguments on the
/// performer's stack, valid only until that coroutine is next resumed or
/// deleted. For returns it is the returned value itself.
struct Request {
    EffectId effect;
    Word payload;

    bool is_return() const { return effect == kReturnEffect; }
};
static_assert(sizeof(Request) == 2 * sizeof(Word), "requests must stay register-passable");

namespace detail {
template <typename T>
Word to_word_impl(T value) {
    static_assert(sizeof(T) <= sizeof(Word) && std::is_trivially_copyable_v<T>);
    if constexpr (std::is_pointer_v<T>)
        return reinterpret_cast<Word>(value);
    else
        return static_cast<Word>(value);
}
template <typename T>
T from_word(Word word) {
    static_assert(sizeof(T) <= sizeof(Word) && std::is_trivially_copyable_v<T>);
    if constexpr (std::is_pointer_v<T>)
        return reinterpret_cast<T>(word);
    else
        return static_cast<T>(word);
}
bool register_effect(EffectId id, const char* name);
} // namespace detail

template <typename T>
Word to_word(T value) {
    return detail::to_word_impl(value);
}

class Coroutine;

/// Resumes k (which must be suspended and the head of its suspension),
/// declaring the effects the caller handles for this activation. reply is
/// delivered as the value of the perform/yield that suspended k. Returns
/// the request that next suspends or finishes k.
Request resume(Coroutine& k, Word reply, EffectSet handled);

/// Raw suspension with a pre-built request (yield/perform plumbing).
Word suspend_with_request(Coroutine& target, Request request);

/// Raw finish with a pre-built request (exit/throw plumbing).
[[noreturn]] void exit_with_request(Coroutine& target, Request request);

/// Nearest coroutine on the current chain (innermost first) whose resumer
/// declared it handles `effect`; nullptr when nothing on the chain does.
Coroutine* locate_handler(EffectId effect);

/// A suspendable computation owning its own stack. One-shot and mutable:
/// resuming runs it until the next perform/yield/exit/return. Single
/// owner; may move between threads only while suspended.
class Coroutine {
public:
    using Entry = void* (*)(void*);

    /// New suspended coroutine on a frame of the default strategy's
    /// default size.
    static std::unique_ptr<Coroutine> create(Entry entry, void* argument);
    static std::unique_ptr<Coroutine> create_sized(Entry entry, void* argument,
                                                   std::size_t frame_size);
    static std::unique_ptr<Coroutine> create_with(StackStrategy& strategy, Entry entry,
                                                  void* argument, std::size_t frame_size);

    ~Coroutine();
    Coroutine(const Coroutine&) = delete;
    Coroutine& operator=(const Coroutine&) = delete;

    CoroutineState state() const { return state_; }
    Coroutine* parent() const { return parent_; }
    /// Effect set declared by this coroutine's resumer at the most recent
    /// resume.
    EffectSet handled_effects() const { return handled_; }
    StackStrategy& strategy() const { return *strategy_; }
    const StackFrame& frame() const { return frame_; }
    std::size_t committed_bytes() const { return strategy_->committed_bytes(frame_); }

    /// Mutable frame access for the explicit stack-growth check.
    StackFrame& frame_for_growth() { return frame_; }

    /// Saved stack pointer while suspended (introspection for tests).
    void* saved_stack_pointer() const { return ctx_.sp; }

private:
    Coroutine(StackStrategy& strategy, StackFrame frame, Entry entry, void* argument);

    ResumeContext ctx_;
    Coroutine* parent_ = nullptr;
    Coroutine* leaf_ = nullptr; // innermost coroutine of the chain suspended through this one
    CoroutineState state_ = CoroutineState::Suspended;
    EffectSet handled_ = 0;
    Request pending_{kReturnEffect, 0};
    bool resumable_ = true;
    StackStrategy* strategy_;
    StackFrame frame_;

    friend Request resume(Coroutine&, Word, EffectSet);
    friend Word suspend_with_request(Coroutine&, Request);
    friend void exit_with_request(Coroutine&, Request);
    friend Coroutine* locate_handler(EffectId);
};

/// Innermost coroutine running on this thread, or nullptr at the root.
Coroutine* current_coroutine();

/// resume with the full effect mask.
inline Request resume_handling_all(Coroutine& k, Word reply = 0) {
    return resume(k, reply, kHandlesAll);
}

/// Suspends every coroutine from the current one down to target (which
/// must be the current coroutine or an ancestor) and returns control to
/// target's resumer with Request{effect, payload}. Returns the reply word
/// of the resume that reactivates the chain. Transfer is direct: requests
/// are not re-delivered through intermediate handlers.
Word yield(Coroutine& target, EffectId effect, Word payload);

/// Finishes every coroutine from the current one down to target and
/// delivers Request{RETURN, payload} to target's resumer. No context is
/// saved; the finished coroutines cannot be resumed.
[[noreturn]] void exit_to(Coroutine& target, Word payload);

/// Performs an effect whose argument block lives at payload_address on
/// the current stack; suspends to the located handler and returns its
/// reply. Falls through to the unhandled-effect hook when no handler is
/// found.
Word perform_raw(EffectId effect, Word payload_address);

/// Like perform_raw but finishes the chain up to the handler; the handler
/// receives the request and cannot resume past it.
[[noreturn]] void throw_raw(EffectId effect, Word payload_address);

/// Hook invoked when perform/throw finds no handler. Must not return.
/// The default prints the effect and the coroutine chain, then aborts.
using UnhandledEffectHandler = void (*)(EffectId effect, const char* name);
UnhandledEffectHandler set_unhandled_effect_handler(UnhandledEffectHandler handler);

/// Registered name of an effect id, or nullptr.
const char* effect_name(EffectId id);

/// Test hook: forgets all registered effect ids (the duplicate-id check
/// is per process run; test binaries host several independent programs).
void debug_reset_effect_registry();

// --- typed effect layer ---------------------------------------------------
//
// An effect declaration is a plain struct:
//
//   struct ReadFile {
//       static constexpr EffectId id = 0;
//       static constexpr const char* name = "read_file";
//       struct Payload { const char* filename; };
//       using Reply = const char*;
//   };
//
// perform<ReadFile>({"example.txt"}) materializes the payload on the
// performer's stack and returns the handler's reply.

template <typename E>
typename E::Reply perform(typename E::Payload payload) {
    static const bool registered = detail::register_effect(E::id, E::name);
    (void)registered;
    Word reply = perform_raw(E::id, reinterpret_cast<Word>(&payload));
    if constexpr (std::is_void_v<typename E::Reply>)
        (void)reply;
    else
        return detail::from_word<typename E::Reply>(reply);
}

template <typename E>
[[noreturn]] void throw_effect(typename E::Payload payload) {
    static const bool registered = detail::register_effect(E::id, E::name);
    (void)registered;
    throw_raw(E::id, reinterpret_cast<Word>(&payload));
}

/// View of a request's payload as E's payload struct. Points into the
/// performer's stack: copy it out before resuming if it must survive.
template <typename E>
typename E::Payload& payload_of(const Request& request) {
    return *reinterpret_cast<typename E::Payload*>(request.payload);
}

/// Value carried by a return request.
template <typename T>
T return_value(const Request& request) {
    return detail::from_word<T>(request.payload);
}

// --- explicit stack-growth check -------------------------------------------

namespace detail {
inline void* current_stack_pointer() {
    void* sp;
    asm volatile("movq %%rsp, %0" : "=r"(sp));
    return sp;
}
inline constexpr std::size_t kGrowthSlack = 256;

template <typename Call>
Word growth_thunk(Word arg) {
    return (*reinterpret_cast<Call*>(arg))();
}
} // namespace detail

/// Guarantees at least `needed` bytes of stack below the point where f
/// runs. Under the segmented strategy this is the explicit stand-in for
/// compiler-inserted prologue checks: it grows onto (and afterwards
/// releases) a linked segment when the current one is too small. Under
/// every other strategy, and outside coroutines, it calls f directly.
/// f must not throw across the segment boundary. Performing effects
/// inside f is fine: all segments of a suspended coroutine stay valid.
template <typename F>
auto with_stack_room(std::size_t needed, F&& f) -> decltype(f()) {
    using Result = decltype(f());
    Coroutine* current = current_coroutine();
    if (!current || &current->strategy() != &segmented_stack())
        return f();

    StackFrame& frame = current->frame_for_growth();
    void* sp = detail::current_stack_pointer();
    if (SegmentedStack::has_room(frame, sp, needed + detail::kGrowthSlack))
        return f();

    auto growth =
        segmented_stack().allocate_growth_frame(frame, needed + detail::kGrowthSlack, sp, 0);
    if constexpr (std::is_void_v<Result>) {
        auto call = [&f]() -> Word {
            f();
            return 0;
        };
        effstack_call_on_stack(growth.sp, &detail::growth_thunk<decltype(call)>,
                               reinterpret_cast<Word>(&call));
        segmented_stack().release_growth_frame(frame);
    } else {
        Result result{};
        auto call = [&f, &result]() -> Word {
            result = f();
            return 0;
        };
        effstack_call_on_stack(growth.sp, &detail::growth_thunk<decltype(call)>,
                               reinterpret_cast<Word>(&call));
        segmented_stack().release_growth_frame(frame);
        return result;
    }
}

} // namespace effstack
