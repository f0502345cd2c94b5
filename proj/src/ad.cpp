#include "effstack/ad.hpp"

#include "effstack/effects.hpp"

namespace effstack::ad {

namespace {

// Forward layer: plain double arithmetic served by the outermost handler.
struct ForwardConst {
    static constexpr EffectId id = 0;
    static constexpr const char* name = "e_ap0";
    struct Payload {
        double value;
    };
    using Reply = double*;
};
struct ForwardUnary {
    static constexpr EffectId id = 1;
    static constexpr const char* name = "e_ap1";
    struct Payload {
        UnaryOp op;
        double arg1;
    };
    using Reply = double*;
};
struct ForwardBinary {
    static constexpr EffectId id = 2;
    static constexpr const char* name = "e_ap2";
    struct Payload {
        BinaryOp op;
        double arg1;
        double arg2;
    };
    using Reply = double*;
};

// Reverse layer: Prop-valued ops served by the recursive handler that
// owns the adjoints.
struct ReverseConst {
    static constexpr EffectId id = 3;
    static constexpr const char* name = "r_ap0";
    struct Payload {
        double value;
    };
    using Reply = Prop*;
};
struct ReverseUnary {
    static constexpr EffectId id = 4;
    static constexpr const char* name = "r_ap1";
    struct Payload {
        UnaryOp op;
        Prop arg1;
    };
    using Reply = Prop*;
};
struct ReverseBinary {
    static constexpr EffectId id = 5;
    static constexpr const char* name = "r_ap2";
    struct Payload {
        BinaryOp op;
        Prop arg1;
        Prop arg2;
    };
    using Reply = Prop*;
};

constexpr EffectSet kForwardSet =
    handles(ForwardConst::id) | handles(ForwardUnary::id) | handles(ForwardBinary::id);
constexpr EffectSet kReverseSet =
    handles(ReverseConst::id) | handles(ReverseUnary::id) | handles(ReverseBinary::id);

double e_const(double x) { return *perform<ForwardConst>({x}); }
double e_neg(double x) { return *perform<ForwardUnary>({UnaryOp::Negate, x}); }
double e_add(double x, double y) { return *perform<ForwardBinary>({BinaryOp::Add, x, y}); }
double e_mul(double x, double y) { return *perform<ForwardBinary>({BinaryOp::Multiply, x, y}); }

Prop r_const(double x) { return *perform<ReverseConst>({x}); }
Prop r_neg(Prop x) { return *perform<ReverseUnary>({UnaryOp::Negate, x}); }
Prop r_add(Prop x, Prop y) { return *perform<ReverseBinary>({BinaryOp::Add, x, y}); }
Prop r_mul(Prop x, Prop y) { return *perform<ReverseBinary>({BinaryOp::Multiply, x, y}); }

// Run-scoped shared state (the original program kept x and result in
// process globals; keeping them per-run makes repeated runs independent).
struct AdRun {
    std::size_t iters;
    double x_value;
    double x_adjoint = 0.0;
    Prop x{};
    Prop result{};
    std::uint64_t forward_ops = 0;
    std::uint64_t reverse_ops = 0;
};

// Stack budget per reverse-handler recursion level; the explicit growth
// check uses it under the segmented strategy.
constexpr std::size_t kHandleFrameBudget = 2048;

void* example_entry(void* arg) {
    auto* run = static_cast<AdRun*>(arg);
    // One growth check covers the whole body: the loop's wrapper nest is
    // the deepest this coroutine's stack gets.
    with_stack_room(4096, [run] {
        run->x_adjoint = 0.0;
        run->x = Prop{run->x_value, &run->x_adjoint};

        Prop acc = r_const(1.0);
        Prop prev = r_const(1.0);
        for (std::size_t i = 0; i < run->iters; ++i) {
            prev = r_mul(prev, r_neg(r_add(run->x, r_const(-1.0))));
            acc = r_add(acc, prev);
        }
        run->result = acc;
    });
    return nullptr;
}

// Recursive reverse handler: computes the primal through the forward
// layer, parks a fresh adjoint on this frame, recurses until the program
// finishes, then applies the chain rule on unwind. Recursion depth equals
// the number of reverse ops performed, which is what makes this the
// rapid-stack-growth workload.
void handle(AdRun& run, Coroutine& k, Prop* response) {
    Request request = resume(k, to_word(response), kReverseSet);
    if (k.state() == CoroutineState::Finished) {
        *run.result.dv = 1.0;
        return;
    }
    run.reverse_ops += 1;

    switch (request.effect) {
    case ReverseConst::id: {
        auto payload = payload_of<ReverseConst>(request);
        double v = e_const(payload.value);
        double dv = 0.0;
        Prop r{v, &dv};
        with_stack_room(kHandleFrameBudget, [&] { handle(run, k, &r); });
        break;
    }
    case ReverseUnary::id: {
        auto payload = payload_of<ReverseUnary>(request);
        double v = 0.0;
        switch (payload.op) {
        case UnaryOp::Negate:
            v = e_neg(payload.arg1.v);
            break;
        }
        double dv = 0.0;
        Prop r{v, &dv};
        with_stack_room(kHandleFrameBudget, [&] { handle(run, k, &r); });

        double* dx = payload.arg1.dv;
        switch (payload.op) {
        case UnaryOp::Negate:
            *dx = e_add(*dx, e_neg(dv));
            break;
        }
        break;
    }
    case ReverseBinary::id: {
        auto payload = payload_of<ReverseBinary>(request);
        double v = 0.0;
        switch (payload.op) {
        case BinaryOp::Add:
            v = e_add(payload.arg1.v, payload.arg2.v);
            break;
        case BinaryOp::Multiply:
            v = e_mul(payload.arg1.v, payload.arg2.v);
            break;
        }
        double dv = 0.0;
        Prop r{v, &dv};
        with_stack_room(kHandleFrameBudget, [&] { handle(run, k, &r); });

        double x = payload.arg1.v;
        double y = payload.arg2.v;
        double* dx = payload.arg1.dv;
        double* dy = payload.arg2.dv;
        switch (payload.op) {
        case BinaryOp::Add:
            *dx = e_add(*dx, dv);
            *dy = e_add(*dy, dv);
            break;
        case BinaryOp::Multiply:
            *dx = e_add(*dx, e_mul(y, dv));
            *dy = e_add(*dy, e_mul(x, dv));
            break;
        }
        break;
    }
    }
}

void* reverse_entry(void* arg) {
    auto* run = static_cast<AdRun*>(arg);
    with_stack_room(4096, [run] {
        auto child = Coroutine::create(example_entry, run);
        handle(*run, *child, nullptr);
    });
    return nullptr;
}

// Outermost handler: numeric evaluation of the forward layer, driven from
// the host stack.
void evaluate(AdRun& run, Coroutine& k) {
    double value = 0.0;
    Request request = resume(k, 0, kForwardSet);
    while (true) {
        if (request.is_return())
            return;
        switch (request.effect) {
        case ForwardConst::id: {
            run.forward_ops += 1;
            value = payload_of<ForwardConst>(request).value;
            break;
        }
        case ForwardUnary::id: {
            run.forward_ops += 1;
            auto& payload = payload_of<ForwardUnary>(request);
            switch (payload.op) {
            case UnaryOp::Negate:
                value = -payload.arg1;
                break;
            }
            break;
        }
        case ForwardBinary::id: {
            run.forward_ops += 1;
            auto& payload = payload_of<ForwardBinary>(request);
            switch (payload.op) {
            case BinaryOp::Add:
                value = payload.arg1 + payload.arg2;
                break;
            case BinaryOp::Multiply:
                value = payload.arg1 * payload.arg2;
                break;
            }
            break;
        }
        }
        request = resume(k, to_word(&value), kForwardSet);
    }
}

} // namespace

AdResult run_ad(std::size_t iters, double x) {
    AdRun run{iters, x};

    auto k = Coroutine::create(reverse_entry, &run);
    evaluate(run, *k);

    return AdResult{run.result.v, run.x_adjoint, run.forward_ops, run.reverse_ops};
}

} // namespace effstack::ad
