#pragma once

#include <cstddef>
#include <cstdint>

namespace effstack::ad {

/// Value paired with the address of its derivative accumulator. Adjoints
/// live on the reverse handler's recursion frames and start at zero.
struct Prop {
    double v;
    double* dv;
};

enum class UnaryOp : std::uint8_t { Negate };
enum class BinaryOp : std::uint8_t { Add, Multiply };

struct AdResult {
    double value;      // forward result: 1 + sum_{i=1..iters} (1-x)^i
    double derivative; // d value / d x
    std::uint64_t forward_ops;
    std::uint64_t reverse_ops;
};

/// Runs the two-layer effect program: an inner coroutine builds the
/// iterative product with reverse-mode ops, the middle handler recursion
/// evaluates primals through the forward layer and applies the chain rule
/// on unwind, and the outer loop computes forward arithmetic. Coroutines
/// come from the process default stack strategy.
AdResult run_ad(std::size_t iters, double x = 0.5);

} // namespace effstack::ad
