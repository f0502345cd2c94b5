#include <cstdio>
#include <cstdlib>
#include <exception>

#include "effstack/ad.hpp"
#include "effstack/effects.hpp"

// Standalone two-layer AD demo: prints the derivative of
// 1 + sum_{i=1..iters} (1-x)^i at x = 0.5 with six decimal places.
// EFFSTACK_STRATEGY selects the stack strategy.
int main(int argc, char** argv) {
    std::size_t iters = 100;
    if (argc == 2)
        iters = static_cast<std::size_t>(std::strtoull(argv[1], nullptr, 10));

    try {
        effstack::ad::AdResult result = effstack::ad::run_ad(iters);
        std::printf("%lf\n", result.derivative);
    } catch (const std::exception& error) {
        std::fprintf(stderr, "error: %s\n", error.what());
        return 1;
    }
    return 0;
}
