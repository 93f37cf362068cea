#include "driftguard/parallel.hpp"

#include <atomic>
#include <thread>

#include "driftguard/error.hpp"

namespace driftguard {

namespace {
std::atomic<int> g_threads{0};
}

int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

void set_num_threads(int threads) {
    if (threads < 1) {
        throw InvalidArgument("thread count must be >= 1, got " + std::to_string(threads));
    }
    g_threads.store(threads);
}

int num_threads() {
    const int n = g_threads.load();
    return n > 0 ? n : hardware_threads();
}

}  // namespace driftguard
