#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace formctrl {

/// Worker count: hardware concurrency, capped by FORMCTRL_THREADS when set.
inline int thread_budget() {
    int budget = static_cast<int>(std::thread::hardware_concurrency());
    if (budget < 1) budget = 1;
    if (const char* env = std::getenv("FORMCTRL_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < budget) budget = cap;
    }
    return budget;
}

/// Index-parallel loop. Each index must write only its own slot so results do
/// not depend on the thread count.
template <class F>
void parallel_for(int count, F&& body) {
    const int workers = std::min(thread_budget(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (std::thread& t : pool) t.join();
}

}  // namespace formctrl
