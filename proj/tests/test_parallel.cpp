#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "lcroll/parallel.hpp"

using namespace lcroll;

TEST_SUITE_BEGIN("parallel");

TEST_CASE("parallel_for visits every index exactly once") {
    const std::size_t n = 1000;
    std::vector<std::atomic<int>> hits(n);
    for (auto& h : hits) h.store(0);
    parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
}

TEST_CASE("parallel_for handles the empty and tiny ranges") {
    parallel_for(0, [](std::size_t) { FAIL("must not be called"); });
    std::atomic<int> calls{0};
    parallel_for(1, [&](std::size_t i) {
        CHECK(i == 0);
        calls.fetch_add(1);
    });
    CHECK(calls.load() == 1);
}

TEST_CASE("parallel_for rethrows a worker exception on the caller") {
    CHECK_THROWS_WITH_AS(
        parallel_for(64,
                     [](std::size_t i) {
                         if (i == 13) throw std::runtime_error("boom 13");
                     }),
        "boom 13", std::runtime_error);
}

TEST_CASE("LCROLL_THREADS caps the worker count") {
    ::setenv("LCROLL_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    ::setenv("LCROLL_THREADS", "0", 1);
    CHECK(worker_count() == 1);  // clamped up to one worker
    ::unsetenv("LCROLL_THREADS");
    CHECK(worker_count() >= 1);
}

TEST_CASE("results do not depend on the worker count") {
    std::vector<double> serial(500), wide(500);
    ::setenv("LCROLL_THREADS", "1", 1);
    parallel_for(500, [&](std::size_t i) { serial[i] = 1.0 / (1.0 + double(i)); });
    ::setenv("LCROLL_THREADS", "8", 1);
    parallel_for(500, [&](std::size_t i) { wide[i] = 1.0 / (1.0 + double(i)); });
    ::unsetenv("LCROLL_THREADS");
    CHECK(serial == wide);
}

TEST_SUITE_END();
