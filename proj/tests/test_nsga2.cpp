#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "moecov/nsga2.hpp"
#include "support/oracles.hpp"

using moecov::ObjectiveVector;
using moecov::kInfinity;

TEST_CASE("pareto dominance for minimization") {
    CHECK(moecov::dominates({1, 2}, {2, 3}));
    CHECK(moecov::dominates({1, 2}, {1, 3}));
    CHECK_FALSE(moecov::dominates({1, 2}, {1, 2}));  // equal points never dominate
    CHECK_FALSE(moecov::dominates({1, 3}, {2, 2}));  // trade-off
    CHECK_FALSE(moecov::dominates({2, 3}, {1, 2}));
    CHECK(moecov::dominates({1, 2, 3}, {1, 2, 4}));
    CHECK_THROWS_AS(moecov::dominates({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("non-dominated sorting on a hand-built population") {
    std::vector<ObjectiveVector> pts{
        {1, 5},  // 0: front 0
        {2, 2},  // 1: front 0
        {5, 1},  // 2: front 0
        {2, 6},  // 3: dominated by 0
        {3, 3},  // 4: dominated by 1
        {6, 6},  // 5: dominated by everything above
    };
    auto fronts = moecov::fast_nondominated_sort(pts);
    REQUIRE(fronts.size() == 3);
    CHECK(fronts[0] == std::vector<std::size_t>{0, 1, 2});
    CHECK(fronts[1] == std::vector<std::size_t>{3, 4});
    CHECK(fronts[2] == std::vector<std::size_t>{5});
}

TEST_CASE("duplicate points share a front") {
    std::vector<ObjectiveVector> pts{{1, 1}, {1, 1}, {2, 2}};
    auto fronts = moecov::fast_nondominated_sort(pts);
    REQUIRE(fronts.size() == 2);
    CHECK(fronts[0] == std::vector<std::size_t>{0, 1});
    CHECK(fronts[1] == std::vector<std::size_t>{2});
}

TEST_CASE("sorting matches the brute-force oracle on random populations") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grid(0, 4);

    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng() % 40;
        std::size_t m = 2 + rng() % 2;
        bool quantized = trial % 2 == 0;  // force ties half the time
        std::vector<ObjectiveVector> pts(n, ObjectiveVector(m));
        for (auto& p : pts)
            for (auto& v : p) v = quantized ? static_cast<double>(grid(rng)) : u(rng);

        auto got = moecov::fast_nondominated_sort(pts);
        auto want = oracle::pareto_fronts(pts);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == want[k]);
    }
}

TEST_CASE("crowding distance on a staircase front") {
    std::vector<ObjectiveVector> front{{0, 4}, {1, 3}, {2, 2}, {3, 1}, {4, 0}};
    auto d = moecov::crowding_distance(front);
    REQUIRE(d.size() == 5);
    CHECK(d[0] == kInfinity);
    CHECK(d[4] == kInfinity);
    // symmetric neighbours: (2/4 + 2/4) per interior point
    CHECK(d[1] == Catch::Approx(1.0));
    CHECK(d[2] == Catch::Approx(1.0));
    CHECK(d[3] == Catch::Approx(1.0));
}

TEST_CASE("crowding distance rewards isolation") {
    std::vector<ObjectiveVector> front{{0, 10}, {1, 9}, {1.5, 8.5}, {9, 1}, {10, 0}};
    auto d = moecov::crowding_distance(front);
    // index 3 sits next to a large gap on both objectives
    CHECK(d[3] > d[1]);
    CHECK(d[3] > d[2]);
    // frozen sums of normalized neighbour gaps
    CHECK(d[1] == Catch::Approx(0.30));
    CHECK(d[2] == Catch::Approx(1.60));
    CHECK(d[3] == Catch::Approx(1.70));
}

TEST_CASE("tiny fronts are all boundary") {
    CHECK(moecov::crowding_distance({}).empty());
    CHECK(moecov::crowding_distance({{1, 2}}) == std::vector<double>{kInfinity});
    CHECK(moecov::crowding_distance({{1, 2}, {3, 4}}) ==
          std::vector<double>(2, kInfinity));
}

TEST_CASE("identical points leave interior crowding at zero") {
    std::vector<ObjectiveVector> front{{1, 1}, {1, 1}, {1, 1}, {1, 1}};
    auto d = moecov::crowding_distance(front);
    CHECK(d[0] == kInfinity);   // first in every stable sort order
    CHECK(d[3] == kInfinity);   // last in every stable sort order
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);
}

TEST_CASE("objectives with infinite range are ignored") {
    std::vector<ObjectiveVector> front{{0, 0}, {1, kInfinity}, {2, 1}, {3, 2}};
    auto d = moecov::crowding_distance(front);
    CHECK(d[0] == kInfinity);
    CHECK(d[3] == kInfinity);               // boundary on the first objective
    CHECK(d[1] == kInfinity);               // boundary of the infinite objective
    CHECK(d[2] == Catch::Approx(2.0 / 3.0));  // only the finite objective counts
}

TEST_CASE("selection takes whole fronts first") {
    std::vector<ObjectiveVector> pts{
        {5, 5},  // 0: front 1
        {1, 2},  // 1: front 0
        {2, 1},  // 2: front 0
        {7, 7},  // 3: front 2
    };
    auto sel = moecov::nsga2_select(pts, 2);
    CHECK(sel == std::vector<std::size_t>{1, 2});
    sel = moecov::nsga2_select(pts, 3);
    CHECK(sel == std::vector<std::size_t>{1, 2, 0});
    sel = moecov::nsga2_select(pts, 4);
    CHECK(sel == std::vector<std::size_t>{1, 2, 0, 3});
}

TEST_CASE("the straddling front is cut by crowding, boundaries first") {
    // one front of five points; the crowded middle should be dropped
    std::vector<ObjectiveVector> pts{{0, 4}, {1.9, 2.1}, {2, 2}, {2.1, 1.9}, {4, 0}};
    auto sel = moecov::nsga2_select(pts, 3);
    std::vector<std::size_t> sorted(sel);
    std::sort(sorted.begin(), sorted.end());
    // the two boundary points always survive
    CHECK(std::find(sorted.begin(), sorted.end(), 0) != sorted.end());
    CHECK(std::find(sorted.begin(), sorted.end(), 4) != sorted.end());
    CHECK(sorted.size() == 3);
}

TEST_CASE("selection is deterministic under ties") {
    std::vector<ObjectiveVector> pts(6, ObjectiveVector{1.0, 1.0});
    auto a = moecov::nsga2_select(pts, 3);
    auto b = moecov::nsga2_select(pts, 3);
    CHECK(a == b);
    // all points tie on objectives; boundary crowding then index order decide
    CHECK(a == std::vector<std::size_t>{0, 5, 1});
}

TEST_CASE("selection bounds are enforced") {
    std::vector<ObjectiveVector> pts{{1, 1}};
    CHECK_THROWS_AS(moecov::nsga2_select(pts, 2), std::invalid_argument);
    CHECK(moecov::nsga2_select(pts, 1) == std::vector<std::size_t>{0});
    CHECK(moecov::nsga2_select(pts, 0).empty());
}
