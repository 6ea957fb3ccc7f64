#include <catch2/catch_amalgamated.hpp>

#include "mal/lap.hpp"
#include "mal/rng.hpp"

using namespace mal;

namespace {

MatD random_int_cost(int rows, int cols, CounterRng& rng, int lo = -50, int hi = 50) {
    MatD cost(rows, cols);
    for (double& v : cost.data)
        v = static_cast<double>(static_cast<std::int64_t>(rng.next_below(hi - lo + 1)) + lo);
    return cost;
}

} // namespace

TEST_CASE("dominant diagonal is assigned to itself", "[lap]") {
    MatD cost(3, 3, 1.0);
    cost(0, 0) = cost(1, 1) = cost(2, 2) = 5.0;
    auto [assignment, objective] = solve_lap_max(cost);
    REQUIRE(assignment.map == std::vector<int>{0, 1, 2});
    REQUIRE(objective == 15.0);
}

TEST_CASE("2x2 anti-diagonal optimum", "[lap]") {
    MatD cost(2, 2);
    cost(0, 0) = 1.0;
    cost(0, 1) = 2.0;
    cost(1, 0) = 3.0;
    cost(1, 1) = 0.0;
    auto [assignment, objective] = solve_lap_max(cost);
    REQUIRE(assignment.map == std::vector<int>{1, 0});
    REQUIRE(objective == 5.0);
}

TEST_CASE("brute force handles the 1x1 case", "[lap]") {
    MatD cost(1, 1);
    cost(0, 0) = -3.25;
    auto [assignment, objective] = brute_force_lap(cost);
    REQUIRE(assignment.map == std::vector<int>{0});
    REQUIRE(objective == -3.25);
}

TEST_CASE("brute force objective is invariant under row permutation", "[lap]") {
    CounterRng rng(11);
    const MatD cost = random_int_cost(5, 5, rng);
    MatD shuffled(5, 5);
    const std::vector<int> perm{3, 0, 4, 2, 1};
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) shuffled(perm[r], c) = cost(r, c);
    REQUIRE(brute_force_lap(cost).second == brute_force_lap(shuffled).second);
}

TEST_CASE("solver matches the brute-force oracle exactly", "[lap][oracle]") {
    CounterRng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const MatD cost = random_int_cost(7, 7, rng);
        auto [fast, fast_obj] = solve_lap_max(cost);
        auto [oracle, oracle_obj] = brute_force_lap(cost);
        fast.validate();
        REQUIRE(fast_obj == oracle_obj);
    }
    for (int trial = 0; trial < 50; ++trial) {
        const MatD cost = random_int_cost(7, 5, rng);
        auto [fast, fast_obj] = solve_lap_max(cost);
        auto [oracle, oracle_obj] = brute_force_lap(cost);
        fast.validate();
        REQUIRE(fast.source_dim() == 5);
        REQUIRE(fast_obj == oracle_obj);
    }
}

TEST_CASE("constant shift moves the objective by n*c and keeps an optimum", "[lap]") {
    CounterRng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const MatD cost = random_int_cost(6, 4, rng);
        const double c = 17.0;
        MatD shifted = cost;
        for (double& v : shifted.data) v += c;
        auto [base_asg, base_obj] = solve_lap_max(cost);
        auto [shift_asg, shift_obj] = solve_lap_max(shifted);
        REQUIRE(shift_obj == base_obj + 4 * c);
        // the shifted optimum is also optimal for the unshifted instance
        double via_shifted = 0.0;
        for (int j = 0; j < 4; ++j) via_shifted += cost(shift_asg.map[j], j);
        REQUIRE(via_shifted == base_obj);
    }
}

TEST_CASE("zero-column padding preserves the real-column objective", "[lap]") {
    CounterRng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const MatD cost = random_int_cost(6, 3, rng);
        MatD padded(6, 6, 0.0);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 3; ++c) padded(r, c) = cost(r, c);
        auto [asg, obj] = solve_lap_max(cost);
        auto [pasg, pobj] = solve_lap_max(padded);
        REQUIRE(obj == pobj); // padded columns contribute exactly zero
        double restricted = 0.0;
        for (int j = 0; j < 3; ++j) restricted += cost(pasg.map[j], j);
        REQUIRE(restricted == obj);
    }
}

TEST_CASE("solver is deterministic for a fixed input", "[lap]") {
    CounterRng rng(2);
    const MatD cost = random_int_cost(7, 7, rng);
    auto first = solve_lap_max(cost);
    auto second = solve_lap_max(cost);
    REQUIRE(first.first.map == second.first.map);
    REQUIRE(first.second == second.second);
}

TEST_CASE("error paths", "[lap]") {
    MatD bad(2, 2, 0.0);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(solve_lap_max(bad), NumericError);

    MatD wide(2, 3, 0.0);
    REQUIRE_THROWS_AS(solve_lap_max(wide), ShapeError);

    MatD big(9, 9, 0.0);
    REQUIRE_THROWS_AS(brute_force_lap(big), ConfigError);
}
