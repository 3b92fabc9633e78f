#pragma once

// Record store with planted positives and near-miss distractors for each mining heuristic.

#include <array>
#include <cstdint>
#include <set>

#include "dump_fixture.hpp"

namespace sotk::testing {

struct MinerFixture {
    DumpWriter dump;
    // Planted answer ids, indexed like miner::Heuristic.
    std::array<std::set<std::int64_t>, 3> planted;
    // Answers whose code distance sits exactly on the threshold and one below it.
    std::int64_t distance_100 = 0;
    std::int64_t distance_99 = 0;
    // Late answers exactly at the boundary and one millisecond before it.
    std::int64_t late_boundary = 0;
    std::int64_t late_just_under = 0;
    // Edited answers with no body revision rows.
    std::set<std::int64_t> missing_history;
};

MinerFixture miner_fixture(std::size_t positives, std::size_t distractors, std::uint64_t seed);

}  // namespace sotk::testing
