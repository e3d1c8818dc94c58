#pragma once

#include <cstdint>
#include <iosfwd>

namespace ftstab {

// Built-in oracle suite: re-derives the library's cross-checkable quantities
// (stacked-form equivalences, weighting identities, trace preservation, the
// crafted bound/criterion gap, SDPA round trip, Monte Carlo vs exact moments,
// deterministic degeneration) on seeded random instances and prints a
// pass/fail table. Returns true iff every check passed.
bool run_selftest(std::ostream& out, std::uint64_t seed = 20250819);

}  // namespace ftstab
