#pragma once
// Balanced screen designs: which item subsets each respondent version sees.

#include <cstddef>
#include <string>
#include <vector>

#include "maxdiff/domain.hpp"

namespace maxdiff {

using CountMatrix = std::vector<std::vector<std::size_t>>;

struct DesignDiagnostics {
    CountMatrix frequency;      // V x K item appearances per version
    CountMatrix cooccurrence;   // K x K pair counts summed over versions
    CountMatrix positions;      // K x k appearances per display position
    std::vector<std::string> violations;
    double balance_score = 0.0;  // variance of pair counts over unordered pairs
};

// Per version: greedy least-used slot filling (frequency balance is hard),
// then a strictly-improving pairwise-swap hill climb on pair co-occurrence,
// then a per-screen display order that evens out positional counts over
// the whole design.
// Deterministic for a fixed spec; version v draws only from
// derive_seed(rng_seed, {v}).
Design generate_design(const DesignSpec& spec);

DesignDiagnostics design_diagnostics(const Design& design);

// Population variance of the strict upper triangle of a square count matrix.
double pair_count_variance(const CountMatrix& cooccurrence);

}  // namespace maxdiff
