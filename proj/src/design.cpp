#include "maxdiff/design.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "maxdiff/error.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff {

namespace {

using Pairs = std::vector<std::vector<long>>;

std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<Screen> fill_least_used(const DesignSpec& spec, Rng& rng) {
    const std::size_t K = spec.n_items;
    std::vector<std::size_t> counts(K, 0);
    std::vector<Screen> screens(spec.screens_per_respondent);
    std::vector<std::size_t> eligible;
    std::vector<char> in_screen(K);
    for (auto& screen : screens) {
        std::fill(in_screen.begin(), in_screen.end(), 0);
        for (std::size_t slot = 0; slot < spec.items_per_screen; ++slot) {
            std::size_t least = std::numeric_limits<std::size_t>::max();
            eligible.clear();
            for (std::size_t i = 0; i < K; ++i) {
                if (in_screen[i]) continue;
                if (counts[i] < least) {
                    least = counts[i];
                    eligible.clear();
                }
                if (counts[i] == least) eligible.push_back(i);
            }
            const auto pick = eligible[uniform_index(rng, eligible.size())];
            in_screen[pick] = 1;
            ++counts[pick];
            screen.item_indices.push_back(pick);
        }
    }
    return screens;
}

Pairs pair_counts(const std::vector<Screen>& screens, std::size_t K) {
    Pairs pairs(K, std::vector<long>(K, 0));
    for (const auto& screen : screens) {
        const auto& s = screen.item_indices;
        for (std::size_t a = 0; a < s.size(); ++a)
            for (std::size_t b = a + 1; b < s.size(); ++b) {
                ++pairs[s[a]][s[b]];
                ++pairs[s[b]][s[a]];
            }
    }
    return pairs;
}

double sum_of_squares(const Pairs& pairs) {
    double total = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = i + 1; j < pairs.size(); ++j)
            total += static_cast<double>(pairs[i][j]) * pairs[i][j];
    return total;
}

// Adds d to pair (i, j) and returns the change in the sum of squares.
long bump(Pairs& pairs, std::size_t i, std::size_t j, long d) {
    const long c = pairs[i][j];
    pairs[i][j] += d;
    pairs[j][i] += d;
    return 2 * c * d + d * d;
}

// Moves item `out` of screen s to `in`; returns change in sum of squares.
long replace_in_screen(Pairs& pairs, const std::vector<std::size_t>& s,
                       std::size_t out, std::size_t in) {
    long delta = 0;
    for (auto x : s) {
        if (x == out) continue;
        delta += bump(pairs, out, x, -1);
        delta += bump(pairs, in, x, +1);
    }
    return delta;
}

void balance_pairs(std::vector<Screen>& screens, Pairs& pairs,
                   std::size_t attempts, Rng& rng) {
    const std::size_t T = screens.size();
    if (T < 2) return;
    const std::size_t k = screens.front().item_indices.size();
    auto contains = [](const std::vector<std::size_t>& s, std::size_t x) {
        return std::find(s.begin(), s.end(), x) != s.end();
    };
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        const auto s1 = uniform_index(rng, T);
        auto s2 = uniform_index(rng, T - 1);
        if (s2 >= s1) ++s2;
        const auto p1 = uniform_index(rng, k);
        const auto p2 = uniform_index(rng, k);
        auto& first = screens[s1].item_indices;
        auto& second = screens[s2].item_indices;
        const auto a = first[p1];
        const auto b = second[p2];
        if (a == b || contains(second, a) || contains(first, b)) continue;

        long delta = replace_in_screen(pairs, first, a, b);
        first[p1] = b;
        delta += replace_in_screen(pairs, second, b, a);
        second[p2] = a;
        if (delta < 0) continue;

        // revert
        replace_in_screen(pairs, second, a, b);
        second[p2] = b;
        replace_in_screen(pairs, first, b, a);
        first[p1] = a;
    }
}

// Orders each screen so that items spread evenly over display positions.
// `positions` (K x k) carries the tally across versions. Screens of up to six
// items try every permutation; larger screens fill slot by slot.
void order_for_positions(std::vector<Screen>& screens, CountMatrix& positions,
                         Rng& rng) {
    const std::size_t k = screens.front().item_indices.size();
    for (auto& screen : screens) {
        auto items = screen.item_indices;
        std::shuffle(items.begin(), items.end(), rng);
        std::vector<std::size_t> ordered;
        if (k <= 6) {
            std::vector<std::size_t> perm(k);
            std::iota(perm.begin(), perm.end(), 0);
            std::size_t best_cost = std::numeric_limits<std::size_t>::max();
            do {
                std::size_t cost = 0;
                for (std::size_t pos = 0; pos < k; ++pos) {
                    const auto c = positions[items[perm[pos]]][pos];
                    cost += c * c;
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    ordered.clear();
                    for (auto a : perm) ordered.push_back(items[a]);
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
        } else {
            for (std::size_t pos = 0; pos < k; ++pos) {
                auto best = std::min_element(items.begin(), items.end(),
                                             [&](std::size_t a, std::size_t b) {
                                                 return positions[a][pos] < positions[b][pos];
                                             });
                ordered.push_back(*best);
                items.erase(best);
            }
        }
        for (std::size_t pos = 0; pos < k; ++pos) ++positions[ordered[pos]][pos];
        screen.item_indices = std::move(ordered);
    }
}

}  // namespace

Design generate_design(const DesignSpec& spec) {
    spec.validate();
    Design design;
    design.spec = spec;
    design.metadata.warnings = spec.warnings();
    design.versions.resize(spec.n_versions);
    design.metadata.score_before_swaps.resize(spec.n_versions);
    design.metadata.score_after_swaps.resize(spec.n_versions);

    CountMatrix positions(spec.n_items, std::vector<std::size_t>(spec.items_per_screen, 0));
    for (std::size_t v = 0; v < spec.n_versions; ++v) {
        Rng rng(derive_seed(spec.rng_seed, {v}));
        auto screens = fill_least_used(spec, rng);
        auto pairs = pair_counts(screens, spec.n_items);
        design.metadata.score_before_swaps[v] = sum_of_squares(pairs);
        balance_pairs(screens, pairs, spec.swap_attempts, rng);
        design.metadata.score_after_swaps[v] = sum_of_squares(pairs);
        order_for_positions(screens, positions, rng);
        design.versions[v] = std::move(screens);
    }
    return design;
}

double pair_count_variance(const CountMatrix& cooccurrence) {
    const std::size_t K = cooccurrence.size();
    if (K < 2) return 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j) {
            const double c = static_cast<double>(cooccurrence[i][j]);
            sum += c;
            sum_sq += c * c;
        }
    const double n = static_cast<double>(K * (K - 1) / 2);
    const double mean = sum / n;
    return std::max(0.0, sum_sq / n - mean * mean);
}

DesignDiagnostics design_diagnostics(const Design& design) {
    const auto& spec = design.spec;
    const std::size_t K = spec.n_items;
    const std::size_t k = spec.items_per_screen;
    DesignDiagnostics out;
    out.frequency.assign(design.versions.size(), std::vector<std::size_t>(K, 0));
    out.cooccurrence.assign(K, std::vector<std::size_t>(K, 0));
    out.positions.assign(K, std::vector<std::size_t>(k, 0));

    if (design.versions.size() != spec.n_versions)
        out.violations.push_back("expected " + std::to_string(spec.n_versions) +
                                 " versions, found " +
                                 std::to_string(design.versions.size()));

    for (std::size_t v = 0; v < design.versions.size(); ++v) {
        const auto& version = design.versions[v];
        const std::string where_v = "version " + std::to_string(v);
        if (version.size() != spec.screens_per_respondent)
            out.violations.push_back(where_v + ": expected " +
                                     std::to_string(spec.screens_per_respondent) +
                                     " screens, found " +
                                     std::to_string(version.size()));
        for (std::size_t t = 0; t < version.size(); ++t) {
            const auto& s = version[t].item_indices;
            const std::string where = where_v + " screen " + std::to_string(t);
            if (s.size() != k)
                out.violations.push_back(where + ": expected " + std::to_string(k) +
                                         " items, found " + std::to_string(s.size()));
            std::vector<std::size_t> valid;
            for (std::size_t p = 0; p < s.size(); ++p) {
                if (s[p] >= K) {
                    out.violations.push_back(where + ": item index " +
                                             std::to_string(s[p]) + " out of range");
                    continue;
                }
                if (std::find(valid.begin(), valid.end(), s[p]) != valid.end()) {
                    out.violations.push_back(where + ": duplicate item index " +
                                             std::to_string(s[p]));
                    continue;
                }
                valid.push_back(s[p]);
                ++out.frequency[v][s[p]];
                if (p < k) ++out.positions[s[p]][p];
            }
            for (std::size_t a = 0; a < valid.size(); ++a)
                for (std::size_t b = a + 1; b < valid.size(); ++b) {
                    ++out.cooccurrence[valid[a]][valid[b]];
                    ++out.cooccurrence[valid[b]][valid[a]];
                }
        }
        const auto [lo, hi] =
            std::minmax_element(out.frequency[v].begin(), out.frequency[v].end());
        if (*hi - *lo > 1)
            out.violations.push_back(where_v + ": item frequencies range from " +
                                     std::to_string(*lo) + " to " +
                                     std::to_string(*hi));
        if (k * spec.screens_per_respondent >= K && *lo == 0)
            out.violations.push_back(where_v + ": not every item is shown");
    }
    out.balance_score = pair_count_variance(out.cooccurrence);
    return out;
}

}  // namespace maxdiff
