#pragma once
// Aggregate multinomial-logit estimation for best-only and best-worst
// choice data.
//
// Best pick from shown set S:          P(b) = exp(u_b) / sum_{j in S} exp(u_j)
// Worst pick from S minus best (if any): P(w) = exp(-u_w) / sum exp(-u_j)
//
// Utilities are only identified up to a constant; results are reported
// centered to sum zero.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maxdiff/domain.hpp"

namespace maxdiff {

struct UtilityVector {
    std::vector<double> values;

    bool operator==(const UtilityVector&) const = default;
    std::size_t size() const { return values.size(); }
    UtilityVector centered() const;
};

struct FitOptions {
    double l2_penalty = 0.001;
    double grad_tolerance = 1e-8;  // infinity norm
    std::size_t max_iterations = 500;
    // nullopt: enabled iff any observation carries a worst pick.
    std::optional<bool> worst_model_enabled;
    // Starting point; empty means all zeros.
    std::vector<double> initial_utilities;

    void validate() const;
};

struct FitResult {
    UtilityVector utilities;
    ShareReport shares;
    double log_likelihood = 0.0;  // unpenalized, at utilities
    double objective = 0.0;       // penalized
    double gradient_norm = 0.0;   // infinity norm of the penalized gradient
    bool converged = false;
    std::size_t iterations = 0;
    double lambda = 0.0;
    bool worst_model = false;
    std::size_t n_respondents = 0;
    std::size_t n_observations = 0;

    bool operator==(const FitResult&) const = default;
};

// Penalized objective value after every accepted iteration (index 0 is the
// starting point).
struct FitTrace {
    std::vector<double> objective;
};

// Index-based form of a validated dataset, shared by every evaluation.
class ChoiceData {
public:
    ChoiceData() = default;
    // Throws invalid-input if the dataset has violations.
    ChoiceData(const Dataset& dataset, bool use_worst);

    std::size_t n_items() const { return n_items_; }
    std::size_t n_observations() const { return best_.size(); }
    std::size_t n_respondents() const { return n_respondents_; }

    std::span<const std::uint32_t> shown(std::size_t obs) const {
        return {shown_.data() + offsets_[obs], offsets_[obs + 1] - offsets_[obs]};
    }
    std::uint32_t best(std::size_t obs) const { return best_[obs]; }
    // -1 when absent or ignored.
    std::int32_t worst(std::size_t obs) const { return worst_[obs]; }
    std::size_t respondent(std::size_t obs) const { return respondent_[obs]; }

    // Observations grouped by respondent, in order of first appearance.
    std::vector<std::vector<std::size_t>> respondent_blocks() const;
    // Concatenation of the given respondent blocks; each copy of a block is
    // treated as a distinct respondent.
    ChoiceData resample(std::span<const std::size_t> respondents) const;

private:
    std::size_t n_items_ = 0;
    std::size_t n_respondents_ = 0;
    std::vector<std::uint32_t> shown_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> best_;
    std::vector<std::int32_t> worst_;
    std::vector<std::size_t> respondent_;
};

// Penalized log-likelihood; worst picks are included when use_worst is set.
double log_likelihood(const UtilityVector& u, const Dataset& dataset,
                      double lambda, bool use_worst = true);
double log_likelihood(std::span<const double> u, const ChoiceData& data,
                      double lambda);

std::vector<double> log_likelihood_gradient(const UtilityVector& u,
                                            const Dataset& dataset,
                                            double lambda, bool use_worst = true);
std::vector<double> log_likelihood_gradient(std::span<const double> u,
                                            const ChoiceData& data,
                                            double lambda);

// Damped Newton ascent with backtracking; the objective never decreases.
FitResult fit(const Dataset& dataset, const FitOptions& options = {},
              FitTrace* trace = nullptr);

// Percent shares, 100 * softmax(u).
std::vector<double> shares_from_utilities(std::span<const double> u);
inline std::vector<double> shares_from_utilities(const UtilityVector& u) {
    return shares_from_utilities(u.values);
}

// Best-pick rate per appearance, normalized to 100.
std::vector<double> count_shares(const Dataset& dataset);

struct ShareIntervals {
    std::vector<double> low;   // percent, 2.5th percentile
    std::vector<double> high;  // percent, 97.5th percentile
    std::size_t replicates = 0;
    std::size_t non_converged = 0;
};

inline constexpr std::size_t kDefaultBootstrapReplicates = 1000;

// Respondent-block percentile bootstrap. Replicate r draws only from
// derive_seed(seed, {r}), so results do not depend on thread count.
ShareIntervals bootstrap_shares(const Dataset& dataset, const FitOptions& options,
                                std::size_t replicates, std::uint64_t seed);

struct ItemComparison {
    std::string id;
    double share_delta = 0.0;  // cohort share - pooled share, points
    int rank_shift = 0;        // cohort rank - pooled rank
};

struct CohortFit {
    std::string name;
    FitResult fit;
    std::vector<ItemComparison> comparison;  // item order
};

struct CohortAnalysis {
    FitResult pooled;
    std::vector<CohortFit> cohorts;
};

CohortAnalysis fit_by_cohort(const Dataset& dataset,
                             std::span<const CohortSpec> cohorts,
                             const FitOptions& options = {});

}  // namespace maxdiff
