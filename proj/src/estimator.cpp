#include "maxdiff/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "maxdiff/error.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Adds one softmax stage over `set` (utilities multiplied by `sign`) with the
// chosen index `chosen`. sign = +1 for best, -1 for worst.
void add_stage(std::span<const double> u, std::span<const std::uint32_t> set,
               std::uint32_t chosen, double sign, double& value,
               Eigen::VectorXd* grad, Eigen::MatrixXd* hess,
               std::vector<double>& prob) {
    double top = -kInf;
    for (auto j : set) top = std::max(top, sign * u[j]);
    double denom = 0.0;
    prob.resize(set.size());
    for (std::size_t a = 0; a < set.size(); ++a) {
        prob[a] = std::exp(sign * u[set[a]] - top);
        denom += prob[a];
    }
    value += sign * u[chosen] - top - std::log(denom);
    if (!grad && !hess) return;
    for (auto& p : prob) p /= denom;
    if (grad) {
        (*grad)[chosen] += sign;
        for (std::size_t a = 0; a < set.size(); ++a) (*grad)[set[a]] -= sign * prob[a];
    }
    if (hess) {
        for (std::size_t a = 0; a < set.size(); ++a) {
            (*hess)(set[a], set[a]) -= prob[a];
            for (std::size_t b = 0; b < set.size(); ++b)
                (*hess)(set[a], set[b]) += prob[a] * prob[b];
        }
    }
}

double evaluate(std::span<const double> u, const ChoiceData& data, double lambda,
                Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    const auto K = static_cast<Eigen::Index>(data.n_items());
    if (grad) grad->setZero(K);
    if (hess) hess->setZero(K, K);
    double value = 0.0;
    std::vector<double> prob;
    std::vector<std::uint32_t> reduced;
    for (std::size_t obs = 0; obs < data.n_observations(); ++obs) {
        const auto shown = data.shown(obs);
        const auto best = data.best(obs);
        add_stage(u, shown, best, +1.0, value, grad, hess, prob);
        const auto worst = data.worst(obs);
        if (worst < 0) continue;
        reduced.clear();
        for (auto j : shown)
            if (j != best) reduced.push_back(j);
        add_stage(u, reduced, static_cast<std::uint32_t>(worst), -1.0, value, grad,
                  hess, prob);
    }
    double norm_sq = 0.0;
    for (auto x : u) norm_sq += x * x;
    value -= lambda * norm_sq;
    if (grad)
        for (Eigen::Index j = 0; j < K; ++j) (*grad)[j] -= 2.0 * lambda * u[j];
    if (hess) hess->diagonal().array() -= 2.0 * lambda;
    return value;
}

// Change in one stage's log-probability when u moves by delta, computed as
// sign*delta_c - log(sum_a p_a exp(sign*delta_a)) so that tiny steps near
// the optimum are not lost to cancellation between two large sums.
double stage_change(std::span<const double> u, std::span<const double> delta,
                    std::span<const std::uint32_t> set, std::uint32_t chosen,
                    double sign) {
    double top = -kInf;
    for (auto j : set) top = std::max(top, sign * u[j]);
    double denom = 0.0, moved = 0.0;
    for (auto j : set) {
        const double w = std::exp(sign * u[j] - top);
        denom += w;
        moved += w * std::expm1(sign * delta[j]);
    }
    return sign * delta[chosen] - std::log1p(moved / denom);
}

// objective(u + delta) - objective(u).
double objective_change(std::span<const double> u, std::span<const double> delta,
                        const ChoiceData& data, double lambda) {
    double change = 0.0;
    std::vector<std::uint32_t> reduced;
    for (std::size_t obs = 0; obs < data.n_observations(); ++obs) {
        const auto shown = data.shown(obs);
        const auto best = data.best(obs);
        change += stage_change(u, delta, shown, best, +1.0);
        const auto worst = data.worst(obs);
        if (worst < 0) continue;
        reduced.clear();
        for (auto j : shown)
            if (j != best) reduced.push_back(j);
        change += stage_change(u, delta, reduced, static_cast<std::uint32_t>(worst), -1.0);
    }
    for (std::size_t j = 0; j < u.size(); ++j)
        change -= lambda * delta[j] * (2.0 * u[j] + delta[j]);
    return change;
}

void check_length(std::size_t got, std::size_t want) {
    if (got != want)
        throw Error(ErrorKind::invalid_input,
                    "utility vector has " + std::to_string(got) +
                        " entries, expected " + std::to_string(want));
}

bool resolve_worst(const Dataset& dataset, const FitOptions& options) {
    return options.worst_model_enabled.value_or(dataset.has_worst_picks());
}

struct CoreFit {
    std::vector<double> u;
    double objective = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

// Solves (-H) d = g, damping the diagonal when the factorization fails.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hess,
                                 const Eigen::VectorXd& grad, double lambda) {
    const auto K = hess.rows();
    Eigen::MatrixXd a = -hess;
    if (lambda == 0.0) {
        // Unpenalized likelihood is flat along the all-ones direction; lift
        // that direction so the system is definite. grad is orthogonal to it.
        const double scale = std::max(1.0, a.diagonal().maxCoeff());
        a.array() += scale / static_cast<double>(K);
    }
    double damping = 0.0;
    const double base = 1e-10 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(a + damping * Eigen::MatrixXd::Identity(K, K));
        if (llt.info() == Eigen::Success) {
            Eigen::VectorXd d = llt.solve(grad);
            if (d.allFinite() && d.dot(grad) > 0.0) return d;
        }
        damping = damping == 0.0 ? base : damping * 10.0;
    }
    return grad;  // steepest ascent as a last resort
}

CoreFit fit_core(const ChoiceData& data, const FitOptions& options,
                 FitTrace* trace) {
    const std::size_t K = data.n_items();
    const double lambda = options.l2_penalty;
    CoreFit out;
    out.u = options.initial_utilities.empty()
                ? std::vector<double>(K, 0.0)
                : options.initial_utilities;
    check_length(out.u.size(), K);

    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double f = evaluate(out.u, data, lambda, &grad, &hess);
    if (trace) trace->objective.assign(1, f);
    std::vector<double> candidate(K), delta(K);

    while (out.iterations < options.max_iterations) {
        if (grad.lpNorm<Eigen::Infinity>() < options.grad_tolerance) break;
        const Eigen::VectorXd d = newton_direction(hess, grad, lambda);
        const double slope = d.dot(grad);
        double step = 1.0;
        double change = -kInf;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            for (std::size_t j = 0; j < K; ++j) {
                delta[j] = step * d[static_cast<Eigen::Index>(j)];
                candidate[j] = out.u[j] + delta[j];
            }
            change = objective_change(out.u, delta, data, lambda);
            if (!std::isfinite(change))
                change = evaluate(candidate, data, lambda, nullptr, nullptr) - f;
            if (std::isfinite(change) && change >= 1e-4 * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no representable ascent left
        out.u = candidate;
        evaluate(out.u, data, lambda, &grad, &hess);
        f += change;
        ++out.iterations;
        if (trace) trace->objective.push_back(f);
    }

    // Re-center; the likelihood is translation invariant and the penalty
    // can only shrink.
    const double mean =
        std::accumulate(out.u.begin(), out.u.end(), 0.0) / static_cast<double>(K);
    for (auto& x : out.u) x -= mean;
    out.objective = evaluate(out.u, data, lambda, &grad, nullptr);
    out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    out.converged = out.gradient_norm < options.grad_tolerance;
    return out;
}

FitResult make_result(const Dataset& dataset, const ChoiceData& data,
                      const FitOptions& options, CoreFit core, bool use_worst) {
    FitResult result;
    result.lambda = options.l2_penalty;
    result.worst_model = use_worst;
    result.objective = core.objective;
    result.log_likelihood = log_likelihood(core.u, data, 0.0);
    result.gradient_norm = core.gradient_norm;
    result.converged = core.converged;
    result.iterations = core.iterations;
    result.n_respondents = data.n_respondents();
    result.n_observations = data.n_observations();
    const auto shares = shares_from_utilities(core.u);
    result.shares = make_share_report(dataset.items, shares, result.n_respondents,
                                      result.n_observations);
    result.utilities.values = std::move(core.u);
    return result;
}

double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

UtilityVector UtilityVector::centered() const {
    UtilityVector out = *this;
    if (out.values.empty()) return out;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    for (auto& x : out.values) x -= mean;
    return out;
}

void FitOptions::validate() const {
    if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty))
        throw Error(ErrorKind::invalid_input, "l2_penalty must be >= 0");
    if (!(grad_tolerance > 0.0))
        throw Error(ErrorKind::invalid_input, "grad_tolerance must be > 0");
}

ChoiceData::ChoiceData(const Dataset& dataset, bool use_worst)
    : n_items_(dataset.items.size()) {
    const auto violations = validate_dataset(dataset);
    if (!violations.empty())
        throw Error(ErrorKind::invalid_input,
                    "invalid dataset: " + violations.front().to_string() +
                        (violations.size() > 1
                             ? " (+" + std::to_string(violations.size() - 1) + " more)"
                             : ""));
    const ItemIndex index(dataset.items);
    std::unordered_map<std::string_view, std::size_t> respondents;
    for (const auto& obs : dataset.observations) {
        for (const auto& id : obs.shown)
            shown_.push_back(static_cast<std::uint32_t>(index.at(id)));
        offsets_.push_back(shown_.size());
        best_.push_back(static_cast<std::uint32_t>(index.at(obs.best)));
        worst_.push_back(use_worst && obs.worst
                             ? static_cast<std::int32_t>(index.at(*obs.worst))
                             : -1);
        auto [it, inserted] =
            respondents.emplace(obs.respondent_id, respondents.size());
        respondent_.push_back(it->second);
    }
    n_respondents_ = respondents.size();
}

std::vector<std::vector<std::size_t>> ChoiceData::respondent_blocks() const {
    std::vector<std::vector<std::size_t>> blocks(n_respondents_);
    for (std::size_t obs = 0; obs < n_observations(); ++obs)
        blocks[respondent_[obs]].push_back(obs);
    return blocks;
}

ChoiceData ChoiceData::resample(std::span<const std::size_t> respondents) const {
    const auto blocks = respondent_blocks();
    ChoiceData out;
    out.n_items_ = n_items_;
    out.n_respondents_ = respondents.size();
    for (std::size_t r = 0; r < respondents.size(); ++r) {
        for (auto obs : blocks.at(respondents[r])) {
            const auto s = shown(obs);
            out.shown_.insert(out.shown_.end(), s.begin(), s.end());
            out.offsets_.push_back(out.shown_.size());
            out.best_.push_back(best_[obs]);
            out.worst_.push_back(worst_[obs]);
            out.respondent_.push_back(r);
        }
    }
    return out;
}

double log_likelihood(std::span<const double> u, const ChoiceData& data,
                      double lambda) {
    check_length(u.size(), data.n_items());
    return evaluate(u, data, lambda, nullptr, nullptr);
}

double log_likelihood(const UtilityVector& u, const Dataset& dataset,
                      double lambda, bool use_worst) {
    check_length(u.size(), dataset.items.size());
    return log_likelihood(u.values, ChoiceData(dataset, use_worst), lambda);
}

std::vector<double> log_likelihood_gradient(std::span<const double> u,
                                            const ChoiceData& data,
                                            double lambda) {
    check_length(u.size(), data.n_items());
    Eigen::VectorXd grad;
    evaluate(u, data, lambda, &grad, nullptr);
    return {grad.data(), grad.data() + grad.size()};
}

std::vector<double> log_likelihood_gradient(const UtilityVector& u,
                                            const Dataset& dataset,
                                            double lambda, bool use_worst) {
    check_length(u.size(), dataset.items.size());
    return log_likelihood_gradient(u.values, ChoiceData(dataset, use_worst), lambda);
}

FitResult fit(const Dataset& dataset, const FitOptions& options,
              FitTrace* trace) {
    options.validate();
    if (dataset.observations.empty())
        throw Error(ErrorKind::insufficient_data, "dataset has no observations");
    const bool use_worst = resolve_worst(dataset, options);
    const ChoiceData data(dataset, use_worst);
    return make_result(dataset, data, options, fit_core(data, options, trace),
                       use_worst);
}

std::vector<double> shares_from_utilities(std::span<const double> u) {
    std::vector<double> shares(u.size());
    if (u.empty()) return shares;
    const double top = *std::max_element(u.begin(), u.end());
    double denom = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        shares[i] = std::exp(u[i] - top);
        denom += shares[i];
    }
    for (auto& s : shares) s = 100.0 * s / denom;
    return shares;
}

std::vector<double> count_shares(const Dataset& dataset) {
    const ItemIndex index(dataset.items);
    const std::size_t K = dataset.items.size();
    std::vector<double> shown(K, 0.0);
    std::vector<double> picked(K, 0.0);
    for (const auto& obs : dataset.observations) {
        for (const auto& id : obs.shown) shown[index.at(id)] += 1.0;
        picked[index.at(obs.best)] += 1.0;
    }
    std::string missing;
    for (std::size_t i = 0; i < K; ++i)
        if (shown[i] == 0.0) missing += (missing.empty() ? "" : ",") + dataset.items[i].id;
    if (!missing.empty())
        throw Error(ErrorKind::undefined_item, "items never shown: " + missing);

    std::vector<double> shares(K);
    double total = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        shares[i] = picked[i] / shown[i];
        total += shares[i];
    }
    if (total <= 0.0)
        throw Error(ErrorKind::insufficient_data, "no best picks recorded");
    for (auto& s : shares) s = 100.0 * s / total;
    return shares;
}

ShareIntervals bootstrap_shares(const Dataset& dataset, const FitOptions& options,
                                std::size_t replicates, std::uint64_t seed) {
    options.validate();
    if (replicates == 0)
        throw Error(ErrorKind::invalid_input, "bootstrap needs at least 1 replicate");
    const bool use_worst = resolve_worst(dataset, options);
    const ChoiceData data(dataset, use_worst);
    const std::size_t n = data.n_respondents();
    if (n < 2)
        throw Error(ErrorKind::invalid_input,
                    "bootstrap needs at least 2 distinct respondents");
    const std::size_t K = data.n_items();

    std::vector<std::vector<double>> draws(replicates);
    std::vector<char> converged(replicates, 0);
    const auto count = static_cast<long>(replicates);
#pragma omp parallel for schedule(dynamic)
    for (long r = 0; r < count; ++r) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = pick(rng);
        const auto core = fit_core(data.resample(sample), options, nullptr);
        converged[r] = core.converged;
        draws[r] = shares_from_utilities(core.u);
    }

    ShareIntervals out;
    out.replicates = replicates;
    out.non_converged =
        static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    out.low.resize(K);
    out.high.resize(K);
    std::vector<double> column(replicates);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t r = 0; r < replicates; ++r) column[r] = draws[r][i];
        out.low[i] = percentile(column, 0.025);
        out.high[i] = percentile(column, 0.975);
    }
    return out;
}

CohortAnalysis fit_by_cohort(const Dataset& dataset,
                             std::span<const CohortSpec> cohorts,
                             const FitOptions& options) {
    std::set<std::string> names;
    for (const auto& cohort : cohorts) {
        if (cohort.name.empty())
            throw Error(ErrorKind::invalid_input, "cohort with empty name");
        if (!names.insert(cohort.name).second)
            throw Error(ErrorKind::invalid_input,
                        "duplicate cohort name '" + cohort.name + "'");
    }
    std::vector<Dataset> subsets;
    for (const auto& cohort : cohorts) {
        subsets.push_back(filter_cohort(dataset, cohort));
        if (subsets.back().observations.empty())
            throw Error(ErrorKind::insufficient_data,
                        "cohort '" + cohort.name + "' matches no respondents");
    }

    CohortAnalysis out;
    out.pooled = fit(dataset, options);
    for (std::size_t c = 0; c < cohorts.size(); ++c) {
        CohortFit entry{cohorts[c].name, fit(subsets[c], options), {}};
        for (std::size_t i = 0; i < dataset.items.size(); ++i) {
            const auto& mine = entry.fit.shares.rows[i];
            const auto& pooled = out.pooled.shares.rows[i];
            entry.comparison.push_back(
                {mine.id, mine.share - pooled.share, mine.rank - pooled.rank});
        }
        out.cohorts.push_back(std::move(entry));
    }
    return out;
}

}  // namespace maxdiff
