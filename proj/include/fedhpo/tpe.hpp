#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "fedhpo/rng.hpp"
#include "fedhpo/search_space.hpp"

namespace fedhpo {

/// One HPO evaluation. objective is the validation loss (lower is better);
/// val_f1 is kept for breaking ties when optima are combined.
struct Trial {
    Configuration config;
    double objective = 0.0;
    double val_f1 = 0.0;
};

struct HpoResult {
    Trial best;
    std::vector<Trial> history;
};

struct TpeOptions {
    double gamma = 0.25;
    std::size_t startup_trials = 10;
    std::size_t n_candidates = 24;
};

class InsufficientObservations : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ObservationSplit {
    std::vector<Trial> good;
    std::vector<Trial> bad;
};

/// Splits history into the best ceil(gamma * n) trials (at least one) and the
/// rest. Both halves keep history order. Ties on objective go to the earlier
/// trial. Trials with a non-finite objective never enter the good half.
inline ObservationSplit split_observations(const std::vector<Trial>& history, double gamma) {
    if (history.empty()) throw InsufficientObservations("split_observations: empty history");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("split_observations: gamma must be in (0, 1)");

    const std::size_t n = history.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return history[a].objective < history[b].objective;
    });

    const auto finite = static_cast<std::size_t>(std::count_if(
        history.begin(), history.end(), [](const Trial& t) { return std::isfinite(t.objective); }));
    auto n_good = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n))));
    n_good = std::min(n_good, finite);

    std::vector<bool> is_good(n, false);
    for (std::size_t i = 0; i < n_good; ++i) is_good[order[i]] = true;

    ObservationSplit split;
    for (std::size_t i = 0; i < n; ++i) (is_good[i] ? split.good : split.bad).push_back(history[i]);
    return split;
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Parzen estimator on a bounded interval: equal-weight mixture of one uniform
/// prior component and one truncated Gaussian per observation.
///
/// Bandwidth of each kernel is the larger gap to its sorted neighbours (the
/// interval ends count as neighbours), clamped to [1% of width, width].
class ParzenEstimator {
public:
    ParzenEstimator(std::vector<double> observations, double low, double high)
        : low_(low), high_(high), centers_(std::move(observations)) {
        if (!(high_ > low_)) throw std::invalid_argument("ParzenEstimator: need low < high");
        std::sort(centers_.begin(), centers_.end());
        const double width = high_ - low_;
        widths_.resize(centers_.size());
        mass_.resize(centers_.size());
        for (std::size_t i = 0; i < centers_.size(); ++i) {
            const double left = centers_[i] - (i == 0 ? low_ : centers_[i - 1]);
            const double right = (i + 1 == centers_.size() ? high_ : centers_[i + 1]) - centers_[i];
            widths_[i] = std::clamp(std::max(left, right), 0.01 * width, width);
            mass_[i] = detail::normal_cdf((high_ - centers_[i]) / widths_[i]) -
                       detail::normal_cdf((low_ - centers_[i]) / widths_[i]);
        }
    }

    double low() const noexcept { return low_; }
    double high() const noexcept { return high_; }
    std::size_t components() const noexcept { return centers_.size() + 1; }

    double pdf(double x) const {
        if (x < low_ || x > high_) return 0.0;
        double total = 1.0 / (high_ - low_);
        for (std::size_t i = 0; i < centers_.size(); ++i) {
            const double z = (x - centers_[i]) / widths_[i];
            total += std::exp(-0.5 * z * z) / (widths_[i] * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
        }
        return total / static_cast<double>(components());
    }

    double sample(SeededRng& rng) const {
        const std::size_t k = rng.uniform_index(components());
        if (k == centers_.size()) return rng.uniform(low_, high_);
        // Kernel centers lie inside the interval, so acceptance is at least ~1/3.
        for (int attempt = 0; attempt < 256; ++attempt) {
            const double x = rng.normal(centers_[k], widths_[k]);
            if (x >= low_ && x <= high_) return x;
        }
        return centers_[k];
    }

private:
    double low_;
    double high_;
    std::vector<double> centers_;
    std::vector<double> widths_;
    std::vector<double> mass_;
};

/// Continuous Parzen density of query given observations, all in the same
/// (log-scaled) coordinates as bounds.
inline double density_continuous(const std::vector<double>& values, double query,
                                 std::pair<double, double> bounds) {
    return ParzenEstimator(values, bounds.first, bounds.second).pdf(query);
}

/// Add-one smoothed frequency of query among values, over the candidate set.
template <typename T>
double density_categorical(const std::vector<T>& values, const std::vector<T>& candidates, const T& query) {
    if (std::find(candidates.begin(), candidates.end(), query) == candidates.end())
        throw std::invalid_argument("density_categorical: query is not a candidate");
    const auto count = std::count(values.begin(), values.end(), query);
    return static_cast<double>(count + 1) / static_cast<double>(values.size() + candidates.size());
}

namespace detail {

template <typename T>
class CategoricalDensity {
public:
    CategoricalDensity(const std::vector<T>& values, const std::vector<T>& candidates) : candidates_(candidates) {
        probs_.reserve(candidates.size());
        for (const auto& c : candidates) probs_.push_back(density_categorical(values, candidates, c));
    }

    double pmf(const T& value) const {
        for (std::size_t i = 0; i < candidates_.size(); ++i)
            if (candidates_[i] == value) return probs_[i];
        return 0.0;
    }

    T sample(SeededRng& rng) const {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i < candidates_.size(); ++i) {
            acc += probs_[i];
            if (u < acc) return candidates_[i];
        }
        return candidates_.back();
    }

private:
    std::vector<T> candidates_;
    std::vector<double> probs_;
};

template <typename M>
auto collect(const std::vector<Trial>& trials, M member) {
    std::vector<std::remove_cvref_t<decltype(std::declval<Configuration>().*member)>> out;
    out.reserve(trials.size());
    for (const auto& t : trials) out.push_back(t.config.*member);
    return out;
}

struct TrialDensities {
    // The learning-rate density is absent when the interval is a single point.
    TrialDensities(const std::vector<Trial>& trials, const SearchSpace& space)
        : batch(collect(trials, &Configuration::batch_size), space.batch_candidates()),
          optimizer(collect(trials, &Configuration::optimizer), space.optimizer_candidates()) {
        if (space.lr_high() > space.lr_low()) {
            std::vector<double> logs;
            logs.reserve(trials.size());
            for (const auto& t : trials) logs.push_back(std::log10(t.config.learning_rate));
            log_lr.emplace(std::move(logs), space.log_lr_low(), space.log_lr_high());
        }
    }

    std::optional<ParzenEstimator> log_lr;
    CategoricalDensity<std::size_t> batch;
    CategoricalDensity<OptimizerKind> optimizer;
};

}  // namespace detail

/// Proposes the next configuration.
///
/// During the startup phase this is a prior draw. Afterwards n_candidates are
/// drawn from the good-trial density l and the one maximizing
/// prod_dim l(x) / g(x) is returned (first candidate wins ties).
inline Configuration suggest(const std::vector<Trial>& history, const SearchSpace& space, SeededRng& rng,
                             std::size_t n_candidates, const TpeOptions& options = {}) {
    if (n_candidates < 1) throw std::invalid_argument("suggest: n_candidates must be >= 1");
    if (history.size() < std::max<std::size_t>(1, options.startup_trials)) return sample_prior(space, rng);

    const auto split = split_observations(history, options.gamma);
    const detail::TrialDensities good(split.good, space);
    const detail::TrialDensities bad(split.bad, space);

    Configuration best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_candidates; ++i) {
        Configuration c;
        double score = 0.0;
        if (good.log_lr) {
            const double log_lr = good.log_lr->sample(rng);
            c.learning_rate = std::clamp(std::pow(10.0, log_lr), space.lr_low(), space.lr_high());
            score += std::log(good.log_lr->pdf(log_lr)) - std::log(bad.log_lr->pdf(log_lr));
        } else {
            c.learning_rate = space.lr_low();
        }
        c.batch_size = good.batch.sample(rng);
        c.optimizer = good.optimizer.sample(rng);
        score += std::log(good.batch.pmf(c.batch_size)) - std::log(bad.batch.pmf(c.batch_size)) +
                 std::log(good.optimizer.pmf(c.optimizer)) - std::log(bad.optimizer.pmf(c.optimizer));
        if (i == 0 || score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

/// Objective callback: configuration -> (validation loss, validation F1).
using HpoObjective = std::function<std::pair<double, double>(const Configuration&)>;

/// Sequential TPE loop over a fixed budget. Non-finite losses are recorded as
/// +infinity. The best trial is the minimum objective, earliest on ties.
inline HpoResult run_hpo(const HpoObjective& objective, const SearchSpace& space, std::size_t budget,
                         SeededRng& rng, const TpeOptions& options = {}) {
    if (budget < 1) throw std::invalid_argument("run_hpo: budget must be >= 1");
    HpoResult result;
    result.history.reserve(budget);
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < budget; ++i) {
        Trial t;
        t.config = suggest(result.history, space, rng, options.n_candidates, options);
        auto [loss, f1] = objective(t.config);
        t.objective = std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
        t.val_f1 = std::isfinite(f1) ? std::clamp(f1, 0.0, 1.0) : 0.0;
        result.history.push_back(t);
        if (t.objective < result.history[best_index].objective) best_index = i;
    }
    result.best = result.history[best_index];
    return result;
}

}  // namespace fedhpo
