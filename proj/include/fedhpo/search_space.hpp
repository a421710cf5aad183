#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedhpo/rng.hpp"

namespace fedhpo {

enum class OptimizerKind { Adam, Sgd };

inline std::string_view to_string(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

inline OptimizerKind parse_optimizer(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "adam") return OptimizerKind::Adam;
    if (lower == "sgd") return OptimizerKind::Sgd;
    throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

/// One hyperparameter configuration: learning rate, optimizer, batch size.
struct Configuration {
    double learning_rate = 1e-4;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::size_t batch_size = 32;

    friend bool operator==(const Configuration&, const Configuration&) = default;
};

inline std::string to_string(const Configuration& c) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "(lr=%.6g, %s, batch=%zu)", c.learning_rate,
                  std::string(to_string(c.optimizer)).c_str(), c.batch_size);
    return buf;
}

/// Hyperparameter domain: log-uniform learning rate on [lr_low, lr_high] and
/// ordered categorical sets for batch size and optimizer.
///
/// A degenerate learning-rate interval (lr_low == lr_high) is accepted so a
/// single-point space can be expressed.
class SearchSpace {
public:
    SearchSpace(double lr_low, double lr_high, std::vector<std::size_t> batch_candidates,
                std::vector<OptimizerKind> optimizer_candidates)
        : lr_low_(lr_low),
          lr_high_(lr_high),
          batches_(std::move(batch_candidates)),
          optimizers_(std::move(optimizer_candidates)) {
        if (!(lr_low_ > 0.0) || !std::isfinite(lr_high_) || lr_low_ > lr_high_)
            throw std::invalid_argument("search space: need 0 < lr_low <= lr_high");
        if (batches_.empty() || optimizers_.empty())
            throw std::invalid_argument("search space: candidate sets must be non-empty");
        if (has_duplicates(batches_) || has_duplicates(optimizers_))
            throw std::invalid_argument("search space: candidate sets must be duplicate-free");
        if (std::find(batches_.begin(), batches_.end(), std::size_t{0}) != batches_.end())
            throw std::invalid_argument("search space: batch sizes must be positive");
    }

    /// lr in [1e-5, 1e-3] log-uniform, batch {16, 32, 64}, optimizer {Adam, SGD}.
    static SearchSpace defaults() {
        return SearchSpace(1e-5, 1e-3, {16, 32, 64}, {OptimizerKind::Adam, OptimizerKind::Sgd});
    }

    double lr_low() const noexcept { return lr_low_; }
    double lr_high() const noexcept { return lr_high_; }
    double log_lr_low() const noexcept { return std::log10(lr_low_); }
    double log_lr_high() const noexcept { return std::log10(lr_high_); }
    const std::vector<std::size_t>& batch_candidates() const noexcept { return batches_; }
    const std::vector<OptimizerKind>& optimizer_candidates() const noexcept { return optimizers_; }

    bool contains(const Configuration& c) const {
        return c.learning_rate >= lr_low_ && c.learning_rate <= lr_high_ &&
               std::find(batches_.begin(), batches_.end(), c.batch_size) != batches_.end() &&
               std::find(optimizers_.begin(), optimizers_.end(), c.optimizer) != optimizers_.end();
    }

private:
    template <typename T>
    static bool has_duplicates(const std::vector<T>& v) {
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j)
                if (v[i] == v[j]) return true;
        return false;
    }

    double lr_low_;
    double lr_high_;
    std::vector<std::size_t> batches_;
    std::vector<OptimizerKind> optimizers_;
};

inline bool validate(const SearchSpace& space, const Configuration& config) {
    return space.contains(config);
}

/// Maps u in [0, 1) onto [lr_low, lr_high] log-uniformly. Clamped so rounding
/// in exp/log never leaves the interval.
inline double log_uniform_lr(const SearchSpace& space, double u) {
    const double lo = std::log(space.lr_low());
    const double hi = std::log(space.lr_high());
    const double lr = std::exp(u * (hi - lo) + lo);
    return std::clamp(lr, space.lr_low(), space.lr_high());
}

/// Draws from the prior: log-uniform learning rate, uniform categoricals.
/// Draw order is lr, batch, optimizer.
inline Configuration sample_prior(const SearchSpace& space, SeededRng& rng) {
    Configuration c;
    c.learning_rate = log_uniform_lr(space, rng.uniform01());
    c.batch_size = space.batch_candidates()[rng.uniform_index(space.batch_candidates().size())];
    c.optimizer = space.optimizer_candidates()[rng.uniform_index(space.optimizer_candidates().size())];
    return c;
}

}  // namespace fedhpo
