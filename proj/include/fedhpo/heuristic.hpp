#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedhpo/search_space.hpp"

namespace fedhpo {

/// A dataset-specific optimum together with its centralized validation scores.
struct ScoredOptimum {
    Configuration config;
    double val_loss = 0.0;
    double val_f1 = 0.0;
    std::string dataset_name;
};

namespace detail {

/// Most frequent value of field across optima. Among tied values, the one
/// carried by the optimum with the highest val_f1 wins; an exact F1 tie goes
/// to the earliest optimum.
template <typename Field>
auto modal_choice(std::span<const ScoredOptimum> optima, Field field) {
    auto count_of = [&](const auto& value) {
        std::size_t n = 0;
        for (const auto& o : optima) n += (o.config.*field == value);
        return n;
    };
    std::size_t best_count = 0;
    for (const auto& o : optima) best_count = std::max(best_count, count_of(o.config.*field));

    const ScoredOptimum* winner = nullptr;
    for (const auto& o : optima) {
        if (count_of(o.config.*field) != best_count) continue;
        if (!winner || o.val_f1 > winner->val_f1) winner = &o;
    }
    return winner->config.*field;
}

}  // namespace detail

/// Combined configuration: arithmetic mean learning rate (linear space) and
/// modal optimizer and batch size, F1-tie-broken.
inline Configuration combine(std::span<const ScoredOptimum> optima) {
    if (optima.empty()) throw std::invalid_argument("combine: no optima");
    Configuration c;
    double sum = 0.0;
    for (const auto& o : optima) sum += o.config.learning_rate;
    c.learning_rate = sum / static_cast<double>(optima.size());
    c.optimizer = detail::modal_choice(optima, &Configuration::optimizer);
    c.batch_size = detail::modal_choice(optima, &Configuration::batch_size);
    return c;
}

inline Configuration combine(const ScoredOptimum& a, const ScoredOptimum& b) {
    const ScoredOptimum pair[] = {a, b};
    return combine(std::span<const ScoredOptimum>(pair));
}

inline constexpr const char* kSchemeA = "a-optimized";
inline constexpr const char* kSchemeB = "b-optimized";
inline constexpr const char* kSchemeCombined = "combined";

/// The three federated schemes: each task's optimum and their combination.
inline std::map<std::string, Configuration> build_schemes(const ScoredOptimum& opt_a, const ScoredOptimum& opt_b) {
    return {
        {kSchemeA, opt_a.config},
        {kSchemeB, opt_b.config},
        {kSchemeCombined, combine(opt_a, opt_b)},
    };
}

}  // namespace fedhpo
