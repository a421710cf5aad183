#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace fedhpo {

/// 2x2 counts indexed [actual][predicted].
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 2>, 2> counts{};

    std::size_t total() const noexcept { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    std::size_t support(int actual) const noexcept { return counts[actual][0] + counts[actual][1]; }
    std::size_t predicted(int label) const noexcept { return counts[0][label] + counts[1][label]; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_from(std::span<const int> actual, std::span<const int> predicted) {
    if (actual.size() != predicted.size()) throw std::invalid_argument("confusion_from: length mismatch");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < actual.size(); ++i) ++m.counts[actual[i]][predicted[i]];
    return m;
}

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionMatrix confusion;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Support-weighted per-class precision/recall/F1 and accuracy.
///
/// Terms with a zero denominator contribute 0. Weighted recall is computed
/// with the support factor cancelled, sum_c TP_c / N, so it is bit-identical
/// to accuracy.
inline MetricsReport metrics_from_confusion(const ConfusionMatrix& m) {
    MetricsReport r;
    r.confusion = m;
    const std::size_t n = m.total();
    if (n == 0) return r;
    const double total = static_cast<double>(n);

    const std::size_t correct = m.counts[0][0] + m.counts[1][1];
    r.accuracy = static_cast<double>(correct) / total;
    r.recall = r.accuracy;

    for (int c = 0; c < 2; ++c) {
        const std::size_t support = m.support(c);
        if (support == 0) continue;
        const double tp = static_cast<double>(m.counts[c][c]);
        const std::size_t pred = m.predicted(c);
        const double precision = pred == 0 ? 0.0 : tp / static_cast<double>(pred);
        const double recall = tp / static_cast<double>(support);
        const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        const double weight = static_cast<double>(support) / total;
        r.precision += weight * precision;
        r.f1 += weight * f1;
    }
    return r;
}

}  // namespace fedhpo
