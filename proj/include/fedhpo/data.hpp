#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedhpo/dataset.hpp"
#include "fedhpo/rng.hpp"

namespace fedhpo {

enum class TaskDifficulty { Linear, Rings };

inline std::string to_string(TaskDifficulty d) { return d == TaskDifficulty::Linear ? "linear" : "rings"; }

inline TaskDifficulty parse_difficulty(const std::string& text) {
    if (text == "linear") return TaskDifficulty::Linear;
    if (text == "rings") return TaskDifficulty::Rings;
    throw std::invalid_argument("unknown task difficulty '" + text + "'");
}

/// Synthetic stand-in for one imaging task.
struct TaskSpec {
    std::string name = "task";
    std::size_t n_samples = 498;
    double positive_fraction = 0.5;
    TaskDifficulty difficulty = TaskDifficulty::Linear;
    std::size_t feature_dim = 4;
    double noise_scale = 1.0;

    void validate() const {
        if (n_samples < 10) throw std::invalid_argument("TaskSpec: n_samples must be >= 10");
        if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
            throw std::invalid_argument("TaskSpec: positive_fraction must be in (0, 1)");
        if (feature_dim < 1) throw std::invalid_argument("TaskSpec: feature_dim must be >= 1");
        if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
            throw std::invalid_argument("TaskSpec: noise_scale must be finite and >= 0");
    }
};

/// Blob centers sit at +/- kLinearHalfGap along a random unit direction. The
/// gap is wide enough that a logistic model trained from scratch with learning
/// rates from the default search space (at most 1e-3) separates the blobs
/// within three rounds of 50 local epochs.
inline constexpr double kLinearHalfGap = 6.0;
/// Shell radii for negatives and positives of the rings task.
inline constexpr double kInnerRadius = 1.0;
inline constexpr double kOuterRadius = 2.0;

/// Linear: two Gaussian blobs. Rings: concentric shells (not linearly
/// separable). Exactly round(positive_fraction * n_samples) positives, in
/// shuffled order.
inline Dataset gen_task(const TaskSpec& spec, SeededRng& rng) {
    spec.validate();
    const std::size_t d = spec.feature_dim;
    const auto n_pos = static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(spec.n_samples)));

    std::vector<int> labels(spec.n_samples, 0);
    std::fill_n(labels.begin(), n_pos, 1);
    rng.shuffle(labels);

    auto unit_vector = [&] {
        std::vector<double> u(d);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& x : u) {
                x = rng.normal();
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& x : u) x /= norm;
        return u;
    };

    const std::vector<double> axis = unit_vector();
    std::vector<double> features;
    features.reserve(spec.n_samples * d);
    for (int y : labels) {
        if (spec.difficulty == TaskDifficulty::Linear) {
            const double offset = y ? kLinearHalfGap : -kLinearHalfGap;
            for (std::size_t i = 0; i < d; ++i) features.push_back(offset * axis[i] + spec.noise_scale * rng.normal());
        } else {
            const double radius = y ? kOuterRadius : kInnerRadius;
            const auto dir = unit_vector();
            for (std::size_t i = 0; i < d; ++i) features.push_back(radius * dir[i] + spec.noise_scale * rng.normal());
        }
    }
    return Dataset(spec.name, d, std::move(features), std::move(labels));
}

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction_of_train = 0.2;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("SplitSpec: train_fraction must be in (0, 1)");
        if (!(val_fraction_of_train > 0.0 && val_fraction_of_train < 1.0))
            throw std::invalid_argument("SplitSpec: val_fraction_of_train must be in (0, 1)");
    }
};

struct DataSplit {
    Dataset train, val, test;
    /// Row indices into the parent dataset, ascending.
    std::vector<std::size_t> train_rows, val_rows, test_rows;
};

/// Per-class split: test takes round((1 - train_fraction) * n_c), validation
/// takes round(val_fraction * remainder), training keeps the rest. Every split
/// receives at least one sample of every class.
inline DataSplit stratified_split(const Dataset& d, const SplitSpec& spec, SeededRng& rng) {
    spec.validate();
    DataSplit out;
    for (int c = 0; c < 2; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d.label(i) == c) idx.push_back(i);
        if (idx.size() < 3)
            throw std::invalid_argument("stratified_split: class " + std::to_string(c) + " has fewer than 3 samples");
        rng.shuffle(idx);

        const double n_c = static_cast<double>(idx.size());
        const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((1.0 - spec.train_fraction) * n_c)));
        const std::size_t rest = idx.size() - std::min(n_test, idx.size());
        const auto n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(spec.val_fraction_of_train * static_cast<double>(rest))));
        if (n_test + n_val >= idx.size())
            throw std::invalid_argument("stratified_split: class " + std::to_string(c) +
                                        " too small to populate train, validation and test");

        out.test_rows.insert(out.test_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.val_rows.insert(out.val_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test),
                            idx.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
        out.train_rows.insert(out.train_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), idx.end());
    }
    for (auto* rows : {&out.train_rows, &out.val_rows, &out.test_rows}) std::sort(rows->begin(), rows->end());
    out.train = d.subset(out.train_rows);
    out.val = d.subset(out.val_rows);
    out.test = d.subset(out.test_rows);
    return out;
}

/// Label histogram p(y) as {p(0), p(1)}.
using LabelHistogram = std::array<double, 2>;

inline LabelHistogram label_histogram(const Dataset& d, std::span<const std::size_t> rows) {
    LabelHistogram h{0.0, 0.0};
    if (rows.empty()) return h;
    std::size_t pos = 0;
    for (auto r : rows) pos += d.label(r) == 1;
    h[1] = static_cast<double>(pos) / static_cast<double>(rows.size());
    h[0] = static_cast<double>(rows.size() - pos) / static_cast<double>(rows.size());
    return h;
}

inline LabelHistogram label_histogram(const Dataset& d) {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return label_histogram(d, rows);
}

inline double total_variation(const LabelHistogram& a, const LabelHistogram& b) {
    return 0.5 * (std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]));
}

struct ClientPartition {
    /// Row indices into the training set, ascending per client.
    std::vector<std::vector<std::size_t>> assignments;
    std::vector<std::size_t> sizes;
    std::vector<LabelHistogram> label_histograms;

    std::size_t clients() const noexcept { return assignments.size(); }
};

/// Dirichlet label-skew partition.
///
/// For each class, client proportions are drawn from a symmetric
/// Dirichlet(alpha) and that class's shuffled rows are cut accordingly. Any
/// client left under min_per_client then receives rows from the currently
/// largest client (lowest id on ties).
inline ClientPartition partition_non_iid(const Dataset& train, std::size_t k, double alpha,
                                         std::size_t min_per_client, SeededRng& rng) {
    if (k < 1) throw std::invalid_argument("partition_non_iid: need at least one client");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("partition_non_iid: alpha must be > 0");
    if (min_per_client < 1) min_per_client = 1;
    if (k * min_per_client > train.size())
        throw std::invalid_argument("partition_non_iid: " + std::to_string(k) + " clients x " +
                                    std::to_string(min_per_client) + " samples exceeds training set of " +
                                    std::to_string(train.size()));

    std::vector<std::vector<std::size_t>> clients(k);
    for (int c = 0; c < 2; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < train.size(); ++i)
            if (train.label(i) == c) idx.push_back(i);
        rng.shuffle(idx);
        const auto props = rng.dirichlet(alpha, k);
        double cumulative = 0.0;
        std::size_t start = 0;
        for (std::size_t j = 0; j < k; ++j) {
            cumulative += props[j];
            std::size_t end = j + 1 == k ? idx.size()
                                         : static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(idx.size())));
            end = std::clamp(end, start, idx.size());
            clients[j].insert(clients[j].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                              idx.begin() + static_cast<std::ptrdiff_t>(end));
            start = end;
        }
    }

    for (;;) {
        auto small = std::find_if(clients.begin(), clients.end(),
                                  [&](const auto& v) { return v.size() < min_per_client; });
        if (small == clients.end()) break;
        auto largest = std::max_element(clients.begin(), clients.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        small->push_back(largest->back());
        largest->pop_back();
    }

    ClientPartition p;
    for (auto& rows : clients) {
        std::sort(rows.begin(), rows.end());
        p.sizes.push_back(rows.size());
        p.label_histograms.push_back(label_histogram(train, rows));
    }
    p.assignments = std::move(clients);
    return p;
}

/// Largest total-variation distance of any client's label histogram from the
/// training set's.
inline double max_client_skew(const ClientPartition& p, const Dataset& train) {
    const auto global = label_histogram(train);
    double worst = 0.0;
    for (const auto& h : p.label_histograms) worst = std::max(worst, total_variation(h, global));
    return worst;
}

/// CSV with header f0..f{d-1},label. Values use round-trip precision.
inline void write_dataset_csv(const Dataset& d, std::ostream& out) {
    for (std::size_t i = 0; i < d.dim(); ++i) out << 'f' << i << ',';
    out << "label\n";
    char buf[32];
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (double x : d.row(r)) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << buf << ',';
        }
        out << d.label(r) << '\n';
    }
}

inline Dataset read_dataset_csv(std::istream& in, std::string name) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: missing header");
    const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (dim == 0 || line.substr(line.rfind(',') + 1) != "label")
        throw std::invalid_argument("dataset csv: header must be f0..f{d-1},label");
    std::vector<double> features;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t i = 0; i < dim; ++i) {
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument("dataset csv: short row");
            features.push_back(std::stod(cell));
        }
        if (!std::getline(ss, cell, ',')) throw std::invalid_argument("dataset csv: missing label");
        labels.push_back(std::stoi(cell));
    }
    return Dataset(std::move(name), dim, std::move(features), std::move(labels));
}

}  // namespace fedhpo
