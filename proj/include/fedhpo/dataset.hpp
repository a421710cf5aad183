#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedhpo {

/// Labeled binary-classification samples. Features are stored row-major.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::string name, std::size_t dim, std::vector<double> features, std::vector<int> labels)
        : name_(std::move(name)), dim_(dim), features_(std::move(features)), labels_(std::move(labels)) {
        if (dim_ == 0) throw std::invalid_argument("Dataset: feature dimension must be >= 1");
        if (features_.size() != dim_ * labels_.size())
            throw std::invalid_argument("Dataset: feature matrix and label count disagree");
        for (int y : labels_)
            if (y != 0 && y != 1) throw std::invalid_argument("Dataset: labels must be 0 or 1");
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
    int label(std::size_t i) const { return labels_[i]; }

    const std::vector<double>& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }

    std::size_t count_label(int y) const {
        std::size_t n = 0;
        for (int v : labels_) n += (v == y);
        return n;
    }

    /// Rows at the given indices, in the given order.
    Dataset subset(std::span<const std::size_t> indices, std::string name = {}) const {
        std::vector<double> f;
        std::vector<int> l;
        f.reserve(indices.size() * dim_);
        l.reserve(indices.size());
        for (auto i : indices) {
            if (i >= size()) throw std::out_of_range("Dataset::subset: index out of range");
            auto r = row(i);
            f.insert(f.end(), r.begin(), r.end());
            l.push_back(labels_[i]);
        }
        return Dataset(name.empty() ? name_ : std::move(name), dim_, std::move(f), std::move(l));
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::string name_;
    std::size_t dim_ = 1;
    std::vector<double> features_;
    std::vector<int> labels_;
};

/// Row-wise concatenation. Every part must share the feature dimension.
inline Dataset concat(std::span<const Dataset> parts, std::string name) {
    if (parts.empty()) throw std::invalid_argument("concat: no datasets");
    const std::size_t dim = parts.front().dim();
    std::vector<double> f;
    std::vector<int> l;
    for (const auto& p : parts) {
        if (p.dim() != dim) throw std::invalid_argument("concat: feature dimensions differ");
        f.insert(f.end(), p.features().begin(), p.features().end());
        l.insert(l.end(), p.labels().begin(), p.labels().end());
    }
    return Dataset(std::move(name), dim, std::move(f), std::move(l));
}

}  // namespace fedhpo
