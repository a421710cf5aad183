#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedhpo/dataset.hpp"
#include "fedhpo/metrics.hpp"
#include "fedhpo/rng.hpp"
#include "fedhpo/search_space.hpp"

namespace fedhpo {

/// Logistic regression or a one-hidden-layer tanh MLP.
struct ModelKind {
    enum class Family { Logistic, Mlp };

    Family family = Family::Logistic;
    std::size_t hidden_units = 0;

    static ModelKind logistic() { return {Family::Logistic, 0}; }
    static ModelKind mlp(std::size_t hidden) {
        if (hidden < 1) throw std::invalid_argument("ModelKind: MLP needs hidden_units >= 1");
        return {Family::Mlp, hidden};
    }

    /// "logistic" or "mlp<hidden>", e.g. "mlp8".
    std::string name() const {
        return family == Family::Logistic ? "logistic" : "mlp" + std::to_string(hidden_units);
    }

    /// Accepts "logistic", "mlp8", "mlp:8".
    static ModelKind parse(const std::string& text) {
        if (text == "logistic") return logistic();
        if (text.rfind("mlp", 0) == 0) {
            std::string digits = text.substr(3);
            if (!digits.empty() && digits.front() == ':') digits.erase(0, 1);
            if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
                throw std::invalid_argument("model kind: bad hidden width in '" + text + "'");
            return mlp(std::stoul(digits));
        }
        throw std::invalid_argument("model kind: unknown '" + text + "'");
    }

    friend bool operator==(const ModelKind&, const ModelKind&) = default;
};

/// Shape of a flat parameter vector.
///
/// Logistic: [w (d), b]. MLP: [W1 (h x d, row-major), b1 (h), w2 (h), b2].
struct ModelLayout {
    ModelKind kind;
    std::size_t input_dim = 1;

    std::size_t size() const noexcept {
        if (kind.family == ModelKind::Family::Logistic) return input_dim + 1;
        const std::size_t h = kind.hidden_units;
        return input_dim * h + h + h + 1;
    }

    friend bool operator==(const ModelLayout&, const ModelLayout&) = default;
};

struct ParameterVector {
    std::vector<double> values;
    ModelLayout layout;

    std::size_t size() const noexcept { return values.size(); }
    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

/// Raised when a forward or backward pass produces NaN/inf.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, double param_magnitude)
        : std::runtime_error(what + " (max |param| = " + std::to_string(param_magnitude) + ")"),
          magnitude_(param_magnitude) {}

    double param_magnitude() const noexcept { return magnitude_; }

private:
    double magnitude_;
};

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Weights ~ N(0, 1/fan_in), biases zero.
inline ParameterVector init_model(const ModelKind& kind, std::size_t input_dim, SeededRng& rng) {
    if (input_dim < 1) throw std::invalid_argument("init_model: input_dim must be >= 1");
    ParameterVector p{{}, {kind, input_dim}};
    p.values.assign(p.layout.size(), 0.0);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    if (kind.family == ModelKind::Family::Logistic) {
        for (std::size_t i = 0; i < input_dim; ++i) p.values[i] = rng.normal(0.0, in_scale);
        return p;
    }
    const std::size_t h = kind.hidden_units;
    for (std::size_t i = 0; i < h * input_dim; ++i) p.values[i] = rng.normal(0.0, in_scale);
    const double hidden_scale = 1.0 / std::sqrt(static_cast<double>(h));
    const std::size_t w2 = h * input_dim + h;
    for (std::size_t j = 0; j < h; ++j) p.values[w2 + j] = rng.normal(0.0, hidden_scale);
    return p;
}

namespace detail {

/// Numerically stable binary cross-entropy with logits.
inline double bce_with_logit(double z, int y) {
    return std::max(z, 0.0) - z * static_cast<double>(y) + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Logit for one sample. When hidden is non-empty it receives tanh activations.
inline double forward(const ParameterVector& p, std::span<const double> x, std::span<double> hidden) {
    const auto& v = p.values;
    const std::size_t d = p.layout.input_dim;
    if (p.layout.kind.family == ModelKind::Family::Logistic) {
        double z = v[d];
        for (std::size_t i = 0; i < d; ++i) z += v[i] * x[i];
        return z;
    }
    const std::size_t h = p.layout.kind.hidden_units;
    const std::size_t b1 = h * d, w2 = b1 + h, b2 = w2 + h;
    double z = v[b2];
    for (std::size_t j = 0; j < h; ++j) {
        double pre = v[b1 + j];
        const double* w = v.data() + j * d;
        for (std::size_t i = 0; i < d; ++i) pre += w[i] * x[i];
        const double a = std::tanh(pre);
        hidden[j] = a;
        z += v[w2 + j] * a;
    }
    return z;
}

inline void check_input(const ParameterVector& p, const Dataset& data) {
    if (p.values.size() != p.layout.size()) throw std::invalid_argument("parameter vector does not match its layout");
    if (data.dim() != p.layout.input_dim) throw std::invalid_argument("feature dimension does not match the model");
}

}  // namespace detail

struct LossAndGradient {
    double loss = 0.0;
    ParameterVector grad;
};

/// Mean binary cross-entropy over the selected rows and its gradient.
inline LossAndGradient loss_and_gradient(const ParameterVector& params, const Dataset& data,
                                         std::span<const std::size_t> rows) {
    detail::check_input(params, data);
    if (rows.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");

    LossAndGradient out{0.0, {std::vector<double>(params.size(), 0.0), params.layout}};
    auto& g = out.grad.values;
    const auto& v = params.values;
    const std::size_t d = params.layout.input_dim;
    const bool mlp = params.layout.kind.family == ModelKind::Family::Mlp;
    const std::size_t h = params.layout.kind.hidden_units;
    std::vector<double> hidden(h);
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    for (auto r : rows) {
        const auto x = data.row(r);
        const int y = data.label(r);
        const double z = detail::forward(params, x, hidden);
        out.loss += detail::bce_with_logit(z, y);
        const double dz = (detail::sigmoid(z) - static_cast<double>(y)) * inv_n;
        if (!mlp) {
            for (std::size_t i = 0; i < d; ++i) g[i] += dz * x[i];
            g[d] += dz;
            continue;
        }
        const std::size_t b1 = h * d, w2 = b1 + h, b2 = w2 + h;
        g[b2] += dz;
        for (std::size_t j = 0; j < h; ++j) {
            const double a = hidden[j];
            g[w2 + j] += dz * a;
            const double dpre = dz * v[w2 + j] * (1.0 - a * a);
            g[b1 + j] += dpre;
            double* gw = g.data() + j * d;
            for (std::size_t i = 0; i < d; ++i) gw[i] += dpre * x[i];
        }
    }
    out.loss *= inv_n;

    if (!std::isfinite(out.loss) || !out.grad.all_finite())
        throw NonFiniteError("loss_and_gradient: non-finite loss or gradient", max_abs(v));
    return out;
}

inline LossAndGradient loss_and_gradient(const ParameterVector& params, const Dataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return loss_and_gradient(params, data, rows);
}

/// Mean binary cross-entropy over the whole set, without a gradient.
inline double mean_loss(const ParameterVector& params, const Dataset& data) {
    detail::check_input(params, data);
    if (data.empty()) throw std::invalid_argument("mean_loss: empty dataset");
    std::vector<double> hidden(params.layout.kind.hidden_units);
    double total = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r)
        total += detail::bce_with_logit(detail::forward(params, data.row(r), hidden), data.label(r));
    return total / static_cast<double>(data.size());
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Moments are empty for SGD.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Sgd;
    std::size_t step_count = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    static OptimizerState fresh(OptimizerKind kind, std::size_t n_params) {
        OptimizerState s{kind, 0, {}, {}};
        if (kind == OptimizerKind::Adam) {
            s.first_moment.assign(n_params, 0.0);
            s.second_moment.assign(n_params, 0.0);
        }
        return s;
    }
};

/// In-place update: SGD, or bias-corrected Adam.
inline void apply_update(std::span<double> params, std::span<const double> grad, OptimizerState& state, double lr) {
    if (params.size() != grad.size()) throw std::invalid_argument("optimizer step: shape mismatch");
    ++state.step_count;
    if (state.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
        return;
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw std::invalid_argument("optimizer step: Adam moments do not match parameters");
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& s = state.second_moment[i];
        m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad[i];
        s = kAdamBeta2 * s + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        params[i] -= lr * (m / c1) / (std::sqrt(s / c2) + kAdamEpsilon);
    }
}

inline std::pair<ParameterVector, OptimizerState> optimizer_step(ParameterVector params,
                                                                 const ParameterVector& grad,
                                                                 OptimizerState state, double lr) {
    if (params.layout != grad.layout) throw std::invalid_argument("optimizer step: layouts differ");
    apply_update(params.values, grad.values, state, lr);
    return {std::move(params), std::move(state)};
}

/// Mini-batch training from a fresh optimizer state.
///
/// Each epoch shuffles row indices with rng and walks them in chunks of
/// config.batch_size; the last chunk may be short. If final_state is given it
/// receives the optimizer state after the last step.
inline ParameterVector train_epochs(ParameterVector params, const Dataset& data, const Configuration& config,
                                    std::size_t epochs, SeededRng& rng, OptimizerState* final_state = nullptr) {
    detail::check_input(params, data);
    if (config.batch_size < 1) throw std::invalid_argument("train_epochs: batch_size must be >= 1");
    OptimizerState state = OptimizerState::fresh(config.optimizer, params.size());
    if (epochs > 0 && data.empty()) throw std::invalid_argument("train_epochs: empty dataset");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            const auto step = loss_and_gradient(params, data, std::span<const std::size_t>(order).subspan(start, len));
            apply_update(params.values, step.grad.values, state, config.learning_rate);
        }
        if (!params.all_finite()) throw NonFiniteError("train_epochs: parameters diverged", max_abs(params.values));
    }
    if (final_state) *final_state = std::move(state);
    return params;
}

/// Predicted labels, thresholding the probability at 0.5 (logit >= 0 -> 1).
inline std::vector<int> predict(const ParameterVector& params, const Dataset& data) {
    detail::check_input(params, data);
    std::vector<double> hidden(params.layout.kind.hidden_units);
    std::vector<int> out(data.size());
    for (std::size_t r = 0; r < data.size(); ++r) out[r] = detail::forward(params, data.row(r), hidden) >= 0.0;
    return out;
}

inline MetricsReport evaluate(const ParameterVector& params, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const auto predicted = predict(params, data);
    return metrics_from_confusion(confusion_from(data.labels(), predicted));
}

}  // namespace fedhpo
