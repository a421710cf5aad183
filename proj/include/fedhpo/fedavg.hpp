#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedhpo/data.hpp"
#include "fedhpo/dataset.hpp"
#include "fedhpo/metrics.hpp"
#include "fedhpo/models.hpp"
#include "fedhpo/rng.hpp"
#include "fedhpo/search_space.hpp"

namespace fedhpo {

struct FederatedConfig {
    std::size_t rounds = 3;
    std::size_t local_epochs = 50;
    Configuration config;
    ModelKind model_kind = ModelKind::logistic();
    /// Fraction of clients sampled each round; 1.0 is full participation.
    double participation = 1.0;
    /// Run client updates of a round on separate threads.
    bool parallel_clients = true;

    void validate() const {
        if (rounds < 1) throw std::invalid_argument("FederatedConfig: rounds must be >= 1");
        if (local_epochs < 1) throw std::invalid_argument("FederatedConfig: local_epochs must be >= 1");
        if (!(participation > 0.0 && participation <= 1.0))
            throw std::invalid_argument("FederatedConfig: participation must be in (0, 1]");
    }
};

struct ClientUpdate {
    std::size_t client_id = 0;
    ParameterVector params;
    std::size_t n_k = 0;
    /// Mean training loss on the client's data after local training.
    double local_loss = 0.0;
};

struct RoundLog {
    std::size_t round = 0;
    MetricsReport test_metrics;
    std::vector<double> client_losses;

    double mean_client_loss() const {
        if (client_losses.empty()) return 0.0;
        return std::accumulate(client_losses.begin(), client_losses.end(), 0.0) /
               static_cast<double>(client_losses.size());
    }
};

/// One client's round: copy the global model and train local_epochs epochs
/// with a fresh optimizer state.
inline ClientUpdate local_update(const ParameterVector& global_params, const Dataset& client_data,
                                 const FederatedConfig& fc, SeededRng& rng, std::size_t client_id = 0) {
    if (client_data.empty()) throw std::invalid_argument("local_update: client has no data");
    ClientUpdate u;
    u.client_id = client_id;
    u.n_k = client_data.size();
    u.params = train_epochs(global_params, client_data, fc.config, fc.local_epochs, rng);
    u.local_loss = mean_loss(u.params, client_data);
    return u;
}

/// Sample-weighted mean of client parameters, theta = sum_k n_k / N * theta_k.
///
/// Updates are ordered by client_id before summation, so the result does not
/// depend on input order. The sum is accumulated as offsets from the first
/// update, which makes identical updates aggregate to themselves exactly.
inline ParameterVector aggregate(std::vector<ClientUpdate> updates) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no client updates");
    std::stable_sort(updates.begin(), updates.end(),
                     [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });

    const ModelLayout& layout = updates.front().params.layout;
    std::size_t total = 0;
    for (const auto& u : updates) {
        if (u.params.layout != layout || u.params.size() != updates.front().params.size())
            throw std::invalid_argument("aggregate: client parameter layouts differ");
        if (u.n_k == 0) throw std::invalid_argument("aggregate: client with zero samples");
        total += u.n_k;
    }

    std::vector<double> weights;
    weights.reserve(updates.size());
    for (const auto& u : updates) weights.push_back(static_cast<double>(u.n_k) / static_cast<double>(total));
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(weight_sum - 1.0) >= 1e-12) throw std::logic_error("aggregate: weights do not sum to one");

    const auto& base = updates.front().params.values;
    ParameterVector out{base, layout};
    for (std::size_t i = 0; i < out.size(); ++i) {
        double offset = 0.0;
        for (std::size_t k = 1; k < updates.size(); ++k) offset += weights[k] * (updates[k].params.values[i] - base[i]);
        out.values[i] = base[i] + offset;
    }
    return out;
}

/// Stream seed for client k in round t.
inline std::uint64_t client_seed(std::uint64_t base, std::size_t round, std::size_t client_id) {
    return derive_seed(base, "client", {round, client_id});
}

struct FederatedRun {
    ParameterVector initial;
    ParameterVector final_params;
    std::vector<RoundLog> rounds;
};

/// Clients taking part in a round; every client when participation is 1.
inline std::vector<std::size_t> participating_clients(std::size_t k, double participation, std::uint64_t base,
                                                      std::size_t round) {
    std::vector<std::size_t> ids(k);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    if (participation >= 1.0) return ids;
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(participation * static_cast<double>(k))));
    SeededRng pick(derive_seed(base, "participation", {round}));
    pick.shuffle(ids);
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// FedAvg round loop.
///
/// theta(1) comes from init_model seeded by rng; each round broadcasts the
/// global model, collects the participating clients' local updates, aggregates
/// them and evaluates the new global model on test.
inline FederatedRun run_federated(const ClientPartition& partition, const Dataset& train, const Dataset& test,
                                  const FederatedConfig& fc, SeededRng& rng) {
    fc.validate();
    if (partition.clients() == 0) throw std::invalid_argument("run_federated: empty partition");
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < partition.clients(); ++k) {
        if (partition.assignments[k].empty()) throw std::invalid_argument("run_federated: client without data");
        for (auto r : partition.assignments[k])
            if (r >= train.size()) throw std::invalid_argument("run_federated: partition does not match training set");
        assigned += partition.assignments[k].size();
    }
    if (assigned != train.size()) throw std::invalid_argument("run_federated: partition does not cover training set");

    std::vector<Dataset> client_data;
    client_data.reserve(partition.clients());
    for (const auto& rows : partition.assignments) client_data.push_back(train.subset(rows));

    SeededRng init_rng(derive_seed(rng.next_u64(), "init"));
    const std::uint64_t base = rng.next_u64();

    FederatedRun run;
    run.initial = init_model(fc.model_kind, train.dim(), init_rng);
    ParameterVector global = run.initial;

    for (std::size_t t = 1; t <= fc.rounds; ++t) {
        const auto ids = participating_clients(partition.clients(), fc.participation, base, t);
        auto train_client = [&](std::size_t k) {
            SeededRng crng(client_seed(base, t, k));
            return local_update(global, client_data[k], fc, crng, k);
        };

        std::vector<ClientUpdate> updates;
        updates.reserve(ids.size());
        if (fc.parallel_clients && ids.size() > 1) {
            std::vector<std::future<ClientUpdate>> pending;
            pending.reserve(ids.size());
            for (auto k : ids) pending.push_back(std::async(std::launch::async, train_client, k));
            for (auto& f : pending) updates.push_back(f.get());
        } else {
            for (auto k : ids) updates.push_back(train_client(k));
        }

        RoundLog log;
        log.round = t;
        for (const auto& u : updates) log.client_losses.push_back(u.local_loss);
        global = aggregate(std::move(updates));
        log.test_metrics = evaluate(global, test);
        run.rounds.push_back(std::move(log));
    }
    run.final_params = std::move(global);
    return run;
}

}  // namespace fedhpo
