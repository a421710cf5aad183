#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fedhpo/data.hpp"
#include "fedhpo/fedavg.hpp"
#include "oracles.hpp"

using namespace fedhpo;

namespace {

ClientUpdate update_of(std::size_t id, std::vector<double> values, std::size_t n) {
    const std::size_t dim = values.size() - 1;
    return {id, {std::move(values), {ModelKind::logistic(), dim}}, n, 0.0};
}

ClientPartition whole_as_one_client(const Dataset& d) {
    ClientPartition p;
    p.assignments.emplace_back(d.size());
    std::iota(p.assignments[0].begin(), p.assignments[0].end(), std::size_t{0});
    p.sizes = {d.size()};
    p.label_histograms = {label_histogram(d)};
    return p;
}

Dataset linear_task(std::size_t n, std::uint64_t seed, double noise = 1.0) {
    SeededRng rng(seed);
    return gen_task({"linear", n, 0.5, TaskDifficulty::Linear, 4, noise}, rng);
}

}  // namespace

TEST(Aggregate, SingleUpdateIsReturnedUnchanged) {
    const auto u = update_of(3, {0.25, -1.5, 7.0}, 11);
    EXPECT_EQ(aggregate({u}), u.params);
}

TEST(Aggregate, TwoClientExample) {
    const auto out = aggregate({update_of(0, {1.0, 0.0}, 1), update_of(1, {3.0, 0.0}, 3)});
    EXPECT_DOUBLE_EQ(out.values[0], 2.5);
    EXPECT_EQ(out.values[1], 0.0);
}

TEST(Aggregate, MatchesWeightedMeanOracle) {
    SeededRng rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t k = 5, dim = 6;
        std::vector<ClientUpdate> updates;
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<double> v(dim + 1);
            for (auto& x : v) x = rng.normal(0.0, 3.0);
            updates.push_back(update_of(j, v, 1 + rng.uniform_index(200)));
        }
        const auto out = aggregate(updates);
        std::vector<std::vector<double>> vectors;
        std::vector<std::size_t> counts;
        for (const auto& u : updates) {
            vectors.push_back(u.params.values);
            counts.push_back(u.n_k);
        }
        const auto expected = oracle::weighted_mean(vectors, counts);
        for (std::size_t i = 0; i <= dim; ++i) EXPECT_NEAR(out.values[i], expected[i], 1e-12);
    }
}

TEST(Aggregate, InputOrderDoesNotMatterBitwise) {
    SeededRng rng(22);
    std::vector<ClientUpdate> updates;
    for (std::size_t j = 0; j < 6; ++j) {
        std::vector<double> v(9);
        for (auto& x : v) x = rng.normal();
        updates.push_back(update_of(j, v, 1 + rng.uniform_index(50)));
    }
    const auto reference = aggregate(updates);
    for (int rep = 0; rep < 20; ++rep) {
        rng.shuffle(updates);
        EXPECT_EQ(aggregate(updates), reference);
    }
}

TEST(Aggregate, IdenticalUpdatesAggregateToThemselves) {
    SeededRng rng(23);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(5);
        for (auto& x : v) x = rng.normal(0.0, 10.0);
        std::vector<ClientUpdate> updates;
        const std::size_t k = 1 + rng.uniform_index(7);
        for (std::size_t j = 0; j < k; ++j) updates.push_back(update_of(j, v, 1 + rng.uniform_index(1000)));
        EXPECT_EQ(aggregate(updates).values, v);
    }
}

TEST(Aggregate, RejectsBadInput) {
    EXPECT_THROW(aggregate({}), std::invalid_argument);
    EXPECT_THROW(aggregate({update_of(0, {1.0, 2.0}, 1), update_of(1, {1.0, 2.0, 3.0}, 1)}), std::invalid_argument);
    EXPECT_THROW(aggregate({update_of(0, {1.0, 2.0}, 0)}), std::invalid_argument);
}

TEST(LocalUpdate, ZeroEpochsReturnsTheGlobalModel) {
    const auto d = linear_task(60, 1);
    SeededRng rng(2);
    const auto global = init_model(ModelKind::mlp(8), 4, rng);
    FederatedConfig fc;
    fc.local_epochs = 0;
    fc.config = {1e-3, OptimizerKind::Adam, 16};
    const auto u = local_update(global, d, fc, rng, 4);
    EXPECT_EQ(u.params, global);
    EXPECT_EQ(u.n_k, 60u);
    EXPECT_EQ(u.client_id, 4u);
}

TEST(LocalUpdate, DeterministicAndReducesLoss) {
    const auto d = linear_task(80, 3);
    SeededRng init(4);
    const auto global = init_model(ModelKind::logistic(), 4, init);
    FederatedConfig fc;
    fc.local_epochs = 5;
    fc.config = {1e-2, OptimizerKind::Adam, 16};
    SeededRng a(5), b(5);
    const auto ua = local_update(global, d, fc, a);
    const auto ub = local_update(global, d, fc, b);
    EXPECT_EQ(ua.params, ub.params);
    EXPECT_LT(ua.local_loss, mean_loss(global, d));
    EXPECT_EQ(ua.local_loss, mean_loss(ua.params, d));
}

TEST(RunFederated, OneRoundOneClientEqualsOneLocalUpdate) {
    const auto train = linear_task(100, 6);
    const auto test = linear_task(40, 7);
    FederatedConfig fc;
    fc.rounds = 1;
    fc.local_epochs = 3;
    fc.config = {3e-3, OptimizerKind::Adam, 32};

    SeededRng rng(8);
    const auto run = run_federated(whole_as_one_client(train), train, test, fc, rng);

    // Replay the seed derivation the round loop uses.
    SeededRng replay(8);
    replay.next_u64();
    const std::uint64_t base = replay.next_u64();
    SeededRng crng(client_seed(base, 1, 0));
    const auto u = local_update(run.initial, train, fc, crng, 0);
    EXPECT_EQ(run.final_params, u.params);
    ASSERT_EQ(run.rounds.size(), 1u);
    EXPECT_EQ(run.rounds[0].test_metrics, evaluate(u.params, test));
}

TEST(RunFederated, IdenticalClientsMatchCentralizedFullBatchStep) {
    const auto d = linear_task(50, 9);
    const Dataset parts[] = {d, d, d};
    const auto train = concat(parts, "three-copies");
    ClientPartition p;
    for (std::size_t k = 0; k < 3; ++k) {
        p.assignments.emplace_back(d.size());
        std::iota(p.assignments[k].begin(), p.assignments[k].end(), k * d.size());
        p.sizes.push_back(d.size());
        p.label_histograms.push_back(label_histogram(d));
    }
    FederatedConfig fc;
    fc.rounds = 1;
    fc.local_epochs = 1;
    fc.config = {0.05, OptimizerKind::Sgd, 1000};
    SeededRng rng(10);
    const auto run = run_federated(p, train, d, fc, rng);

    const auto g = loss_and_gradient(run.initial, d);
    for (std::size_t i = 0; i < run.initial.size(); ++i)
        EXPECT_NEAR(run.final_params.values[i], run.initial.values[i] - 0.05 * g.grad.values[i], 1e-10);
}

TEST(RunFederated, IidLinearTaskReachesHighF1) {
    const auto all = linear_task(600, 11);
    std::vector<std::size_t> head(400), tail(200);
    std::iota(head.begin(), head.end(), std::size_t{0});
    std::iota(tail.begin(), tail.end(), std::size_t{400});
    const auto train = all.subset(head);
    const auto test = all.subset(tail);
    SeededRng prng(13);
    const auto p = partition_non_iid(train, 4, 1e6, 8, prng);
    FederatedConfig fc;
    fc.rounds = 3;
    fc.local_epochs = 50;
    fc.config = {1e-3, OptimizerKind::Adam, 16};
    SeededRng rng(14);
    const auto run = run_federated(p, train, test, fc, rng);
    ASSERT_EQ(run.rounds.size(), 3u);
    EXPECT_GE(run.rounds.back().test_metrics.f1, 0.95);
    for (const auto& r : run.rounds) EXPECT_EQ(r.client_losses.size(), 4u);
}

TEST(RunFederated, ParallelAndSerialClientsAgreeBitwise) {
    const auto train = linear_task(160, 15);
    const auto test = linear_task(60, 16);
    SeededRng prng(17);
    const auto p = partition_non_iid(train, 4, 0.5, 8, prng);
    FederatedConfig fc;
    fc.rounds = 2;
    fc.local_epochs = 4;
    fc.model_kind = ModelKind::mlp(8);
    fc.config = {1e-3, OptimizerKind::Adam, 16};

    SeededRng a(18), b(18);
    fc.parallel_clients = true;
    const auto pa = run_federated(p, train, test, fc, a);
    fc.parallel_clients = false;
    const auto pb = run_federated(p, train, test, fc, b);
    EXPECT_EQ(pa.final_params, pb.final_params);
    for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(pa.rounds[t].client_losses, pb.rounds[t].client_losses);
}

TEST(RunFederated, PartialParticipationSamplesClients) {
    const auto ids = participating_clients(10, 0.3, 99, 1);
    EXPECT_EQ(ids.size(), 3u);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(ids, participating_clients(10, 0.3, 99, 1));
    EXPECT_EQ(participating_clients(4, 1.0, 99, 1), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(RunFederated, RejectsMismatchedPartition) {
    const auto train = linear_task(40, 19);
    auto p = whole_as_one_client(train);
    p.assignments[0].pop_back();
    FederatedConfig fc;
    fc.rounds = 1;
    fc.local_epochs = 1;
    SeededRng rng(20);
    EXPECT_THROW(run_federated(p, train, train, fc, rng), std::invalid_argument);
    fc.rounds = 0;
    EXPECT_THROW(run_federated(whole_as_one_client(train), train, train, fc, rng), std::invalid_argument);
}
