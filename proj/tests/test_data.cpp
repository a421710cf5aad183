#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fedhpo/data.hpp"
#include "fedhpo/models.hpp"

using namespace fedhpo;

namespace {

Dataset labeled(std::size_t n_pos, std::size_t n_neg, SeededRng& rng) {
    std::vector<int> y(n_pos + n_neg, 0);
    std::fill_n(y.begin(), n_pos, 1);
    rng.shuffle(y);
    std::vector<double> f(y.size());
    std::iota(f.begin(), f.end(), 0.0);  // feature = original row index
    return Dataset("labeled", 1, std::move(f), std::move(y));
}

void expect_partition_of(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
    std::vector<std::size_t> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    EXPECT_EQ(all, expected);
}

}  // namespace

TEST(GenTask, ExactPositiveCount) {
    SeededRng rng(1);
    const auto d = gen_task({"ovary-like", 498, 0.5, TaskDifficulty::Linear, 4, 1.0}, rng);
    EXPECT_EQ(d.size(), 498u);
    EXPECT_EQ(d.count_label(1), 249u);
    EXPECT_EQ(d.count_label(0), 249u);
    SeededRng rng2(2);
    const auto r = gen_task({"r", 101, 0.3, TaskDifficulty::Rings, 3, 0.1}, rng2);
    EXPECT_EQ(r.count_label(1), 30u);
    EXPECT_EQ(r.dim(), 3u);
}

TEST(GenTask, NoiselessLinearIsSeparable) {
    SeededRng gen(3);
    const auto d = gen_task({"lin", 120, 0.5, TaskDifficulty::Linear, 3, 0.0}, gen);
    SeededRng rng(4);
    auto p = init_model(ModelKind::logistic(), 3, rng);
    p = train_epochs(p, d, {0.1, OptimizerKind::Sgd, 16}, 20, rng);
    EXPECT_EQ(evaluate(p, d).f1, 1.0);
}

TEST(GenTask, RingsRadiiSeparateClasses) {
    SeededRng gen(5);
    const auto d = gen_task({"rings", 200, 0.5, TaskDifficulty::Rings, 2, 0.0}, gen);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto x = d.row(i);
        EXPECT_NEAR(std::hypot(x[0], x[1]), d.label(i) ? kOuterRadius : kInnerRadius, 1e-12);
    }
}

TEST(GenTask, Deterministic) {
    const TaskSpec spec{"t", 80, 0.4, TaskDifficulty::Rings, 4, 0.2};
    SeededRng a(6), b(6);
    EXPECT_EQ(gen_task(spec, a), gen_task(spec, b));
}

TEST(GenTask, RejectsInvalidSpec) {
    SeededRng rng(0);
    EXPECT_THROW(gen_task({"t", 9, 0.5, TaskDifficulty::Linear, 2, 1.0}, rng), std::invalid_argument);
    EXPECT_THROW(gen_task({"t", 50, 1.0, TaskDifficulty::Linear, 2, 1.0}, rng), std::invalid_argument);
    EXPECT_THROW(gen_task({"t", 50, 0.5, TaskDifficulty::Linear, 0, 1.0}, rng), std::invalid_argument);
}

TEST(StratifiedSplit, BalancedHundred) {
    SeededRng rng(7);
    const auto d = labeled(50, 50, rng);
    const auto s = stratified_split(d, {0.8, 0.2}, rng);
    EXPECT_EQ(s.test.size(), 20u);
    EXPECT_EQ(s.test.count_label(1), 10u);
    EXPECT_EQ(s.val.size(), 16u);
    EXPECT_EQ(s.val.count_label(1), 8u);
    EXPECT_EQ(s.train.size(), 64u);
    EXPECT_EQ(s.train.count_label(1), 32u);
}

TEST(StratifiedSplit, ImbalancedTwoHundred) {
    SeededRng rng(8);
    const auto d = labeled(140, 60, rng);
    const auto s = stratified_split(d, {0.8, 0.2}, rng);
    EXPECT_EQ(s.test.size(), 40u);
    EXPECT_NEAR(static_cast<double>(s.test.count_label(1)), 28.0, 1.0);
}

TEST(StratifiedSplit, PartitionsTheInputWithMatchingProportions) {
    SeededRng rng(9);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t pos = 5 + rng.uniform_index(100), neg = 5 + rng.uniform_index(100);
        const auto d = labeled(pos, neg, rng);
        const SplitSpec spec{0.6 + 0.3 * rng.uniform01(), 0.1 + 0.3 * rng.uniform01()};
        const auto s = stratified_split(d, spec, rng);
        expect_partition_of({s.train_rows, s.val_rows, s.test_rows}, d.size());
        // Rows carry their original index as the feature.
        for (std::size_t i = 0; i < s.test.size(); ++i) EXPECT_EQ(s.test.row(i)[0], static_cast<double>(s.test_rows[i]));

        for (int c = 0; c < 2; ++c) {
            const double n_c = static_cast<double>(c ? pos : neg);
            const double expected_test = (1.0 - spec.train_fraction) * n_c;
            EXPECT_LE(std::abs(static_cast<double>(s.test.count_label(c)) - expected_test), 1.0);
            const double remainder = n_c - static_cast<double>(s.test.count_label(c));
            EXPECT_LE(std::abs(static_cast<double>(s.val.count_label(c)) - spec.val_fraction_of_train * remainder), 1.0);
            EXPECT_GE(s.train.count_label(c), 1u);
        }
    }
}

TEST(StratifiedSplit, TinyClassIsAnError) {
    SeededRng rng(10);
    EXPECT_THROW(stratified_split(labeled(2, 40, rng), {0.8, 0.2}, rng), std::invalid_argument);
    EXPECT_NO_THROW(stratified_split(labeled(3, 40, rng), {0.8, 0.2}, rng));
}

TEST(PartitionNonIid, SingleClientIsIdentity) {
    SeededRng rng(11);
    const auto d = labeled(30, 70, rng);
    const auto p = partition_non_iid(d, 1, 0.5, 1, rng);
    ASSERT_EQ(p.clients(), 1u);
    EXPECT_EQ(p.sizes[0], 100u);
    EXPECT_EQ(p.label_histograms[0], label_histogram(d));
}

TEST(PartitionNonIid, InvariantsHoldOnRandomInputs) {
    SeededRng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const auto d = labeled(10 + rng.uniform_index(200), 10 + rng.uniform_index(200), rng);
        const std::size_t k = 1 + rng.uniform_index(8);
        const double alpha = std::pow(10.0, rng.uniform(-2.0, 3.0));
        const std::size_t min_per = 1 + rng.uniform_index(d.size() / k);
        const auto p = partition_non_iid(d, k, alpha, min_per, rng);
        expect_partition_of(p.assignments, d.size());
        ASSERT_EQ(p.sizes.size(), k);
        EXPECT_EQ(std::accumulate(p.sizes.begin(), p.sizes.end(), std::size_t{0}), d.size());
        for (std::size_t j = 0; j < k; ++j) {
            EXPECT_EQ(p.sizes[j], p.assignments[j].size());
            EXPECT_GE(p.sizes[j], min_per);
            EXPECT_TRUE(std::is_sorted(p.assignments[j].begin(), p.assignments[j].end()));
            EXPECT_EQ(p.label_histograms[j], label_histogram(d, p.assignments[j]));
        }
    }
}

TEST(PartitionNonIid, LargeAlphaIsNearIid) {
    int pass = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng rng(seed);
        const auto d = labeled(320, 320, rng);
        const auto p = partition_non_iid(d, 4, 1e6, 8, rng);
        pass += max_client_skew(p, d) <= 0.05;
    }
    EXPECT_GE(pass, 95);
}

TEST(PartitionNonIid, SmallAlphaIsMoreSkewed) {
    double skew_small = 0.0, skew_large = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SeededRng base(seed);
        const auto d = labeled(320, 320, base);
        SeededRng a(seed * 2 + 1), b(seed * 2 + 1);
        skew_small += max_client_skew(partition_non_iid(d, 4, 0.1, 8, a), d);
        skew_large += max_client_skew(partition_non_iid(d, 4, 1e6, 8, b), d);
    }
    EXPECT_GT(skew_small / 100.0, skew_large / 100.0);
}

TEST(PartitionNonIid, InfeasibleMinimumIsAnError) {
    SeededRng rng(13);
    const auto d = labeled(10, 10, rng);
    EXPECT_THROW(partition_non_iid(d, 5, 1.0, 5, rng), std::invalid_argument);
    EXPECT_THROW(partition_non_iid(d, 0, 1.0, 1, rng), std::invalid_argument);
    EXPECT_NO_THROW(partition_non_iid(d, 5, 1.0, 4, rng));
}

TEST(PartitionNonIid, Deterministic) {
    SeededRng g(14);
    const auto d = labeled(100, 60, g);
    SeededRng a(15), b(15);
    const auto pa = partition_non_iid(d, 5, 0.3, 4, a);
    const auto pb = partition_non_iid(d, 5, 0.3, 4, b);
    EXPECT_EQ(pa.assignments, pb.assignments);
}

TEST(DatasetCsv, RoundTripsExactly) {
    SeededRng rng(16);
    const auto d = gen_task({"csv", 30, 0.5, TaskDifficulty::Rings, 3, 0.4}, rng);
    std::stringstream ss;
    write_dataset_csv(d, ss);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "f0,f1,f2,label");
    EXPECT_EQ(read_dataset_csv(ss, "csv"), d);
}

TEST(Dataset, RejectsBadLabelsAndShapes) {
    EXPECT_THROW(Dataset("x", 1, {1.0}, {2}), std::invalid_argument);
    EXPECT_THROW(Dataset("x", 2, {1.0}, {1}), std::invalid_argument);
}
