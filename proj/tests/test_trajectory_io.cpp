#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cfrl/errors.hpp"
#include "cfrl/random.hpp"
#include "cfrl/trajectory.hpp"

using namespace cfrl;

namespace {

std::filesystem::path temp_csv(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("cfrl_test_" + name + ".csv");
}

TrajectoryBatch random_batch(int n, int horizon, int d_z, int d_x, std::uint64_t seed) {
    Rng rng(seed);
    TrajectoryBatch batch;
    batch.horizon = horizon;
    batch.state_dim = d_x;
    batch.zs.resize(n, d_z);
    batch.states.resize(n, static_cast<Eigen::Index>(horizon + 1) * d_x);
    batch.actions.resize(n, horizon);
    batch.rewards.resize(n, horizon);
    for (int i = 0; i < n; ++i) {
        batch.ids.push_back("id-" + std::to_string(i));
        for (int k = 0; k < d_z; ++k) batch.zs(i, k) = rng.uniform_index(2);
        for (Eigen::Index c = 0; c < batch.states.cols(); ++c)
            batch.states(i, c) = rng.normal();
        for (int t = 0; t < horizon; ++t) {
            batch.actions(i, t) = static_cast<int>(rng.uniform_index(3));
            batch.rewards(i, t) = rng.normal() * 10.0;
        }
    }
    for (int k = 0; k < d_z; ++k) batch.z_labels.push_back("z" + std::to_string(k + 1));
    for (int k = 0; k < d_x; ++k) batch.state_labels.push_back("state" + std::to_string(k + 1));
    return batch;
}

void expect_batches_equal(const TrajectoryBatch& a, const TrajectoryBatch& b) {
    ASSERT_EQ(a.num_individuals(), b.num_individuals());
    ASSERT_EQ(a.horizon, b.horizon);
    ASSERT_EQ(a.state_dim, b.state_dim);
    EXPECT_EQ(a.ids, b.ids);
    EXPECT_EQ(a.zs, b.zs);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.actions, b.actions);
    EXPECT_EQ(a.rewards, b.rewards);
}

}  // namespace

TEST(TrajectoryCsv, RoundTripIsExact) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        TrajectoryBatch batch = random_batch(17, 4, 2, 3, seed);
        auto path = temp_csv("roundtrip");
        write_trajectory_to_csv(batch, path.string());
        TrajectoryBatch back = read_trajectory_from_csv(
            path.string(), batch.z_labels, batch.state_labels, "action", "reward", "id", 4);
        expect_batches_equal(batch, back);
        std::filesystem::remove(path);
    }
}

TEST(TrajectoryCsv, QuotedIdsSurvive) {
    TrajectoryBatch batch = random_batch(2, 1, 1, 1, 9);
    batch.ids[0] = "weird,\"id\"";
    auto path = temp_csv("quoted");
    write_trajectory_to_csv(batch, path.string());
    TrajectoryBatch back = read_trajectory_from_csv(path.string(), batch.z_labels,
                                                    batch.state_labels, "action", "reward", "id", 1);
    expect_batches_equal(batch, back);
    std::filesystem::remove(path);
}

TEST(TrajectoryCsv, MinimalBatchWritesTerminalRowWithEmptyCells) {
    TrajectoryBatch batch = random_batch(1, 1, 1, 1, 5);
    auto path = temp_csv("minimal");
    write_trajectory_to_csv(batch, path.string());

    std::ifstream in(path);
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    EXPECT_EQ(header, "id,time,z1,state1,action,reward");
    EXPECT_EQ(row1.substr(row1.size() - 2), ",,");
    std::string extra;
    EXPECT_FALSE(std::getline(in, extra));
    std::filesystem::remove(path);
}

TEST(TrajectoryCsv, PaperSizedBatchHasExpectedShapes) {
    TrajectoryBatch batch = random_batch(500, 10, 1, 1, 33);
    auto path = temp_csv("large");
    write_trajectory_to_csv(batch, path.string());

    std::ifstream in(path);
    std::string line;
    int rows = -1;  // skip header
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 500 * 11);

    TrajectoryBatch back = read_trajectory_from_csv(path.string(), {"z1"}, {"state1"}, "action",
                                                    "reward", "id", 10);
    EXPECT_EQ(back.zs.rows(), 500);
    EXPECT_EQ(back.zs.cols(), 1);
    EXPECT_EQ(back.states.cols(), 11);
    EXPECT_EQ(back.actions.cols(), 10);
    EXPECT_EQ(back.rewards.cols(), 10);
    std::filesystem::remove(path);
}

TEST(TrajectoryCsv, ReaderErrors) {
    auto path = temp_csv("errors");

    {
        std::ofstream out(path);
    }
    EXPECT_THROW(read_trajectory_from_csv(path.string(), {"z1"}, {"x"}, "action", "reward", "id", 2),
                 SchemaError);

    {
        std::ofstream out(path);
        out << "id,time,z1,x,action,reward\n";
        out << "a,0,0,1.0,1,0.5\n";
        out << "a,1,0,1.5,,\n";
    }
    // missing column
    try {
        read_trajectory_from_csv(path.string(), {"z9"}, {"x"}, "action", "reward", "id", 1);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("z9"), std::string::npos);
    }
    // ragged individual
    try {
        read_trajectory_from_csv(path.string(), {"z1"}, {"x"}, "action", "reward", "id", 2);
        FAIL() << "expected RaggedDataError";
    } catch (const RaggedDataError& e) {
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }

    {
        std::ofstream out(path);
        out << "id,time,z1,x,action,reward\n";
        out << "a,0,0,1.0,1.5,0.5\n";
        out << "a,1,0,1.5,,\n";
    }
    // non-integer action, error names the line
    try {
        read_trajectory_from_csv(path.string(), {"z1"}, {"x"}, "action", "reward", "id", 1);
        FAIL() << "expected ValueError";
    } catch (const ValueError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(TrainTestSplit, PaperFractionsAndMinimalCase) {
    TrajectoryBatch batch = random_batch(500, 2, 1, 1, 44);
    auto [train, test] = train_test_split(batch, 0.2, 7);
    EXPECT_EQ(train.num_individuals(), 400);
    EXPECT_EQ(test.num_individuals(), 100);

    TrajectoryBatch two = random_batch(2, 1, 1, 1, 45);
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        auto [a, b] = train_test_split(two, 0.5, seed);
        EXPECT_EQ(a.num_individuals(), 1);
        EXPECT_EQ(b.num_individuals(), 1);
    }

    TrajectoryBatch one = random_batch(1, 1, 1, 1, 46);
    EXPECT_THROW(train_test_split(one, 0.5, 0), SizeError);
}

TEST(TrainTestSplit, SeedReproducibilityAndPartition) {
    TrajectoryBatch batch = random_batch(20, 2, 1, 2, 55);
    auto [a1, b1] = train_test_split(batch, 0.3, 42);
    auto [a2, b2] = train_test_split(batch, 0.3, 42);
    expect_batches_equal(a1, a2);
    expect_batches_equal(b1, b2);

    // different seeds give a different partition with high probability
    bool any_differ = false;
    for (std::uint64_t seed = 0; seed < 5 && !any_differ; ++seed) {
        auto [a3, b3] = train_test_split(batch, 0.3, seed);
        any_differ = b3.ids != b1.ids;
    }
    EXPECT_TRUE(any_differ);

    // the two sides cover every individual exactly once
    std::vector<std::string> all = a1.ids;
    all.insert(all.end(), b1.ids.begin(), b1.ids.end());
    std::sort(all.begin(), all.end());
    std::vector<std::string> expected = batch.ids;
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(all, expected);
}

TEST(TrainTestSplit, ExhaustiveSmallCase) {
    // N=4, fraction 0.5: all seeds must give a 2/2 split covering everything.
    TrajectoryBatch batch = random_batch(4, 1, 1, 1, 66);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto [train, test] = train_test_split(batch, 0.5, seed);
        EXPECT_EQ(train.num_individuals(), 2);
        EXPECT_EQ(test.num_individuals(), 2);
        std::vector<std::string> all = train.ids;
        all.insert(all.end(), test.ids.begin(), test.ids.end());
        std::sort(all.begin(), all.end());
        std::vector<std::string> expected = batch.ids;
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(all, expected);
    }
}
