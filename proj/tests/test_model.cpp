#include "support/oracles.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>
#include <thread>

using namespace ocm;

namespace {

Matrix random_stochastic(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix p(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            p(i, j) = unit(rng);
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

int idx(int x, int half) { return x + half; }

} // namespace

TEST(NStepMatrix, ZeroStepsIsIdentity) {
    auto m = build_random_walk(0.75, 3, RewardKind::inverse);
    const Matrix p0 = n_step_matrix(m, 1, 0).to_dense();
    EXPECT_TRUE(p0.isApprox(Matrix::Identity(7, 7)));
}

TEST(NStepMatrix, BinomialEntry) {
    auto m = build_random_walk(0.75, 10, RewardKind::inverse);
    EXPECT_NEAR(n_step_matrix(m, 0, 2).coeff(idx(0, 10), idx(2, 10)), 0.5625, 1e-15);
    EXPECT_EQ(n_step_matrix(m, 0, 3).coeff(idx(0, 10), idx(2, 10)), 0.0);
}

TEST(NStepMatrix, InvalidActionThrows) {
    auto m = build_random_walk(0.75, 2, RewardKind::inverse);
    EXPECT_THROW(n_step_matrix(m, 2, 1), ArgumentError);
    EXPECT_THROW(n_step_matrix(m, -1, 1), ArgumentError);
    EXPECT_THROW(n_step_matrix(m, 0, -1), ArgumentError);
}

TEST(NStepMatrix, ChapmanKolmogorov) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> size(2, 8), step(0, 20);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = size(rng);
        OcmModel m({random_stochastic(rng, n)}, Matrix::Zero(n, 1), 0.0, 0.9, 40);
        const int a = step(rng), b = step(rng);
        const Matrix lhs = n_step_matrix(m, 0, a + b).to_dense();
        const Matrix rhs = n_step_matrix(m, 0, a).to_dense() * n_step_matrix(m, 0, b).to_dense();
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
        for (int r = 0; r < n; ++r)
            EXPECT_NEAR(lhs.row(r).sum(), 1.0, (a + b + 1) * 1e-12);
    }
}

TEST(NStepMatrix, MemoizedAndShared) {
    auto m = build_random_walk(0.6, 4, RewardKind::inverse);
    const auto& p5 = n_step_matrix(m, 0, 5);
    EXPECT_EQ(m.cached_powers(0), 6);
    EXPECT_EQ(&p5, &n_step_matrix(m, 0, 5));
    auto copy = m.with_observation_cost(1.0);
    EXPECT_EQ(&p5, &n_step_matrix(copy, 0, 5));
}

TEST(NStepMatrix, ConcurrentFillIsConsistent) {
    auto m = build_random_walk(0.7, 20, RewardKind::inverse);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&m, t] {
            for (int n = 0; n < 30; ++n)
                (void)n_step_matrix(m, t % 2, (n * 7 + t) % 30);
        });
    for (auto& th : pool)
        th.join();
    const Matrix p = m.transition(0).to_dense();
    Matrix expected = Matrix::Identity(41, 41);
    for (int k = 0; k < 17; ++k)
        expected = expected * p;
    EXPECT_LE((n_step_matrix(m, 0, 17).to_dense() - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(NStepMatrix, ParityAwayFromBoundary) {
    const int half = 12;
    auto m = build_random_walk(0.75, half, RewardKind::inverse);
    for (int n = 1; n <= 6; ++n)
        for (int x = -half + n; x <= half - n; ++x)
            for (int y = -half; y <= half; ++y)
                if (((y - x - n) % 2 + 2) % 2 != 0) {
                    EXPECT_EQ(n_step_matrix(m, 0, n).coeff(idx(x, half), idx(y, half)), 0.0);
                }
}

TEST(KernelMatrix, SparseStorageAboveLimit) {
    auto m = build_random_walk(0.75, 300, RewardKind::inverse);
    EXPECT_FALSE(m.transition(0).is_dense());
    auto small = build_random_walk(0.75, 50, RewardKind::inverse);
    EXPECT_TRUE(small.transition(0).is_dense());
    const Matrix dense_p3 = [&] {
        Matrix p = m.transition(0).to_dense();
        return Matrix(p * p * p);
    }();
    EXPECT_LE((n_step_matrix(m, 0, 3).to_dense() - dense_p3).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OpenLoop, ConstantScheduleMatchesPowers) {
    auto m = build_random_walk(0.75, 5, RewardKind::inverse);
    const auto set = OpenLoopActionSet::constant(2);
    for (int a = 0; a < 2; ++a) {
        const Matrix q = open_loop_matrix(m, set, a, 5).to_dense();
        EXPECT_LE((q - n_step_matrix(m, a, 5).to_dense()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(OpenLoop, SingleFactorAndOrderedProduct) {
    auto toy = build_two_state_toy(0.9);
    OpenLoopActionSet set({{0, 1}});
    EXPECT_TRUE(open_loop_matrix(toy, set, 0, 1).to_dense().isApprox(toy.transition(0).to_dense()));
    // [[.9,.1],[0,1]] * [[1,0],[.1,.9]] = [[.91,.09],[.1,.9]]
    Matrix expected(2, 2);
    expected << 0.91, 0.09, 0.1, 0.9;
    EXPECT_LE((open_loop_matrix(toy, set, 0, 2).to_dense() - expected).cwiseAbs().maxCoeff(), 1e-15);
    // repeats the last entry
    OpenLoopActionSet short_set(std::vector<std::vector<int>>{{1}});
    EXPECT_EQ(short_set.action(0, 7), 1);
    EXPECT_THROW(OpenLoopActionSet(std::vector<std::vector<int>>{{0, 3}}).validate(2, 4), ValidationError);
    EXPECT_THROW(set.action(1, 1), ArgumentError);
    EXPECT_THROW(set.action(0, 0), ArgumentError);
}

TEST(Expm, ZeroIsIdentity) {
    EXPECT_TRUE(expm(Matrix::Zero(4, 4)).isApprox(Matrix::Identity(4, 4)));
}

TEST(Expm, TwoStateClosedForm) {
    Matrix q(2, 2);
    q << -1, 1, 1, -1;
    const double e = std::exp(-2.0);
    Matrix expected(2, 2);
    expected << (1 + e) / 2, (1 - e) / 2, (1 - e) / 2, (1 + e) / 2;
    EXPECT_LE((expm(q) - expected).cwiseAbs().maxCoeff(), 1e-10);
    for (double a : {0.1, 2.0, 30.0})
        for (double b : {0.5, 7.0}) {
            Matrix g(2, 2);
            g << -a, a, b, -b;
            EXPECT_LE((expm(g) - oracle::two_state_expm(a, b, 1.0)).cwiseAbs().maxCoeff(), 1e-10);
        }
}

TEST(Expm, BlockDiagonal) {
    Matrix q = Matrix::Zero(4, 4);
    q.block(0, 0, 2, 2) << -1, 1, 3, -3;
    q.block(2, 2, 2, 2) << -0.5, 0.5, 0.25, -0.25;
    const Matrix p = expm(q);
    EXPECT_LE(p.block(0, 2, 2, 2).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((p.block(0, 0, 2, 2) - oracle::two_state_expm(1, 3, 1)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p.block(2, 2, 2, 2) - oracle::two_state_expm(0.5, 0.25, 1)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Expm, SemigroupAndReferenceImplementation) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 2 + trial % 9;
        const Matrix q = oracle::random_generator(rng, n, 3.0);
        const Matrix p = expm(q);
        EXPECT_LE((p * p - expm(2.0 * q)).cwiseAbs().maxCoeff(), 1e-8);
        const Matrix ref = q.exp();
        EXPECT_LE((p - ref).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Expm, RejectsNonGenerators) {
    Matrix bad(2, 2);
    bad << -1, 0.5, 1, -1;
    EXPECT_THROW(expm(bad), ValidationError);
    Matrix neg(2, 2);
    neg << 1, -1, 0, 0;
    EXPECT_THROW(expm(neg), ValidationError);
}

TEST(RateModel, PinnedAbsorbingValue) {
    RateModel rate;
    Matrix q(3, 3);
    q << -1, 0.5, 0.5, 0.2, -0.2, 0, 0, 0, 0;
    rate.generators = {q, q};
    rate.cost = Matrix::Ones(3, 2);
    rate.gamma = 0.9;
    rate.horizon = 5;
    rate.absorbing_states = {2};
    rate.absorbing_loss = 3.0;
    const auto m = to_ocm_model(rate);
    EXPECT_DOUBLE_EQ(*m.pinned_value(2), -30.0);
    EXPECT_FALSE(m.pinned_value(0).has_value());
    EXPECT_DOUBLE_EQ(m.reward(0, 1), -1.0);
    EXPECT_NEAR(m.transition(0).coeff(2, 2), 1.0, 1e-15);
}

TEST(RateModel, SyntheticCtmc) {
    const auto rate = build_synthetic_ctmc();
    ASSERT_EQ(rate.generators.size(), 2u);
    for (const auto& q : rate.generators) {
        ASSERT_EQ(q.rows(), 16);
        EXPECT_LE(q.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j)
                if (i != j) {
                    EXPECT_GE(q(i, j), 0.0);
                }
        EXPECT_EQ(q.row(15).cwiseAbs().maxCoeff(), 0.0);
    }
    const auto m = to_ocm_model(rate);
    EXPECT_EQ(m.num_states(), 16);
    EXPECT_TRUE(m.pinned_value(15).has_value());
    for (int a = 0; a < 2; ++a)
        for (int x = 0; x < 16; ++x) {
            double sum = 0.0;
            m.transition(a).for_each_in_row(x, [&](int, double p) {
                EXPECT_GE(p, -1e-15);
                sum += p;
            });
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
}

TEST(RandomWalk, ReflectingRows) {
    auto m = build_random_walk(0.75, 1, RewardKind::inverse);
    // x = +1 under +1 over (-1, 0, 1)
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(2, 1), 0.25);
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(2, 2), 0.75);
    EXPECT_DOUBLE_EQ(m.transition(1).coeff(0, 0), 0.75);
    EXPECT_DOUBLE_EQ(m.transition(1).coeff(0, 1), 0.25);
}

TEST(RandomWalk, SymmetricAtOneHalf) {
    auto m = build_random_walk(0.5, 6, RewardKind::peak);
    EXPECT_TRUE(m.transition(0).to_dense().isApprox(m.transition(1).to_dense()));
}

TEST(RandomWalk, Rewards) {
    auto m = build_random_walk(0.75, 4, RewardKind::inverse);
    EXPECT_DOUBLE_EQ(m.reward(idx(0, 4), 0), 1.0);
    EXPECT_DOUBLE_EQ(m.reward(idx(3, 4), 1), 0.25);
    EXPECT_DOUBLE_EQ(m.reward(idx(-3, 4), 0), 0.25);
    EXPECT_DOUBLE_EQ(random_walk_reward(RewardKind::peak, 0), 2.0);
    EXPECT_DOUBLE_EQ(random_walk_reward(RewardKind::peak, -2), -1.0);
    EXPECT_DOUBLE_EQ(random_walk_reward(RewardKind::peak, 1), 0.0);
    EXPECT_DOUBLE_EQ(random_walk_reward(RewardKind::peak, 3), 0.0);
    EXPECT_THROW(build_random_walk(1.0, 3, RewardKind::inverse), ArgumentError);
    EXPECT_THROW(build_random_walk(0.0, 3, RewardKind::inverse), ArgumentError);
}

TEST(TwoStateToy, KernelsAndReward) {
    auto m = build_two_state_toy(0.9);
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(0, 0), 0.9);
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(0, 1), 0.1);
    EXPECT_DOUBLE_EQ(m.transition(0).coeff(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(m.reward(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(m.reward(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(m.reward(1, 1), 1.0);
    for (double p : {0.1, 0.37, 0.99})
        for (int a = 0; a < 2; ++a) {
            const Matrix k = build_two_state_toy(p).transition(a).to_dense();
            EXPECT_NEAR(k.row(0).sum(), 1.0, 1e-15);
            EXPECT_NEAR(k.row(1).sum(), 1.0, 1e-15);
        }
}

TEST(OcmModelValidation, ReportsKeyPathAndRow) {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.3, 0.6;
    try {
        OcmModel({Matrix::Identity(2, 2), p}, Matrix::Zero(2, 2), 0.1, 0.9, 5);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.path(), "transition[1]");
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
    const Matrix id = Matrix::Identity(2, 2);
    EXPECT_THROW(OcmModel({id}, Matrix::Zero(2, 1), -0.1, 0.9, 5), ValidationError);
    EXPECT_THROW(OcmModel({id}, Matrix::Zero(2, 1), 0.1, 1.0, 5), ValidationError);
    EXPECT_THROW(OcmModel({id}, Matrix::Zero(2, 1), 0.1, 0.9, 0), ValidationError);
    EXPECT_THROW(OcmModel({id}, Matrix::Zero(3, 1), 0.1, 0.9, 5), ValidationError);
    Matrix g(2, 2);
    g << 1, 0, 0, 0;
    EXPECT_THROW(OcmModel({id, id}, Matrix::Zero(2, 2), 0.1, 0.9, 5, g), ValidationError);
    EXPECT_THROW(OcmModel({id}, Matrix::Zero(2, 1), 0.1, 0.9, 5, Matrix(), {{4, 0.0}}), ValidationError);
}
