#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ocm;

namespace {

struct QuietWarnings : ::testing::Environment {
    void SetUp() override { set_warning_handler(nullptr); }
};
const auto* const quiet = ::testing::AddGlobalTestEnvironment(new QuietWarnings);

Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST(QviLayout, IndexIsBijective) {
    auto m = build_random_walk(0.75, 2, RewardKind::inverse).with_horizon(4);
    QviSystem sys(m);
    std::vector<int> seen(sys.size(), 0);
    for (int n = 1; n <= 4; ++n)
        for (int x = 0; x < 5; ++x)
            for (int a = 0; a < 2; ++a)
                ++seen[sys.index(n, x, a)];
    for (int s : seen)
        EXPECT_EQ(s, 1);
    EXPECT_EQ(sys.index(2, 0, 0), 10u);
    EXPECT_THROW(sys.index(0, 0, 0), ArgumentError);
    EXPECT_THROW(sys.index(5, 0, 0), ArgumentError);
    EXPECT_THROW(sys.index(1, 5, 0), ArgumentError);
    EXPECT_THROW(sys.check_layout(Vector::Zero(3)), ArgumentError);
}

TEST(QviSubstochastic, DiscountedKernelRowSums) {
    auto m = build_random_walk(0.6, 4, RewardKind::inverse).with_horizon(6);
    QviSystem sys(m);
    for (int a = 0; a < 2; ++a)
        for (int n = 1; n <= 6; ++n) {
            const Matrix q = sys.gamma() * sys.kernel(a, n).to_dense();
            for (int x = 0; x < 9; ++x) {
                EXPECT_GE(q.row(x).sum(), 0.0);
                EXPECT_LE(q.row(x).sum(), sys.gamma() + 1e-12);
            }
        }
}

TEST(InspectionValue, ZeroValueFunction) {
    auto m = build_random_walk(0.75, 3, RewardKind::inverse).with_observation_cost(0.0).with_horizon(5);
    QviSystem sys(m);
    const Vector u = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    for (int n = 1; n <= 5; ++n)
        for (int x = 0; x < 7; ++x)
            for (int a = 0; a < 2; ++a) {
                double expected = 0.0;
                for (int xp = 0; xp < 7; ++xp)
                    expected += m.power(a, n).coeff(x, xp) * m.reward().row(xp).maxCoeff();
                EXPECT_NEAR(sys.inspection_value(u, n, x, a), expected, 1e-14);
            }
}

TEST(InspectionValue, ToyHandEvaluation) {
    auto m = build_two_state_toy(0.9, {0.9, 0.1, 10});
    QviSystem sys(m);
    const Vector u = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    EXPECT_NEAR(sys.inspection_value(u, 1, 0, 0), 0.9, 1e-15);
}

TEST(InspectionValue, ProhibitiveSwitchingKeepsControl) {
    std::mt19937_64 rng(3);
    oracle::RandomSpec spec;
    spec.horizon = 5;
    auto base = oracle::random_model(rng, spec);
    auto switching = base.with_switching_cost(1e6);
    QviSystem with_g(switching);
    const Vector u = random_vector(rng, with_g.size());
    for (int n = 1; n <= 5; ++n)
        for (int x = 0; x < spec.states; ++x)
            for (int a = 0; a < 2; ++a) {
                double expected = -spec.observation_cost;
                for (int xp = 0; xp < spec.states; ++xp)
                    expected += base.power(a, n).coeff(x, xp) *
                                (base.gamma() * u[static_cast<Eigen::Index>(with_g.index(1, xp, a))] + base.reward(xp, a));
                EXPECT_NEAR(with_g.inspection_value(u, n, x, a), expected, 1e-12);
            }
}

TEST(InspectionValue, ZeroSwitchingMatchesPlainObstacle) {
    std::mt19937_64 rng(4);
    auto base = oracle::random_model(rng, {});
    QviSystem plain(base);
    QviSystem zero_g(base.with_switching_cost(0.0));
    const Vector u = random_vector(rng, plain.size());
    EXPECT_LE((plain.obstacle(u) - zero_g.obstacle(u)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(InspectionValue, ArgmaxTiesTakeLowestIndex) {
    auto m = build_random_walk(0.5, 2, RewardKind::inverse).with_horizon(3);
    QviSystem sys(m);
    const Vector u = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    std::vector<int> arg;
    sys.inspection_value(u, 1, 2, 1, &arg);
    for (int a : arg)
        EXPECT_EQ(a, 0);
}

TEST(ContinuationResidual, Examples) {
    auto m = build_random_walk(0.75, 5, RewardKind::inverse).with_horizon(4);
    QviSystem sys(m);
    const Vector u = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    EXPECT_NEAR(sys.continuation_residual(u, 1, 5, 0), -0.5, 1e-15);
    for (int n = 1; n < 4; ++n)
        EXPECT_NEAR(sys.continuation_residual(u, n, 3, 1), -sys.running_reward(n, 3, 1), 0.0);
    EXPECT_THROW(sys.continuation_residual(u, 4, 0, 0), ArgumentError);
}

TEST(ContinuationResidual, DegenerateDiscount) {
    auto m = build_random_walk(0.75, 3, RewardKind::inverse);
    OcmModel tiny({m.transition(0).to_dense(), m.transition(1).to_dense()}, m.reward(), 0.1, 1e-12, 4);
    QviSystem sys(tiny);
    Vector u = sys.running_rewards();
    for (int n = 1; n < 4; ++n)
        for (int x = 0; x < 7; ++x)
            for (int a = 0; a < 2; ++a)
                EXPECT_NEAR(sys.continuation_residual(u, n, x, a), 0.0, 1e-11);
}

TEST(EndOfStepTiming, ScalesEveryReward) {
    auto m = build_random_walk(0.75, 5, RewardKind::inverse).with_horizon(4);
    QviSystem start(m);
    QviSystem end(m.with_reward_timing(RewardTiming::end_of_step));
    EXPECT_LE((end.running_rewards() - m.gamma() * start.running_rewards()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_DOUBLE_EQ(end.observation_reward(5, 0), m.gamma() * 1.0);
}

TEST(QviResidual, ShiftByConstant) {
    std::mt19937_64 rng(8);
    oracle::RandomSpec spec;
    spec.horizon = 6;
    auto m = oracle::random_model(rng, spec);
    QviSystem sys(m);
    const Vector u = random_vector(rng, sys.size());
    const double kappa = 0.7;
    const Vector shifted = u.array() + kappa;
    EXPECT_LE((sys.obstacle(shifted) - sys.obstacle(u)).array().abs().maxCoeff() - m.gamma() * kappa, 1e-12);
    EXPECT_LE(((sys.obstacle(shifted) - sys.obstacle(u)).array() - m.gamma() * kappa).abs().maxCoeff(), 1e-12);
    const Vector df = sys.continuation(shifted) - sys.continuation(u);
    const auto inner = static_cast<Eigen::Index>(sys.size() - sys.block_size());
    EXPECT_LE((df.head(inner).array() - (1.0 - m.gamma()) * kappa).abs().maxCoeff(), 1e-12);
}

TEST(QviResidual, ShiftedSolutionHasPositiveContinuationResidual) {
    auto m = build_random_walk(0.75, 4, RewardKind::inverse).with_horizon(30);
    QviSystem sys(m);
    const Vector v = value_iteration_oracle(sys, 1e-13);
    EXPECT_LE(qvi_residual(sys, v).norm(), 1e-11);
    const Vector shifted = v.array() + 1.0;
    const auto res = qvi_residual(sys, shifted);
    bool found = false;
    for (Eigen::Index i = 0; i < res.values.size(); ++i)
        if (!res.obstacle_active[static_cast<std::size_t>(i)] && std::abs(res.values[i] - (1.0 - m.gamma())) < 1e-9)
            found = true;
    EXPECT_TRUE(found);
}

TEST(QviResidual, HugeCostNeverActiveBeforeTruncation) {
    auto m = build_random_walk(0.75, 4, RewardKind::inverse).with_horizon(20).with_observation_cost(1e4);
    QviSystem sys(m);
    const Vector v = value_iteration_oracle(sys, 1e-12);
    const auto res = qvi_residual(sys, v);
    for (int n = 1; n < 20; ++n)
        for (int x = 0; x < 9; ++x)
            for (int a = 0; a < 2; ++a)
                EXPECT_FALSE(res.obstacle_active[sys.index(n, x, a)]);
    for (int x = 0; x < 9; ++x)
        EXPECT_TRUE(res.obstacle_active[sys.index(20, x, 0)]);
}

TEST(QviProperties, ObstacleMonotoneInU) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        oracle::RandomSpec spec;
        spec.states = 2 + trial % 5;
        spec.horizon = 1 + trial % 10;
        spec.switching = 0.2 * (trial % 3);
        auto m = oracle::random_model(rng, spec);
        QviSystem sys(m);
        const Vector u = random_vector(rng, sys.size(), 3.0);
        const Vector w = u + random_vector(rng, sys.size(), 1.0).cwiseAbs();
        EXPECT_TRUE(((sys.obstacle(w) - sys.obstacle(u)).array() >= -1e-14).all());
    }
}

// F_a(n, x, u) = u(n,x,a) - gamma u(n+1,x,a) - R: raising u by theta at one
// index and by at most theta elsewhere raises F there by at least (1-gamma) theta.
TEST(QviProperties, MonotonicityAssumption) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        oracle::RandomSpec spec;
        spec.states = 1 + trial % 6;
        spec.horizon = 2 + trial % 9;
        auto m = oracle::random_model(rng, spec);
        QviSystem sys(m);
        const Vector u = random_vector(rng, sys.size(), 2.0);
        const double theta = unit(rng);
        Vector v = u;
        for (auto& x : v)
            x += theta * unit(rng);
        const int n = 1 + static_cast<int>(unit(rng) * (spec.horizon - 1));
        const int x = static_cast<int>(unit(rng) * spec.states) % spec.states;
        const int a = trial % 2;
        v[static_cast<Eigen::Index>(sys.index(n, x, a))] = u[static_cast<Eigen::Index>(sys.index(n, x, a))] + theta;
        const double diff = sys.continuation_residual(v, n, x, a) - sys.continuation_residual(u, n, x, a);
        EXPECT_GE(diff, (1.0 - m.gamma()) * theta - 1e-12);
        const double obs_diff = (v[static_cast<Eigen::Index>(sys.index(n, x, a))] - sys.inspection_value(v, n, x, a)) -
                                (u[static_cast<Eigen::Index>(sys.index(n, x, a))] - sys.inspection_value(u, n, x, a));
        EXPECT_GE(obs_diff, (1.0 - m.gamma()) * theta - 1e-12);
    }
}

TEST(QviSystem, WarnsOnNonPositiveObstacleCost) {
    std::vector<std::string> messages;
    auto previous = set_warning_handler([&](const std::string& s) { messages.push_back(s); });
    QviSystem sys(build_random_walk(0.75, 2, RewardKind::inverse).with_horizon(3));
    set_warning_handler(previous);
    ASSERT_EQ(messages.size(), 1u);
    EXPECT_LT(sys.min_obstacle_cost(), 0.0);
}

TEST(QviSystem, OpenLoopControls) {
    auto m = build_two_state_toy(0.8, {0.9, 0.1, 6});
    QviSystem sys(m, OpenLoopActionSet(std::vector<std::vector<int>>{{0, 1}, {1}}));
    EXPECT_TRUE(sys.is_open_loop());
    EXPECT_EQ(sys.num_controls(), 2);
    const Matrix q2 = m.transition(0).to_dense() * m.transition(1).to_dense();
    EXPECT_LE((sys.kernel(0, 2).to_dense() - q2).cwiseAbs().maxCoeff(), 1e-15);
    // reward at elapsed step 2 follows the schedule's second action
    const Vector r1 = m.reward().col(1);
    EXPECT_NEAR(sys.running_reward(2, 0, 0), (q2 * r1)[0], 1e-15);
    EXPECT_THROW(QviSystem(m.with_switching_cost(0.5), OpenLoopActionSet::constant(2)), ArgumentError);
}

TEST(FiniteHorizon, SingleLevelIsExpectation) {
    auto m = build_random_walk(0.75, 3, RewardKind::inverse);
    auto sys = finite_horizon_system(m, 1);
    const Vector v = solve_finite_horizon(sys);
    for (int x = 0; x < 7; ++x)
        for (int a = 0; a < 2; ++a)
            EXPECT_NEAR(v[static_cast<Eigen::Index>(sys.index(1, 0, x, a))],
                        m.transition(a).apply(m.reward().col(a))[x], 1e-15);
}

TEST(FiniteHorizon, ZeroRewardGivesZero) {
    auto m = build_random_walk(0.75, 3, RewardKind::inverse).with_reward(Matrix::Zero(7, 2));
    for (double c : {0.0, 0.3}) {
        auto sys = finite_horizon_system(m.with_observation_cost(c), 5);
        EXPECT_EQ(solve_finite_horizon(sys).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(FiniteHorizon, ToyTwoStepTree) {
    auto m = build_two_state_toy(0.7, {0.9, 0.0, 5});
    auto sys = finite_horizon_system(m, 2);
    const Vector v = solve_finite_horizon(sys);
    oracle::HistoryTree tree(m, 2);
    for (int x = 0; x < 2; ++x)
        for (int a = 0; a < 2; ++a)
            EXPECT_NEAR(v[static_cast<Eigen::Index>(sys.index(1, 0, x, a))], tree.value(1, tree.propagate(x, a, 1), a),
                        1e-15);
    EXPECT_LE(finite_residual(sys, v).norm(), 1e-14);
}

TEST(FiniteHorizon, LayoutOffsets) {
    auto m = build_random_walk(0.75, 1, RewardKind::inverse);
    auto sys = finite_horizon_system(m, 3);
    EXPECT_EQ(sys.size(), 6u * 6u);
    EXPECT_EQ(sys.index(2, 0, 0, 0), 6u);
    EXPECT_EQ(sys.index(3, 0, 0, 0), 18u);
    EXPECT_THROW(sys.index(2, 2, 0, 0), ArgumentError);
    EXPECT_THROW(finite_horizon_system(m, 0), ArgumentError);
}
