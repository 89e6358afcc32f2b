#pragma once

#include "ocm/bayes.hpp"
#include "ocm/csv.hpp"
#include "ocm/solver.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ocm {

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 stream. Per-trajectory streams are keyed by (root seed, index),
/// so results do not depend on how trajectories are scheduled.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

inline std::uint64_t trajectory_seed(std::uint64_t root, std::uint64_t index) {
    SplitMix64 mix(root ^ (index * 0xd1b54a32d192ed03ULL));
    mix.next();
    return mix.next();
}

/// Worker count: `OCM_THREADS` if set and positive, else the hardware count.
inline int worker_count() {
    if (const char* env = std::getenv("OCM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Policies on the integer line
// ---------------------------------------------------------------------------

/// What the controller knows at time `time`: the last observation (time,
/// position), the frozen drift, and the posterior offset `u`.
struct RolloutState {
    int time = 0;
    int last_obs_time = 0;
    int last_obs_x = 0;
    int action = 0;
    int u = 0;
};

class RolloutPolicy {
  public:
    virtual ~RolloutPolicy() = default;
    virtual int horizon() const = 0;
    virtual int start() const = 0;
    virtual int initial_action() const = 0;
    virtual bool inspect(const RolloutState& s) const = 0;
    /// Drift chosen after observing `x` at `time` with posterior offset `u`.
    virtual int act(int time, int x, int u) const = 0;
};

/// Reads decisions off a solved Bayesian lattice.
class BayesRolloutPolicy final : public RolloutPolicy {
  public:
    explicit BayesRolloutPolicy(std::shared_ptr<const BayesLatticeSolution> sol) : sol_(std::move(sol)) {
        if (!sol_)
            throw ArgumentError("missing lattice solution");
    }

    int horizon() const override { return sol_->horizon(); }
    int start() const override { return sol_->model().start; }
    int initial_action() const override { return sol_->initial_action(); }

    bool inspect(const RolloutState& s) const override {
        return sol_->inspect(s.time, s.last_obs_time, lattice_j(s.last_obs_time, s.last_obs_x), s.u, s.action);
    }

    int act(int time, int x, int u) const override { return sol_->post_obs_action(time, lattice_j(time, x), u); }

  private:
    int lattice_j(int k, int x) const {
        const int twice = x - start() + k;
        if (twice < 0 || twice % 2 != 0 || twice / 2 > k)
            throw ArgumentError("position " + std::to_string(x) + " is not reachable at time " + std::to_string(k));
        return twice / 2;
    }

    std::shared_ptr<const BayesLatticeSolution> sol_;
};

/// Known-parameter random walk on `{-L, ..., L}` sharing the Bayesian model's
/// reward and cost. `L = N + 1` keeps the reflecting edge out of reach.
inline OcmModel known_theta_walk(const BayesOcmModel& model, double theta) {
    const int half = model.horizon + std::abs(model.start) + 1;
    RandomWalkOptions opts;
    opts.observation_cost = model.observation_cost;
    opts.horizon = model.horizon;
    OcmModel walk = build_random_walk(theta, half, RewardKind::peak, opts);
    Matrix reward(walk.num_states(), 2);
    for (int i = 0; i < walk.num_states(); ++i)
        for (int a = 0; a < 2; ++a)
            reward(i, a) = model.reward(i - half, a);
    return walk.with_reward(reward);
}

/// Optimal finite-horizon policy when the parameter is known.
class KnownThetaPolicy final : public RolloutPolicy {
  public:
    KnownThetaPolicy(const OcmModel& walk, int horizon, int start)
        : sys_(walk, horizon), start_(start), half_((walk.num_states() - 1) / 2) {
        values_ = solve_finite_horizon(sys_);
        flags_.assign(sys_.size(), 0);
        for (int n = 1; n < horizon; ++n)
            for (int k = 0; k < n; ++k)
                for (int x = 0; x < sys_.num_states(); ++x)
                    for (int a = 0; a < sys_.num_actions(); ++a) {
                        const double cont = sys_.continuation_value(values_, n, k, x, a);
                        const double insp = sys_.inspection_value(values_, n, k, x, a);
                        flags_[sys_.flat(n, k, x, a)] = insp > cont + branch_tie_tolerance ? 1 : 0;
                    }
        sys_.initial_value(values_, start_ + half_, &initial_action_);
    }

    const FiniteHorizonSystem& system() const noexcept { return sys_; }
    const Vector& values() const noexcept { return values_; }
    int half_width() const noexcept { return half_; }
    double initial_value() const { return sys_.initial_value(values_, start_ + half_); }

    int horizon() const override { return sys_.horizon(); }
    int start() const override { return start_; }
    int initial_action() const override { return initial_action_; }

    bool inspect(const RolloutState& s) const override { return inspect_index(s.time, s.last_obs_time, state(s.last_obs_x), s.action); }

    bool inspect_index(int n, int k, int xi, int a) const {
        if (n >= sys_.horizon())
            return false;
        return flags_[sys_.index(n, k, xi, a)] != 0;
    }

    int act(int time, int x, int) const override { return act_index(time, state(x)); }

    int act_index(int time, int xi) const {
        int arg = 0;
        sys_.observation_value(values_, time, xi, 0, &arg);
        return arg;
    }

    int state(int x) const {
        const int xi = x + half_;
        if (xi < 0 || xi >= sys_.num_states())
            throw ArgumentError("position outside the known-parameter grid");
        return xi;
    }

  private:
    FiniteHorizonSystem sys_;
    int start_;
    int half_;
    Vector values_;
    std::vector<std::uint8_t> flags_;
    int initial_action_ = 0;
};

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct Trajectory {
    std::uint64_t seed = 0;
    std::vector<int> states;      ///< x_0..x_N
    std::vector<int> actions;     ///< a_0..a_N, a_n in force over (n, n+1]
    std::vector<bool> inspections; ///< i_0..i_N; i_0 is the free initial observation
    std::vector<double> rewards;  ///< r(x_n, a_n) - i_n c_obs, with no cost at n = 0
    int observations = 0;         ///< paid observations at 1..N-1
    std::vector<BetaParams> posteriors; ///< after each observation, starting with the prior

    double profit() const {
        double total = 0.0;
        for (double r : rewards)
            total += r;
        return total;
    }
    const BetaParams& final_posterior() const { return posteriors.back(); }
};

/**
 * One controlled path of the Beta-binomial walk under the true parameter.
 * The policy is consulted at every step; between observations the drift stays
 * frozen.
 */
inline Trajectory simulate(const BayesOcmModel& model, const RolloutPolicy& policy, double true_theta,
                           std::uint64_t seed) {
    model.validate();
    if (!(true_theta >= 0.0 && true_theta <= 1.0))
        throw ArgumentError("true parameter must lie in [0, 1]");
    if (policy.horizon() != model.horizon || policy.start() != model.start)
        throw ArgumentError("policy does not match the model lattice");
    const int big_n = model.horizon;
    const double c = model.observation_cost;
    SplitMix64 rng(seed);

    Trajectory tr;
    tr.seed = seed;
    tr.states.reserve(static_cast<std::size_t>(big_n + 1));
    tr.actions.reserve(static_cast<std::size_t>(big_n + 1));
    tr.inspections.reserve(static_cast<std::size_t>(big_n + 1));
    tr.rewards.reserve(static_cast<std::size_t>(big_n + 1));
    tr.posteriors.push_back(model.prior);

    RolloutState s;
    s.last_obs_x = model.start;
    s.action = policy.initial_action();
    int x = model.start;
    tr.states.push_back(x);
    tr.actions.push_back(s.action);
    tr.inspections.push_back(true);
    tr.rewards.push_back(model.reward(x, s.action));

    for (int t = 1; t <= big_n; ++t) {
        const bool up = s.action == drift_up ? rng.uniform() < true_theta : !(rng.uniform() < true_theta);
        x += up ? 1 : -1;
        s.time = t;
        const int prev_action = s.action;
        const bool inspect = t < big_n && policy.inspect(s);
        double reward;
        if (inspect) {
            const int m = t - s.last_obs_time;
            const int ups = (x - s.last_obs_x + m) / 2;
            const int successes = s.action == drift_up ? ups : m - ups;
            s.u += successes;
            s.last_obs_time = t;
            s.last_obs_x = x;
            s.action = policy.act(t, x, s.u);
            tr.posteriors.push_back({model.prior.alpha + s.u, model.prior.beta + (t - s.u)});
            ++tr.observations;
            reward = model.reward(x, s.action) - c;
        } else {
            if (s.action != prev_action)
                throw Error("admissibility violated: control changed without an observation");
            reward = model.reward(x, s.action);
        }
        tr.states.push_back(x);
        tr.actions.push_back(s.action);
        tr.inspections.push_back(inspect);
        tr.rewards.push_back(reward);
    }
    return tr;
}

/// `count` independent rollouts with per-index seeds, run on up to
/// `worker_count()` threads. The result is independent of the thread count.
inline std::vector<Trajectory> simulate_many(const BayesOcmModel& model, const RolloutPolicy& policy,
                                             double true_theta, std::uint64_t root_seed, int count,
                                             int threads = 0) {
    if (count < 1)
        throw ArgumentError("trajectory count must be positive");
    std::vector<Trajectory> out(static_cast<std::size_t>(count));
    const int workers = std::min(threads > 0 ? threads : worker_count(), count);
    auto run = [&](int begin, int end) {
        for (int i = begin; i < end; ++i)
            out[static_cast<std::size_t>(i)] =
                simulate(model, policy, true_theta, trajectory_seed(root_seed, static_cast<std::uint64_t>(i)));
    };
    if (workers <= 1) {
        run(0, count);
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
        const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
        pool.emplace_back([&, w, begin, end] {
            try {
                run(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Neumaier-compensated running sum.
class CompensatedSum {
  public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
    if (xs.size() < 2)
        throw ArgumentError("need at least two samples for a standard error");
    CompensatedSum s;
    for (double x : xs)
        s.add(x);
    const double mean = s.value() / static_cast<double>(xs.size());
    CompensatedSum sq;
    for (double x : xs)
        sq.add((x - mean) * (x - mean));
    const double var = sq.value() / static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Width of the narrowest interval holding `mass` of a Beta law, by scanning
/// the lower tail probability in steps of 1e-4.
inline double hdi_width(const BetaParams& params, double mass = 0.95) {
    params.validate();
    if (!(mass > 0.0 && mass < 1.0))
        throw ArgumentError("HDI mass must lie in (0, 1)");
    const double spare = 1.0 - mass;
    const int steps = static_cast<int>(std::floor(spare / 1e-4 + 1e-9));
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        const double lo = std::min(i * 1e-4, spare);
        const double width = boost::math::ibeta_inv(params.alpha, params.beta, lo + mass) -
                             boost::math::ibeta_inv(params.alpha, params.beta, lo);
        best = std::min(best, width);
    }
    if (steps * 1e-4 < spare - 1e-12) {
        const double width = boost::math::ibeta_inv(params.alpha, params.beta, 1.0) -
                             boost::math::ibeta_inv(params.alpha, params.beta, spare);
        best = std::min(best, width);
    }
    return best;
}

struct McStats {
    double avg_observations = 0.0;
    double se_observations = 0.0;
    double avg_profit = 0.0;
    double se_profit = 0.0;
    double avg_hdi_width = 0.0;
    double se_hdi_width = 0.0;
    int trajectories = 0;
};

/// Observation counts (paid observations), undiscounted profit, and 95% HDI
/// width of each trajectory's final posterior.
inline McStats mc_stats(const std::vector<Trajectory>& trajectories, double mass = 0.95) {
    if (trajectories.size() < 2)
        throw ArgumentError("mc_stats needs at least two trajectories");
    std::vector<double> obs, profit, hdi;
    std::map<std::pair<double, double>, double> hdi_cache;
    for (const auto& tr : trajectories) {
        obs.push_back(tr.observations);
        profit.push_back(tr.profit());
        const auto& post = tr.final_posterior();
        auto key = std::make_pair(post.alpha, post.beta);
        auto it = hdi_cache.find(key);
        if (it == hdi_cache.end())
            it = hdi_cache.emplace(key, hdi_width(post, mass)).first;
        hdi.push_back(it->second);
    }
    McStats st;
    st.trajectories = static_cast<int>(trajectories.size());
    const auto o = mean_and_se(obs);
    const auto p = mean_and_se(profit);
    const auto h = mean_and_se(hdi);
    st.avg_observations = o.mean;
    st.se_observations = o.se;
    st.avg_profit = p.mean;
    st.se_profit = p.se;
    st.avg_hdi_width = h.mean;
    st.se_hdi_width = h.se;
    return st;
}

// ---------------------------------------------------------------------------
// Regret
// ---------------------------------------------------------------------------

enum class RegretMode { full, cost_adjusted };

/**
 * Expected reward per time step of the known-parameter optimal policy,
 * obtained by propagating the exact law of (last observation time, position,
 * drift) forward. `full` uses a free-observation reference (`c_obs = 0`).
 */
inline std::vector<double> reference_reward_curve(const BayesOcmModel& model, double true_theta, RegretMode mode) {
    BayesOcmModel ref_model = model;
    if (mode == RegretMode::full)
        ref_model.observation_cost = 0.0;
    const OcmModel walk = known_theta_walk(ref_model, true_theta);
    const KnownThetaPolicy policy(walk, model.horizon, model.start);
    const auto& sys = policy.system();
    const int big_n = model.horizon;
    const int states = walk.num_states();
    const double c = ref_model.observation_cost;

    std::vector<double> curve(static_cast<std::size_t>(big_n + 1), 0.0);
    // mass[k][a](x): probability that the last observation was at k, at x, with drift a.
    std::vector<std::array<Vector, 2>> mass(static_cast<std::size_t>(big_n));
    for (auto& m : mass)
        m = {Vector::Zero(states), Vector::Zero(states)};
    const int x0 = policy.state(model.start);
    const int a0 = policy.initial_action();
    mass[0][static_cast<std::size_t>(a0)][x0] = 1.0;
    curve[0] = walk.reward(x0, a0);

    for (int t = 1; t <= big_n; ++t) {
        double expected = 0.0;
        std::array<Vector, 2> fresh = {Vector::Zero(states), Vector::Zero(states)};
        for (int k = 0; k < t; ++k)
            for (int a = 0; a < 2; ++a) {
                Vector& m = mass[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)];
                for (int x = 0; x < states; ++x) {
                    const double q = m[x];
                    if (q == 0.0)
                        continue;
                    if (policy.inspect_index(t, k, x, a)) {
                        m[x] = 0.0;
                        walk.power(a, t - k).for_each_in_row(x, [&](int xp, double p) {
                            const int ap = policy.act_index(t, xp);
                            fresh[static_cast<std::size_t>(ap)][xp] += q * p;
                            expected += q * p * (walk.reward(xp, ap) - c);
                        });
                    } else {
                        expected += q * sys.expected_reward(t - k, x, a);
                    }
                }
            }
        if (t < big_n)
            mass[static_cast<std::size_t>(t)] = std::move(fresh);
        curve[static_cast<std::size_t>(t)] = expected;
    }
    return curve;
}

struct RegretCurve {
    std::vector<double> mean;   ///< cumulative regret at times 0..N
    std::vector<double> stderr_; ///< standard error of the mean

    CsvTable to_csv() const {
        CsvTable t;
        t.header = {"time", "mean", "stderr"};
        for (std::size_t i = 0; i < mean.size(); ++i)
            t.add_row({format_int(static_cast<long long>(i)), format_double(mean[i]), format_double(stderr_[i])});
        return t;
    }
};

/// Cumulative gap between the reference reward curve and each trajectory's
/// realized net rewards, averaged over trajectories.
inline RegretCurve regret(const std::vector<Trajectory>& trajectories, const std::vector<double>& reference_curve) {
    if (trajectories.size() < 2)
        throw ArgumentError("regret needs at least two trajectories");
    const std::size_t len = reference_curve.size();
    RegretCurve out;
    out.mean.resize(len);
    out.stderr_.resize(len);
    std::vector<std::vector<double>> cum(len, std::vector<double>(trajectories.size()));
    for (std::size_t j = 0; j < trajectories.size(); ++j) {
        const auto& tr = trajectories[j];
        if (tr.rewards.size() != len)
            throw ArgumentError("trajectory length does not match the reference curve");
        double ref = 0.0, got = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            ref += reference_curve[t];
            got += tr.rewards[t];
            cum[t][j] = ref - got;
        }
    }
    for (std::size_t t = 0; t < len; ++t) {
        const auto ms = mean_and_se(cum[t]);
        out.mean[t] = ms.mean;
        out.stderr_[t] = ms.se;
    }
    return out;
}

/// Least-squares slope of `log mean` against `log t` over `[t0, t1]`.
inline double regret_exponent(const RegretCurve& curve, int t0 = 10, int t1 = 50) {
    if (t0 < 1 || t1 <= t0 || t1 >= static_cast<int>(curve.mean.size()))
        throw ArgumentError("exponent window out of range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int t = t0; t <= t1; ++t) {
        const double y = curve.mean[static_cast<std::size_t>(t)];
        if (!(y > 0.0))
            throw NumericError("regret curve is not positive at t=" + std::to_string(t));
        const double lx = std::log(static_cast<double>(t));
        const double ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace ocm
