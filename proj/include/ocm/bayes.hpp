#pragma once

#include "ocm/csv.hpp"
#include "ocm/model.hpp"
#include "ocm/qvi.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace ocm {

// ---------------------------------------------------------------------------
// Beta-binomial conjugacy
// ---------------------------------------------------------------------------

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
            throw ArgumentError("Beta parameters must be positive and finite");
    }

    double mean() const { return alpha / (alpha + beta); }
};

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

inline double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// `C(n,k) B(k+alpha, n-k+beta) / B(alpha, beta)`, evaluated in log space.
inline double beta_binomial_pmf(int k, int n, double alpha, double beta) {
    if (n < 0 || k < 0 || k > n)
        throw ArgumentError("beta-binomial needs 0 <= k <= n, got k=" + std::to_string(k) + ", n=" + std::to_string(n));
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ArgumentError("beta-binomial parameters must be positive");
    if (n == 0)
        return 1.0;
    return std::exp(log_choose(n, k) + log_beta(k + alpha, n - k + beta) - log_beta(alpha, beta));
}

/// Drift actions of the random walk, using the model's action indices.
enum DriftAction : int { drift_up = 0, drift_down = 1 };

/// Posterior after `n` steps under drift `a` of which `k` went up.
inline BetaParams posterior_update_beta(const BetaParams& prior, int action, int n, int k) {
    prior.validate();
    if (n < 0 || k < 0 || k > n)
        throw ArgumentError("posterior update needs 0 <= k <= n");
    if (action == drift_up)
        return {prior.alpha + k, prior.beta + (n - k)};
    if (action == drift_down)
        return {prior.alpha + (n - k), prior.beta + k};
    throw ArgumentError("drift action must be 0 (+1) or 1 (-1)");
}

/// Predictive law of `x'` after `n` steps from `x` under drift `a`: mass on
/// `x + 2i - n`, `i = 0..n` (index `i` of the returned vector).
inline std::vector<double> predictive_nstep(int /*x*/, int action, int n, const BetaParams& prior) {
    prior.validate();
    if (n < 1)
        throw ArgumentError("predictive distribution needs n >= 1");
    std::vector<double> mass(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) {
        const int successes = action == drift_up ? i : n - i;
        mass[static_cast<std::size_t>(i)] = beta_binomial_pmf(successes, n, prior.alpha, prior.beta);
    }
    return mass;
}

// ---------------------------------------------------------------------------
// Finite parameter sets
// ---------------------------------------------------------------------------

struct FiniteThetaBelief {
    std::vector<double> weights;
    std::vector<double> theta_values;

    void validate() const {
        if (weights.empty() || weights.size() != theta_values.size())
            throw ArgumentError("belief weights and parameter values must be nonempty and of equal length");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0))
                throw ArgumentError("belief weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ArgumentError("belief weights must sum to 1");
    }
};

/// Reweights `belief` by the likelihood of each parameter and renormalizes.
inline FiniteThetaBelief reweight(const FiniteThetaBelief& belief, const std::vector<double>& likelihood) {
    if (likelihood.size() != belief.weights.size())
        throw ArgumentError("likelihood length does not match the belief");
    FiniteThetaBelief out = belief;
    double total = 0.0;
    for (std::size_t t = 0; t < likelihood.size(); ++t) {
        out.weights[t] = belief.weights[t] * likelihood[t];
        total += out.weights[t];
    }
    if (!(total > 0.0))
        throw DegenerateObservationError("observation has zero likelihood under every parameter with positive weight");
    for (double& w : out.weights)
        w /= total;
    return out;
}

/**
 * Bayes update of a finite-parameter belief after observing `x_obs`, `steps`
 * steps after observing `x` under control `a`. `kernels[t]` is the model for
 * parameter `t`.
 */
inline FiniteThetaBelief bayes_update_finite(const FiniteThetaBelief& belief, const std::vector<OcmModel>& kernels,
                                             int x, int a, int steps, int x_obs) {
    belief.validate();
    if (kernels.size() != belief.weights.size())
        throw ArgumentError("one model per parameter value is required");
    std::vector<double> like(kernels.size());
    for (std::size_t t = 0; t < kernels.size(); ++t)
        like[t] = kernels[t].power(a, steps).coeff(x, x_obs);
    return reweight(belief, like);
}

/// `sum_t w_t p_t^{(steps)}(x, .)` for a finite-parameter belief.
inline Vector predictive_mixture(const FiniteThetaBelief& belief, const std::vector<OcmModel>& kernels, int x, int a,
                                 int steps) {
    Vector out = Vector::Zero(kernels.front().num_states());
    for (std::size_t t = 0; t < kernels.size(); ++t)
        kernels[t].power(a, steps).for_each_in_row(x, [&](int xp, double p) { out[xp] += belief.weights[t] * p; });
    return out;
}

// ---------------------------------------------------------------------------
// Beta-binomial random walk: finite-horizon Bayesian solve
// ---------------------------------------------------------------------------

/// Reward `r(x, a)` on the integer line.
using LineReward = std::function<double(int x, int a)>;

inline LineReward line_reward(RewardKind kind) {
    return [kind](int x, int) { return random_walk_reward(kind, x); };
}

/**
 * Random walk on the integers whose drift parameter is unknown with a Beta
 * prior. Drift action `+1` (index 0) steps up with probability `theta`,
 * action `-1` (index 1) steps down with probability `theta`.
 */
struct BayesOcmModel {
    BetaParams prior{1.0, 1.0};
    LineReward reward = line_reward(RewardKind::peak);
    double observation_cost = 0.1;
    int horizon = 50;
    int start = 0;
    /// Lattice solves refuse to allocate more than this.
    std::size_t memory_cap_bytes = std::size_t{2} << 30;

    void validate() const {
        prior.validate();
        if (!(observation_cost >= 0.0))
            throw ValidationError("c_obs", "must be nonnegative");
        if (horizon < 1)
            throw ValidationError("horizon", "must be at least 1");
        if (!reward)
            throw ValidationError("reward", "missing reward function");
    }
};

/**
 * Values and decisions on the lattice `(n, k, j, u, a)`: time `n`, last
 * observation time `k < n` at position `x0 + 2j - k`, posterior
 * `Beta(alpha0 + u, beta0 + k - u)`, drift `a`.
 *
 * Post-observation decisions live on `(t, j, u)` for observation times
 * `t = 0..N-1`; `t = 0` is the free initial observation.
 */
class BayesLatticeSolution {
  public:
    BayesLatticeSolution() = default;
    explicit BayesLatticeSolution(const BayesOcmModel& model) : model_(model) {
        const int big_n = model.horizon;
        level_offset_.assign(static_cast<std::size_t>(big_n + 2), 0);
        for (int n = 1; n <= big_n; ++n)
            level_offset_[static_cast<std::size_t>(n + 1)] = level_offset_[static_cast<std::size_t>(n)] + level_size(n);
        obs_offset_.assign(static_cast<std::size_t>(big_n + 1), 0);
        for (int t = 0; t < big_n; ++t)
            obs_offset_[static_cast<std::size_t>(t + 1)] =
                obs_offset_[static_cast<std::size_t>(t)] + static_cast<std::size_t>(t + 1) * (t + 1);
        const std::size_t entries = level_offset_.back();
        const std::size_t obs_entries = obs_offset_.back();
        const std::size_t bytes = entries * (sizeof(double) + 1) + obs_entries * (sizeof(double) + 1);
        if (bytes > model.memory_cap_bytes)
            throw ResourceError("Bayesian lattice needs about " + std::to_string(bytes) + " bytes, cap is " +
                                    std::to_string(model.memory_cap_bytes),
                                bytes);
        values_.assign(entries, 0.0);
        inspect_.assign(entries, 0);
        obs_value_.assign(obs_entries, 0.0);
        obs_action_.assign(obs_entries, 0);
    }

    const BayesOcmModel& model() const noexcept { return model_; }
    int horizon() const noexcept { return model_.horizon; }
    std::size_t size() const noexcept { return values_.size(); }

    static std::size_t estimate_bytes(int horizon) {
        std::size_t entries = 0;
        for (int n = 1; n <= horizon; ++n)
            entries += level_size(n);
        std::size_t obs = 0;
        for (int t = 0; t < horizon; ++t)
            obs += static_cast<std::size_t>(t + 1) * (t + 1);
        return entries * (sizeof(double) + 1) + obs * (sizeof(double) + 1);
    }

    std::size_t index(int n, int k, int j, int u, int a) const {
        if (n < 1 || n > model_.horizon || k < 0 || k >= n || j < 0 || j > k || u < 0 || u > k || a < 0 || a > 1)
            throw ArgumentError("lattice index out of range");
        return flat(n, k, j, u, a);
    }

    std::size_t flat(int n, int k, int j, int u, int a) const noexcept {
        return level_offset_[static_cast<std::size_t>(n)] + block_offset(k) +
               (static_cast<std::size_t>(j) * (k + 1) + u) * 2 + a;
    }

    std::size_t obs_flat(int t, int j, int u) const noexcept {
        return obs_offset_[static_cast<std::size_t>(t)] + static_cast<std::size_t>(j) * (t + 1) + u;
    }

    int position(int k, int j) const noexcept { return model_.start + 2 * j - k; }

    double value(int n, int k, int j, int u, int a) const { return values_[index(n, k, j, u, a)]; }
    bool inspect(int n, int k, int j, int u, int a) const {
        if (n == model_.horizon)
            return false;
        return inspect_[index(n, k, j, u, a)] != 0;
    }

    /// Best post-observation value and drift at observation time `t`.
    double observation_value(int t, int j, int u) const { return obs_value_[checked_obs(t, j, u)]; }
    int post_obs_action(int t, int j, int u) const { return obs_action_[checked_obs(t, j, u)]; }

    /// Value at time 0 after the free observation of the start state.
    double initial_value() const { return obs_value_[0]; }
    int initial_action() const { return obs_action_[0]; }

    BetaParams posterior(int k, int u) const { return {model_.prior.alpha + u, model_.prior.beta + (k - u)}; }

    CsvTable to_csv() const {
        CsvTable t;
        t.header = {"n", "k", "x", "a", "u", "w", "value", "inspect", "action"};
        const int big_n = model_.horizon;
        for (int n = 1; n <= big_n; ++n)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j <= k; ++j)
                    for (int u = 0; u <= k; ++u)
                        for (int a = 0; a < 2; ++a) {
                            const bool insp = inspect(n, k, j, u, a);
                            t.add_row({format_int(n), format_int(k), format_int(position(k, j)), format_int(a),
                                       format_int(u), format_int(k - u), format_double(value(n, k, j, u, a)),
                                       insp ? "1" : "0", format_int(a)});
                        }
        return t;
    }

    // Mutable access for the solver.
    std::vector<double>& values() noexcept { return values_; }
    std::vector<std::uint8_t>& inspect_flags() noexcept { return inspect_; }
    std::vector<double>& obs_values() noexcept { return obs_value_; }
    std::vector<int>& obs_actions() noexcept { return obs_action_; }

  private:
    static std::size_t block_offset(int k) noexcept {
        // 2 * sum_{k' < k} (k'+1)^2
        const auto kk = static_cast<std::size_t>(k);
        return 2 * (kk * (kk + 1) * (2 * kk + 1) / 6);
    }
    static std::size_t level_size(int n) noexcept { return block_offset(n); }

    std::size_t checked_obs(int t, int j, int u) const {
        if (t < 0 || t >= model_.horizon || j < 0 || j > t || u < 0 || u > t)
            throw ArgumentError("observation node out of range");
        return obs_flat(t, j, u);
    }

    BayesOcmModel model_;
    std::vector<std::size_t> level_offset_;
    std::vector<std::size_t> obs_offset_;
    std::vector<double> values_;
    std::vector<std::uint8_t> inspect_;
    std::vector<double> obs_value_;
    std::vector<int> obs_action_;
};

/**
 * Exact backward recursion of the Bayesian finite-horizon QVI on the
 * reachable lattice. Every observed position induces its own posterior.
 * Rewards are collected at times `0..N`; observations at `1..N-1` cost `c_obs`.
 */
inline BayesLatticeSolution solve_bayes_finite(const BayesOcmModel& model) {
    model.validate();
    BayesLatticeSolution sol(model);
    auto& v = sol.values();
    auto& insp = sol.inspect_flags();
    auto& w = sol.obs_values();
    auto& act = sol.obs_actions();
    const int big_n = model.horizon;
    const double a0 = model.prior.alpha;
    const double b0 = model.prior.beta;
    const double c = model.observation_cost;

    // pred[i] for m steps from posterior (alpha, beta) under drift a.
    std::vector<double> pred;
    auto fill_pred = [&](int m, int k, int u, int a) {
        pred.resize(static_cast<std::size_t>(m + 1));
        const double alpha = a0 + u;
        const double beta = b0 + (k - u);
        const double lb = log_beta(alpha, beta);
        for (int i = 0; i <= m; ++i) {
            const int s = a == drift_up ? i : m - i;
            pred[static_cast<std::size_t>(i)] = std::exp(log_choose(m, s) + log_beta(s + alpha, m - s + beta) - lb);
        }
    };

    for (int n = big_n; n >= 1; --n) {
        if (n < big_n) {
            // Post-observation values at time n from level n + 1 with k = n.
            for (int j = 0; j <= n; ++j)
                for (int u = 0; u <= n; ++u) {
                    const int x = sol.position(n, j);
                    double best = -std::numeric_limits<double>::infinity();
                    int arg = 0;
                    for (int a = 0; a < 2; ++a) {
                        const double val = v[sol.flat(n + 1, n, j, u, a)] + model.reward(x, a);
                        if (val > best) {
                            best = val;
                            arg = a;
                        }
                    }
                    w[sol.obs_flat(n, j, u)] = best;
                    act[sol.obs_flat(n, j, u)] = arg;
                }
        }
        for (int k = 0; k < n; ++k) {
            const int m = n - k;
            for (int u = 0; u <= k; ++u)
                for (int a = 0; a < 2; ++a) {
                    fill_pred(m, k, u, a);
                    for (int j = 0; j <= k; ++j) {
                        const int x = sol.position(k, j);
                        double reward = 0.0;
                        for (int i = 0; i <= m; ++i)
                            reward += pred[static_cast<std::size_t>(i)] * model.reward(x + 2 * i - m, a);
                        const auto idx = sol.flat(n, k, j, u, a);
                        if (n == big_n) {
                            v[idx] = reward;
                            continue;
                        }
                        const double cont = v[sol.flat(n + 1, k, j, u, a)] + reward;
                        double obs = 0.0;
                        for (int i = 0; i <= m; ++i) {
                            const int up = a == drift_up ? i : m - i;
                            obs += pred[static_cast<std::size_t>(i)] * w[sol.obs_flat(n, j + i, u + up)];
                        }
                        obs -= c;
                        const bool inspect = obs > cont + branch_tie_tolerance;
                        v[idx] = inspect ? obs : cont;
                        insp[idx] = inspect ? 1 : 0;
                    }
                }
        }
    }
    // Time 0: free observation of the start state.
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int a = 0; a < 2; ++a) {
        const double val = v[sol.flat(1, 0, 0, 0, a)] + model.reward(model.start, a);
        if (val > best) {
            best = val;
            arg = a;
        }
    }
    w[0] = best;
    act[0] = arg;
    return sol;
}

// ---------------------------------------------------------------------------
// Simplex grid approximation for finite parameter sets
// ---------------------------------------------------------------------------

/// All points of the probability simplex in `dims` coordinates with spacing
/// `1/G`, in lexicographic order of their integer numerators.
class SimplexGrid {
  public:
    SimplexGrid(int dims, int resolution) : dims_(dims), resolution_(resolution) {
        if (dims < 1)
            throw ArgumentError("simplex grid needs at least one coordinate");
        if (resolution < 1)
            throw ArgumentError("simplex grid resolution must be positive");
        std::vector<int> current(static_cast<std::size_t>(dims), 0);
        enumerate(0, resolution, current);
    }

    int dims() const noexcept { return dims_; }
    int resolution() const noexcept { return resolution_; }
    int size() const noexcept { return static_cast<int>(nodes_.size()); }

    std::vector<double> node(int i) const {
        std::vector<double> w(static_cast<std::size_t>(dims_));
        for (int d = 0; d < dims_; ++d)
            w[static_cast<std::size_t>(d)] =
                static_cast<double>(nodes_[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]) / resolution_;
        return w;
    }

    /// Nearest node in Euclidean distance; ties go to the lexicographically
    /// smallest node (the lowest index).
    int nearest(const std::vector<double>& w) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < size(); ++i) {
            double d = 0.0;
            for (int k = 0; k < dims_; ++k) {
                const double diff =
                    w[static_cast<std::size_t>(k)] -
                    static_cast<double>(nodes_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]) / resolution_;
                d += diff * diff;
            }
            if (d < best_d - 1e-15) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

  private:
    void enumerate(int pos, int remaining, std::vector<int>& current) {
        if (pos == dims_ - 1) {
            current[static_cast<std::size_t>(pos)] = remaining;
            nodes_.push_back(current);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            current[static_cast<std::size_t>(pos)] = k;
            enumerate(pos + 1, remaining - k, current);
        }
    }

    int dims_;
    int resolution_;
    std::vector<std::vector<int>> nodes_;
};

/// One transition of the grid kernel: observed state and projected belief node.
struct GridTransition {
    int state;
    int node;
    double probability;
};

/**
 * Approximating kernel on `(observed state, belief node)`: from augmented
 * state `(n, x, a)` and node `s_j`, the observation `x'` arrives with the
 * predictive probability and moves the belief to the node nearest to the
 * exact posterior. Rows are renormalized.
 */
class GridKernel {
  public:
    GridKernel(std::vector<OcmModel> models, int resolution)
        : models_(std::move(models)), grid_(static_cast<int>(models_.size()), resolution) {
        if (models_.empty())
            throw ArgumentError("grid kernel needs at least one parameter value");
        const int states = models_.front().num_states();
        const int actions = models_.front().num_actions();
        for (const auto& m : models_)
            if (m.num_states() != states || m.num_actions() != actions)
                throw ArgumentError("all parameter models must share state and action spaces");
        horizon_ = models_.front().horizon();
        states_ = states;
        actions_ = actions;
        rows_.resize(static_cast<std::size_t>(horizon_) * states_ * actions_ * grid_.size());
        for (int n = 1; n <= horizon_; ++n)
            for (int x = 0; x < states_; ++x)
                for (int a = 0; a < actions_; ++a)
                    for (int j = 0; j < grid_.size(); ++j)
                        rows_[row_index(n, x, a, j)] = build_row(n, x, a, j);
    }

    const SimplexGrid& grid() const noexcept { return grid_; }
    const std::vector<OcmModel>& models() const noexcept { return models_; }
    int horizon() const noexcept { return horizon_; }
    int num_states() const noexcept { return states_; }
    int num_actions() const noexcept { return actions_; }

    const std::vector<GridTransition>& row(int n, int x, int a, int j) const { return rows_[row_index(n, x, a, j)]; }

    /// Belief-weighted expected reward `sum_theta w_j(theta) (P_theta^n r_a)_x`.
    double expected_reward(int n, int x, int a, int j) const {
        const auto w = grid_.node(j);
        double total = 0.0;
        for (std::size_t t = 0; t < models_.size(); ++t) {
            if (w[t] == 0.0)
                continue;
            models_[t].power(a, n).for_each_in_row(x, [&](int xp, double p) {
                total += w[t] * p * models_[t].reward(xp, a);
            });
        }
        return total;
    }

  private:
    std::size_t row_index(int n, int x, int a, int j) const {
        return ((static_cast<std::size_t>(n - 1) * states_ + x) * actions_ + a) * grid_.size() + j;
    }

    std::vector<GridTransition> build_row(int n, int x, int a, int j) const {
        const auto w = grid_.node(j);
        std::vector<GridTransition> row;
        double total = 0.0;
        for (int xp = 0; xp < states_; ++xp) {
            std::vector<double> post(models_.size());
            double mass = 0.0;
            for (std::size_t t = 0; t < models_.size(); ++t) {
                post[t] = w[t] * models_[t].power(a, n).coeff(x, xp);
                mass += post[t];
            }
            if (mass <= 0.0)
                continue;
            for (double& p : post)
                p /= mass;
            row.push_back({xp, grid_.nearest(post), mass});
            total += mass;
        }
        for (auto& tr : row)
            tr.probability /= total;
        return row;
    }

    std::vector<OcmModel> models_;
    SimplexGrid grid_;
    int horizon_ = 0;
    int states_ = 0;
    int actions_ = 0;
    std::vector<std::vector<GridTransition>> rows_;
};

inline GridKernel grid_kernel(std::vector<OcmModel> models, int resolution) {
    if (resolution < 1)
        throw ArgumentError("grid resolution must be positive");
    return GridKernel(std::move(models), resolution);
}

/// Values on `(n, x, a, node)` with layout `((n-1) L + x) d + a` times nodes plus node.
struct GridSolution {
    Vector values;
    int horizon = 0;
    int states = 0;
    int actions = 0;
    int nodes = 0;
    int iterations = 0;

    double value(int n, int x, int a, int node) const {
        return values[static_cast<Eigen::Index>(
            ((static_cast<std::size_t>(n - 1) * states + x) * actions + a) * nodes + node)];
    }
};

/**
 * Value iteration for the discounted Bayesian QVI on the grid: continuation
 * `gamma v(n+1) + E r` versus inspection through the grid kernel, with a forced
 * inspection at the truncation level. Parameters (discount, cost, reward
 * timing) come from the first model.
 */
inline GridSolution solve_bayes_grid(const GridKernel& kernel, double tol = 1e-10, int max_iters = 1000000) {
    const auto& base = kernel.models().front();
    const double gamma = base.gamma();
    const double c = base.observation_cost();
    const double scale = base.reward_scale();
    GridSolution sol;
    sol.horizon = kernel.horizon();
    sol.states = kernel.num_states();
    sol.actions = kernel.num_actions();
    sol.nodes = kernel.grid().size();
    const auto size = static_cast<Eigen::Index>(sol.horizon) * sol.states * sol.actions * sol.nodes;
    auto at = [&](int n, int x, int a, int j) {
        return static_cast<Eigen::Index>(((static_cast<std::size_t>(n - 1) * sol.states + x) * sol.actions + a) *
                                             sol.nodes +
                                         j);
    };
    Vector reward(size);
    for (int n = 1; n <= sol.horizon; ++n)
        for (int x = 0; x < sol.states; ++x)
            for (int a = 0; a < sol.actions; ++a)
                for (int j = 0; j < sol.nodes; ++j)
                    reward[at(n, x, a, j)] = scale * kernel.expected_reward(n, x, a, j);

    Vector v = Vector::Zero(size);
    Matrix post(sol.states, sol.nodes);
    for (int it = 1; it <= max_iters; ++it) {
        for (int xp = 0; xp < sol.states; ++xp)
            for (int j = 0; j < sol.nodes; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                for (int ap = 0; ap < sol.actions; ++ap)
                    best = std::max(best, gamma * v[at(1, xp, ap, j)] + scale * base.reward(xp, ap));
                post(xp, j) = best;
            }
        Vector next(size);
        for (int n = 1; n <= sol.horizon; ++n)
            for (int x = 0; x < sol.states; ++x)
                for (int a = 0; a < sol.actions; ++a)
                    for (int j = 0; j < sol.nodes; ++j) {
                        double obs = 0.0;
                        for (const auto& tr : kernel.row(n, x, a, j))
                            obs += tr.probability * post(tr.state, tr.node);
                        obs -= c;
                        const auto i = at(n, x, a, j);
                        if (n == sol.horizon) {
                            next[i] = obs;
                        } else {
                            next[i] = std::max(gamma * v[at(n + 1, x, a, j)] + reward[i], obs);
                        }
                    }
        const double step = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        sol.iterations = it;
        if (step <= tol) {
            sol.values = std::move(v);
            return sol;
        }
    }
    throw ConvergenceError("grid value iteration did not reach the tolerance", tol);
}

} // namespace ocm
