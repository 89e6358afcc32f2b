#pragma once

#include "ocm/model.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ocm {

/// Continuation/obstacle ties closer than this are classified as "continue".
inline constexpr double branch_tie_tolerance = 1e-12;

/// Per-index residual values together with the branch that attained them.
struct ResidualVector {
    Vector values;
    std::vector<bool> obstacle_active;

    double norm() const { return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff(); }
};

/// Post-observation values `h(a, x') = max_{a'} (gamma u(1,x',a') + r(x',a') - g(a,a'))`
/// for every pre-observation control `a`, plus the maximizing `a'`.
struct ObservationValues {
    Matrix value;        // controls x states
    Eigen::MatrixXi arg; // controls x states
};

/**
 * Truncated infinite-horizon QVI on the augmented state `(n, x, a)`, with
 * `n = 1..N` the time since the last observation.
 *
 * Values are stored n-major: `index(n, x, a) = ((n-1) L + x) d + a`, so each
 * elapsed-time level is a contiguous block of `L d` entries.
 *
 * Controls are the model's actions, or the parameters of an open-loop action
 * set when one is supplied.
 */
class QviSystem {
  public:
    explicit QviSystem(OcmModel model) : model_(std::move(model)) {
        controls_ = model_.num_actions();
        build();
    }

    QviSystem(OcmModel model, OpenLoopActionSet actions)
        : model_(std::move(model)), open_loop_(std::make_shared<OpenLoopActionSet>(std::move(actions))) {
        if (model_.has_switching_cost())
            throw ArgumentError("switching costs are not supported together with open-loop action sets");
        open_loop_->validate(model_.num_actions(), model_.horizon() + 1);
        controls_ = open_loop_->size();
        build();
    }

    const OcmModel& model() const noexcept { return model_; }
    int num_states() const noexcept { return states_; }
    int num_controls() const noexcept { return controls_; }
    int horizon() const noexcept { return horizon_; }
    double gamma() const noexcept { return model_.gamma(); }
    double observation_cost() const noexcept { return model_.observation_cost(); }
    bool is_open_loop() const noexcept { return open_loop_ != nullptr; }

    std::size_t block_size() const noexcept { return static_cast<std::size_t>(states_) * controls_; }
    std::size_t size() const noexcept { return block_size() * static_cast<std::size_t>(horizon_); }

    std::size_t index(int n, int x, int a) const {
        check(n, x, a);
        return (static_cast<std::size_t>(n - 1) * states_ + x) * controls_ + a;
    }

    /// Base action applied `step` steps (1-based) after an observation under control `a`.
    int base_action(int a, int step) const { return open_loop_ ? open_loop_->action(a, step) : a; }

    /// `P_a^n`, or the ordered open-loop product for open-loop controls.
    const KernelMatrix& kernel(int a, int n) const {
        if (a < 0 || a >= controls_ || n < 0 || n > horizon_)
            throw ArgumentError("kernel index out of range");
        if (!open_loop_)
            return model_.power(a, n);
        return *open_loop_kernels_[static_cast<std::size_t>(n) * controls_ + a];
    }

    /// `(Q^n_a r)_x`, the expected reward collected at elapsed time `n` (times
    /// gamma for end-of-step reward timing).
    double running_reward(int n, int x, int a) const { return running_reward_[index(n, x, a)]; }
    const Vector& running_rewards() const noexcept { return running_reward_; }

    /// Reward collected at the observation instant when control `a` is chosen.
    double observation_reward(int x, int a) const { return observation_reward_(x, a); }

    double switching_cost(int from, int to) const {
        return open_loop_ ? 0.0 : model_.switching_cost()(from, to);
    }

    std::optional<double> pinned_value(int x) const { return model_.pinned_value(x); }
    bool has_pinned() const noexcept { return !model_.absorbing().empty(); }

    /// Smallest entry of the obstacle cost `c_obs - r/gamma + g/gamma`.
    double min_obstacle_cost() const noexcept { return min_obstacle_cost_; }

    ObservationValues observation_values(const Vector& u) const {
        check_layout(u);
        const double gamma = model_.gamma();
        ObservationValues out{Matrix(controls_, states_), Eigen::MatrixXi(controls_, states_)};
        for (int a = 0; a < controls_; ++a) {
            for (int xp = 0; xp < states_; ++xp) {
                double best = -std::numeric_limits<double>::infinity();
                int arg = 0;
                for (int ap = 0; ap < controls_; ++ap) {
                    const double v = gamma * u[flat(1, xp, ap)] + observation_reward_(xp, ap) - switching_cost(a, ap);
                    if (v > best) { // strict: ties keep the lowest index
                        best = v;
                        arg = ap;
                    }
                }
                out.value(a, xp) = best;
                out.arg(a, xp) = arg;
            }
        }
        return out;
    }

    /// Obstacle `Mu` over the full layout.
    Vector obstacle(const Vector& u) const {
        ObservationValues obs;
        return obstacle(u, obs);
    }

    Vector obstacle(const Vector& u, ObservationValues& obs) const {
        obs = observation_values(u);
        Vector mu(static_cast<Eigen::Index>(size()));
        const double c = model_.observation_cost();
        for (int a = 0; a < controls_; ++a) {
            const Vector h = obs.value.row(a).transpose();
            for (int n = 1; n <= horizon_; ++n) {
                const Vector ph = kernel(a, n).apply(h);
                for (int x = 0; x < states_; ++x)
                    mu[flat(n, x, a)] = ph[x] - c;
            }
        }
        return mu;
    }

    /// Obstacle at a single index, optionally reporting the inner argmax per `x'`.
    double inspection_value(const Vector& u, int n, int x, int a, std::vector<int>* argmax = nullptr) const {
        check(n, x, a);
        check_layout(u);
        const double gamma = model_.gamma();
        if (argmax)
            argmax->assign(static_cast<std::size_t>(states_), 0);
        double total = 0.0;
        kernel(a, n).for_each_in_row(x, [&](int xp, double p) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int ap = 0; ap < controls_; ++ap) {
                const double v = gamma * u[flat(1, xp, ap)] + observation_reward_(xp, ap) - switching_cost(a, ap);
                if (v > best) {
                    best = v;
                    arg = ap;
                }
            }
            total += p * best;
            if (argmax)
                (*argmax)[static_cast<std::size_t>(xp)] = arg;
        });
        return total - model_.observation_cost();
    }

    /// `u(n,x,a) - gamma u(n+1,x,a) - (Q^n_a r)_x`; undefined on the terminal level.
    double continuation_residual(const Vector& u, int n, int x, int a) const {
        check(n, x, a);
        check_layout(u);
        if (n == horizon_)
            throw ArgumentError("continuation branch is disabled at the truncation level n = N");
        return u[flat(n, x, a)] - model_.gamma() * u[flat(n + 1, x, a)] - running_reward_[flat(n, x, a)];
    }

    /// Continuation residual over the full layout (terminal entries are left at zero).
    Vector continuation(const Vector& u) const {
        check_layout(u);
        Vector f = Vector::Zero(static_cast<Eigen::Index>(size()));
        const auto m = static_cast<Eigen::Index>(block_size());
        const auto inner = static_cast<Eigen::Index>(size()) - m;
        f.head(inner) = u.head(inner) - model_.gamma() * u.segment(m, inner) - running_reward_.head(inner);
        return f;
    }

    /// Flat index without range checks.
    std::size_t flat(int n, int x, int a) const noexcept {
        return (static_cast<std::size_t>(n - 1) * states_ + x) * controls_ + a;
    }

    void check_layout(const Vector& u) const {
        if (static_cast<std::size_t>(u.size()) != size())
            throw ArgumentError("value array has length " + std::to_string(u.size()) + ", expected " +
                                std::to_string(size()));
    }

  private:
    void check(int n, int x, int a) const {
        if (n < 1 || n > horizon_ || x < 0 || x >= states_ || a < 0 || a >= controls_)
            throw ArgumentError("augmented index (" + std::to_string(n) + ", " + std::to_string(x) + ", " +
                                std::to_string(a) + ") out of range");
    }

    void build() {
        states_ = model_.num_states();
        horizon_ = model_.horizon();
        const auto& r = model_.reward();

        if (open_loop_) {
            open_loop_kernels_.resize(static_cast<std::size_t>(horizon_ + 1) * controls_);
            for (int a = 0; a < controls_; ++a) {
                auto current = std::make_shared<const KernelMatrix>(
                    KernelMatrix::identity(states_, model_.transition(0).is_dense()));
                open_loop_kernels_[static_cast<std::size_t>(a)] = current;
                for (int n = 1; n <= horizon_; ++n) {
                    current = std::make_shared<const KernelMatrix>(
                        current->multiply(model_.transition(open_loop_->action(a, n))));
                    open_loop_kernels_[static_cast<std::size_t>(n) * controls_ + a] = current;
                }
            }
        }

        const double scale = model_.reward_scale();
        observation_reward_.resize(states_, controls_);
        for (int x = 0; x < states_; ++x)
            for (int a = 0; a < controls_; ++a)
                observation_reward_(x, a) = scale * r(x, base_action(a, 1));

        running_reward_.resize(static_cast<Eigen::Index>(size()));
        for (int a = 0; a < controls_; ++a)
            for (int n = 1; n <= horizon_; ++n) {
                const Vector ra = r.col(base_action(a, n));
                const Vector pr = kernel(a, n).apply(ra);
                for (int x = 0; x < states_; ++x)
                    running_reward_[flat(n, x, a)] = scale * pr[x];
            }

        const double gamma = model_.gamma();
        min_obstacle_cost_ = std::numeric_limits<double>::infinity();
        for (int a = 0; a < controls_; ++a)
            for (int ap = 0; ap < controls_; ++ap)
                for (int x = 0; x < states_; ++x)
                    min_obstacle_cost_ =
                        std::min(min_obstacle_cost_, model_.observation_cost() - observation_reward_(x, ap) / gamma +
                                                         switching_cost(a, ap) / gamma);
        if (min_obstacle_cost_ <= 0.0)
            warn("obstacle cost c_obs - r/gamma + g/gamma has minimum " + std::to_string(min_obstacle_cost_) +
                 " <= 0; uniqueness is not guaranteed by the comparison principle");
    }

    OcmModel model_;
    std::shared_ptr<OpenLoopActionSet> open_loop_;
    std::vector<std::shared_ptr<const KernelMatrix>> open_loop_kernels_;
    int states_ = 0;
    int controls_ = 0;
    int horizon_ = 0;
    Matrix observation_reward_;
    Vector running_reward_;
    double min_obstacle_cost_ = 0.0;
};

/// `min{F(u), u - Mu}` for `n < N`, `u - Mu` at `n = N`, `u - pinned` on absorbing rows.
inline ResidualVector qvi_residual(const QviSystem& sys, const Vector& u) {
    const Vector mu = sys.obstacle(u);
    const Vector f = sys.continuation(u);
    ResidualVector out{Vector(u.size()), std::vector<bool>(static_cast<std::size_t>(u.size()), false)};
    const int big_n = sys.horizon();
    for (int n = 1; n <= big_n; ++n)
        for (int x = 0; x < sys.num_states(); ++x) {
            const auto pinned = sys.pinned_value(x);
            for (int a = 0; a < sys.num_controls(); ++a) {
                const auto i = sys.flat(n, x, a);
                if (pinned) {
                    out.values[static_cast<Eigen::Index>(i)] = u[static_cast<Eigen::Index>(i)] - *pinned;
                    continue;
                }
                const double obs = u[static_cast<Eigen::Index>(i)] - mu[static_cast<Eigen::Index>(i)];
                if (n == big_n) {
                    out.values[static_cast<Eigen::Index>(i)] = obs;
                    out.obstacle_active[i] = true;
                    continue;
                }
                const double cont = f[static_cast<Eigen::Index>(i)];
                const bool active = obs < cont - branch_tie_tolerance;
                out.values[static_cast<Eigen::Index>(i)] = std::min(cont, obs);
                out.obstacle_active[i] = active;
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Finite horizon
// ---------------------------------------------------------------------------

/**
 * Undiscounted finite-horizon QVI over `(n, k, x, a)`, `0 <= k < n <= K`:
 * at time `n` the last observation happened at time `k`, revealed `x`, and
 * action `a` was chosen. Level `n = K` holds the terminal condition.
 *
 * Layout: `offset(n) = L d n (n-1) / 2`, `index = offset(n) + (k L + x) d + a`.
 */
class FiniteHorizonSystem {
  public:
    FiniteHorizonSystem(OcmModel model, int horizon) : model_(std::move(model)), horizon_(horizon) {
        if (horizon < 1)
            throw ArgumentError("finite horizon must be at least 1");
        states_ = model_.num_states();
        actions_ = model_.num_actions();
    }

    const OcmModel& model() const noexcept { return model_; }
    int horizon() const noexcept { return horizon_; }
    int num_states() const noexcept { return states_; }
    int num_actions() const noexcept { return actions_; }

    std::size_t block_size() const noexcept { return static_cast<std::size_t>(states_) * actions_; }
    std::size_t offset(int n) const noexcept {
        return block_size() * static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    }
    std::size_t size() const noexcept { return offset(horizon_ + 1); }

    std::size_t index(int n, int k, int x, int a) const {
        if (n < 1 || n > horizon_ || k < 0 || k >= n || x < 0 || x >= states_ || a < 0 || a >= actions_)
            throw ArgumentError("finite-horizon index out of range");
        return flat(n, k, x, a);
    }

    std::size_t flat(int n, int k, int x, int a) const noexcept {
        return offset(n) + (static_cast<std::size_t>(k) * states_ + x) * actions_ + a;
    }

    /// `(P_a^{m} r_a)_x`.
    double expected_reward(int m, int x, int a) const {
        double total = 0.0;
        model_.power(a, m).for_each_in_row(x, [&](int xp, double p) { total += p * model_.reward(xp, a); });
        return total;
    }

    /// Post-observation value at time `n` in state `x'` for previous action `a`:
    /// `max_{a'} (v^{n+1,n}_{a',x'} + r(x',a') - g(a,a'))` (with `v^{K+1,K} = 0`).
    double observation_value(const Vector& v, int n, int xp, int a, int* argmax = nullptr) const {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int ap = 0; ap < actions_; ++ap) {
            const double future = n < horizon_ ? v[static_cast<Eigen::Index>(flat(n + 1, n, xp, ap))] : 0.0;
            const double val = future + model_.reward(xp, ap) - model_.switching_cost()(a, ap);
            if (val > best) {
                best = val;
                arg = ap;
            }
        }
        if (argmax)
            *argmax = arg;
        return best;
    }

    /// `v^{n+1,k} + (P^{n-k}_a r_a)_x`.
    double continuation_value(const Vector& v, int n, int k, int x, int a) const {
        return v[static_cast<Eigen::Index>(flat(n + 1, k, x, a))] + expected_reward(n - k, x, a);
    }

    /// `(P^{n-k}_a max_{a'}(v^{n+1,n}_{a'} + r_{a'} - g_{a,a'}))_x - c_obs`.
    double inspection_value(const Vector& v, int n, int k, int x, int a) const {
        double total = 0.0;
        model_.power(a, n - k).for_each_in_row(x, [&](int xp, double p) {
            total += p * observation_value(v, n, xp, a);
        });
        return total - model_.observation_cost();
    }

    double terminal_value(int k, int x, int a) const { return expected_reward(horizon_ - k, x, a); }

    /// Value at time 0 after the free initial observation of `x0`.
    double initial_value(const Vector& v, int x0, int* argmax = nullptr) const {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int a = 0; a < actions_; ++a) {
            const double val = model_.reward(x0, a) + v[static_cast<Eigen::Index>(flat(1, 0, x0, a))];
            if (val > best) {
                best = val;
                arg = a;
            }
        }
        if (argmax)
            *argmax = arg;
        return best;
    }

  private:
    OcmModel model_;
    int horizon_;
    int states_ = 0;
    int actions_ = 0;
};

inline FiniteHorizonSystem finite_horizon_system(const OcmModel& model, int horizon) {
    return FiniteHorizonSystem(model, horizon);
}

/// Residual of the finite-horizon QVI: `min{cont, obs}` below the horizon,
/// `v - terminal` on level `K`.
inline ResidualVector finite_residual(const FiniteHorizonSystem& sys, const Vector& v) {
    if (static_cast<std::size_t>(v.size()) != sys.size())
        throw ArgumentError("finite-horizon value array has the wrong length");
    ResidualVector out{Vector(v.size()), std::vector<bool>(static_cast<std::size_t>(v.size()), false)};
    const int big_k = sys.horizon();
    for (int n = 1; n <= big_k; ++n)
        for (int k = 0; k < n; ++k)
            for (int x = 0; x < sys.num_states(); ++x)
                for (int a = 0; a < sys.num_actions(); ++a) {
                    const auto i = sys.flat(n, k, x, a);
                    const double val = v[static_cast<Eigen::Index>(i)];
                    if (n == big_k) {
                        out.values[static_cast<Eigen::Index>(i)] = val - sys.terminal_value(k, x, a);
                        continue;
                    }
                    const double cont = val - sys.continuation_value(v, n, k, x, a);
                    const double obs = val - sys.inspection_value(v, n, k, x, a);
                    out.values[static_cast<Eigen::Index>(i)] = std::min(cont, obs);
                    out.obstacle_active[i] = obs < cont - branch_tie_tolerance;
                }
    return out;
}

} // namespace ocm
