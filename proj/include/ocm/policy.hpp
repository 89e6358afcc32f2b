#pragma once

#include "ocm/csv.hpp"
#include "ocm/solver.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ocm {

/**
 * Observation/action policy on the augmented state `(n, x, a)`.
 *
 * `inspect` follows the QviSystem layout. The post-observation action depends
 * on the observed state and, through switching costs, on the previous control;
 * it does not depend on `n`.
 */
class OcmPolicy {
  public:
    OcmPolicy(int horizon, int states, int controls, std::vector<bool> inspect, Eigen::MatrixXi action,
              std::vector<int> fresh_action)
        : horizon_(horizon), states_(states), controls_(controls), inspect_(std::move(inspect)),
          action_(std::move(action)), fresh_action_(std::move(fresh_action)) {}

    int horizon() const noexcept { return horizon_; }
    int num_states() const noexcept { return states_; }
    int num_controls() const noexcept { return controls_; }

    bool inspect(int n, int x, int a) const { return inspect_[flat(n, x, a)]; }
    const std::vector<bool>& inspect_mask() const noexcept { return inspect_; }

    /// Control chosen after observing `x'` when `a` was the previous control.
    int post_obs_action(int xp, int a) const { return action_(a, xp); }
    int post_obs_action(int n, int xp, int a) const {
        (void)flat(n, xp, a);
        return action_(a, xp);
    }
    const Eigen::MatrixXi& action_map() const noexcept { return action_; }

    /// Control chosen after observing `x'` with no switching cost in play.
    int fresh_action(int xp) const { return fresh_action_[static_cast<std::size_t>(xp)]; }

    /// `min{n >= 1 : inspect(n, x, a)}`. The forced observation at `n = N` keeps
    /// this finite.
    int waiting_time(int x, int a) const {
        for (int n = 1; n <= horizon_; ++n)
            if (inspect_[flat(n, x, a)])
                return n;
        return horizon_;
    }

    /// Waiting time after observing `x` and choosing the switching-free action.
    int waiting_time(int x) const { return waiting_time(x, fresh_action(x)); }

    CsvTable to_csv(const std::vector<std::string>& state_labels = {}) const {
        CsvTable t;
        t.header = {"n", "x", "a", "inspect", "post_obs_action"};
        for (int n = 1; n <= horizon_; ++n)
            for (int x = 0; x < states_; ++x)
                for (int a = 0; a < controls_; ++a)
                    t.add_row({format_int(n),
                               state_labels.empty() ? format_int(x) : state_labels[static_cast<std::size_t>(x)],
                               format_int(a), inspect(n, x, a) ? "1" : "0", format_int(post_obs_action(x, a))});
        return t;
    }

  private:
    std::size_t flat(int n, int x, int a) const {
        if (n < 1 || n > horizon_ || x < 0 || x >= states_ || a < 0 || a >= controls_)
            throw ArgumentError("policy index out of range");
        return (static_cast<std::size_t>(n - 1) * states_ + x) * controls_ + a;
    }

    int horizon_;
    int states_;
    int controls_;
    std::vector<bool> inspect_;
    Eigen::MatrixXi action_;
    std::vector<int> fresh_action_;
};

/**
 * Reads the policy off a solved value array: inspect where the obstacle beats
 * the continuation value by more than `tol` (ties continue), always inspect at
 * `n = N`, and re-optimize the control by the inner argmax (lowest index on ties).
 */
inline OcmPolicy extract_policy(const QviSystem& sys, const Vector& v, double tol = 1e-9) {
    ObservationValues obs;
    const Vector mu = sys.obstacle(v, obs);
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    const auto inner = v.size() - m;
    Vector cont = mu; // terminal entries unused
    cont.head(inner) = sys.gamma() * v.segment(m, inner) + sys.running_rewards().head(inner);

    std::vector<bool> inspect(static_cast<std::size_t>(v.size()), false);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        inspect[static_cast<std::size_t>(i)] = i >= inner || mu[i] > cont[i] + tol;

    std::vector<int> fresh(static_cast<std::size_t>(sys.num_states()), 0);
    for (int xp = 0; xp < sys.num_states(); ++xp) {
        double best = -std::numeric_limits<double>::infinity();
        for (int ap = 0; ap < sys.num_controls(); ++ap) {
            const double val = sys.gamma() * v[static_cast<Eigen::Index>(sys.flat(1, xp, ap))] +
                               sys.observation_reward(xp, ap);
            if (val > best) {
                best = val;
                fresh[static_cast<std::size_t>(xp)] = ap;
            }
        }
    }
    return OcmPolicy(sys.horizon(), sys.num_states(), sys.num_controls(), std::move(inspect), obs.arg,
                     std::move(fresh));
}

/// Value of following `policy` exactly, by one linear solve with the same
/// block structure as the Newton Jacobian.
inline Vector evaluate_policy(const QviSystem& sys, const OcmPolicy& policy,
                              LinearSolver solver = LinearSolver::block_elimination) {
    if (policy.horizon() != sys.horizon() || policy.num_states() != sys.num_states() ||
        policy.num_controls() != sys.num_controls())
        throw ArgumentError("policy shape does not match the system");
    StructuredJacobian jac = continuation_jacobian(sys);
    jac.target = policy.action_map();
    Vector rhs = sys.running_rewards();
    for (int n = 1; n <= sys.horizon(); ++n)
        for (int x = 0; x < sys.num_states(); ++x) {
            const auto pinned = sys.pinned_value(x);
            for (int a = 0; a < sys.num_controls(); ++a) {
                const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
                if (pinned) {
                    jac.super[i] = 0.0;
                    rhs[i] = *pinned;
                } else if (policy.inspect(n, x, a)) {
                    jac.super[i] = 0.0;
                    jac.coupling[i] = sys.gamma();
                    double expected = 0.0;
                    sys.kernel(a, n).for_each_in_row(x, [&](int xp, double p) {
                        const int ap = policy.post_obs_action(xp, a);
                        expected += p * (sys.observation_reward(xp, ap) - sys.switching_cost(a, ap));
                    });
                    rhs[i] = expected - sys.observation_cost();
                }
            }
        }
    return solve_linear(sys, jac, rhs, solver);
}

// ---------------------------------------------------------------------------
// Two-state toy closed form
// ---------------------------------------------------------------------------

/// Sentinel inspection interval meaning "never observe".
inline constexpr int never_observe = std::numeric_limits<int>::max();

struct ToyClosedForm {
    double p = 0.0;
    double gamma = 0.0;
    double observation_cost = 0.0;
    double v1 = 0.0;
    int t_star = 1;            ///< optimal interval, or never_observe
    double tail_bound = 0.0;   ///< bound on the candidates beyond m_max
    std::vector<double> values; ///< v(1), v(2), ... as far as reconstructed

    /// `v(n)` for `n >= 1`; beyond the stored range the value is extended by
    /// the optimal stationary rule.
    double value(int n) const {
        if (n >= 1 && n <= static_cast<int>(values.size()))
            return values[static_cast<std::size_t>(n - 1)];
        if (t_star == never_observe)
            return std::pow(p, n) / (1.0 - gamma * p);
        return 1.0 - observation_cost + gamma * v1;
    }
};

/// Value of observing every `m` steps in the two-state model, starting one
/// step after an observation.
inline double toy_interval_value(double p, double gamma, double c_obs, int m) {
    if (m < 1)
        throw ArgumentError("inspection interval must be at least 1");
    double geometric = 0.0;
    double term = 1.0;
    for (int k = 0; k <= m - 2; ++k) {
        geometric += term;
        term *= gamma * p;
    }
    return (p * geometric + std::pow(gamma, m - 1) * (1.0 - c_obs)) / (1.0 - std::pow(gamma, m));
}

/**
 * Closed-form value of the two-state toy model: the best periodic inspection
 * interval `m` in `[1, m_max]`, or the never-observe limit `p / (1 - gamma p)`
 * when that is strictly larger.
 */
inline ToyClosedForm toy_closed_form(double p, double gamma, double c_obs, int m_max = 100000) {
    if (!(p > 0.0 && p < 1.0) || !(gamma > 0.0 && gamma < 1.0) || !(c_obs >= 0.0))
        throw ArgumentError("toy closed form needs p, gamma in (0,1) and c_obs >= 0");
    if (m_max < 2)
        throw ArgumentError("m_max must be at least 2");
    ToyClosedForm out;
    out.p = p;
    out.gamma = gamma;
    out.observation_cost = c_obs;
    double best = -std::numeric_limits<double>::infinity();
    // running sum_{k <= m-2} (gamma p)^k and gamma^{m-1}
    double geometric = 0.0;
    double term = 1.0;
    double gamma_pow = 1.0;
    for (int m = 1; m <= m_max; ++m) {
        if (m >= 2) {
            geometric += term;
            term *= gamma * p;
            gamma_pow *= gamma;
        }
        const double val = (p * geometric + gamma_pow * (1.0 - c_obs)) / (1.0 - gamma_pow * gamma);
        if (val > best) {
            best = val;
            out.t_star = m;
        }
    }
    const double limit = p / (1.0 - gamma * p);
    // Candidates beyond m_max differ from the limit by at most this much.
    out.tail_bound = std::pow(gamma, m_max) * (std::abs(limit) + std::abs(1.0 - c_obs) + 1.0) /
                     (1.0 - std::pow(gamma, m_max));
    // finite candidates that only creep up to the limit count as never observing
    if (limit >= best - 1e-12 * std::max(1.0, std::abs(limit))) {
        best = limit;
        out.t_star = never_observe;
    }
    out.v1 = best;

    const int stored = out.t_star == never_observe ? 64 : out.t_star;
    out.values.assign(static_cast<std::size_t>(stored), 0.0);
    if (out.t_star == never_observe) {
        for (int n = 1; n <= stored; ++n)
            out.values[static_cast<std::size_t>(n - 1)] = std::pow(p, n) / (1.0 - gamma * p);
    } else {
        out.values.back() = 1.0 - c_obs + gamma * out.v1;
        for (int n = stored - 1; n >= 1; --n)
            out.values[static_cast<std::size_t>(n - 1)] =
                std::pow(p, n) + gamma * out.values[static_cast<std::size_t>(n)];
    }
    return out;
}

/// Waiting time per state (rows) for each labelled policy (columns).
inline CsvTable waiting_time_table(const std::vector<std::pair<std::string, OcmPolicy>>& policies,
                                   const std::vector<std::string>& state_labels) {
    CsvTable t;
    t.header.push_back("state");
    for (const auto& [label, policy] : policies) {
        if (policy.num_states() != static_cast<int>(state_labels.size()))
            throw ArgumentError("policy '" + label + "' does not match the state labels");
        t.header.push_back(label);
    }
    for (std::size_t x = 0; x < state_labels.size(); ++x) {
        std::vector<std::string> row{state_labels[x]};
        for (const auto& entry : policies)
            row.push_back(format_int(entry.second.waiting_time(static_cast<int>(x))));
        t.add_row(std::move(row));
    }
    return t;
}

} // namespace ocm
