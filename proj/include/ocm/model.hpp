#pragma once

#include "ocm/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ocm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// State spaces up to this size keep their transition powers dense.
inline constexpr int dense_storage_limit = 512;
inline constexpr double stochastic_tolerance = 1e-12;
inline constexpr double generator_tolerance = 1e-10;

// ---------------------------------------------------------------------------
// KernelMatrix
// ---------------------------------------------------------------------------

/**
 * Square nonnegative matrix (a transition kernel or one of its powers) held
 * either as a dense row-major matrix or as compressed sparse rows.
 *
 * Row iteration skips exact zeros in both layouts, so consumers can scatter
 * over the support of a row without caring about the storage.
 */
class KernelMatrix {
  public:
    KernelMatrix() = default;
    explicit KernelMatrix(RowMatrix dense) : data_(std::move(dense)) {}
    explicit KernelMatrix(SparseMatrix sparse) : data_(std::move(sparse)) {
        std::get<SparseMatrix>(data_).makeCompressed();
    }

    /// Chooses dense storage for `size <= dense_storage_limit`, sparse otherwise.
    static KernelMatrix with_default_storage(const Matrix& m) {
        if (m.rows() <= dense_storage_limit)
            return KernelMatrix(RowMatrix(m));
        return KernelMatrix(SparseMatrix(m.sparseView(1.0, 0.0)));
    }

    static KernelMatrix identity(int size, bool dense) {
        if (dense)
            return KernelMatrix(RowMatrix(RowMatrix::Identity(size, size)));
        SparseMatrix id(size, size);
        id.setIdentity();
        return KernelMatrix(std::move(id));
    }

    bool is_dense() const noexcept { return std::holds_alternative<RowMatrix>(data_); }

    int size() const {
        return std::visit([](const auto& m) { return static_cast<int>(m.rows()); }, data_);
    }

    const RowMatrix& dense() const { return std::get<RowMatrix>(data_); }
    const SparseMatrix& sparse() const { return std::get<SparseMatrix>(data_); }

    double coeff(int row, int col) const {
        if (is_dense())
            return dense()(row, col);
        return sparse().coeff(row, col);
    }

    /// Returns `K * v`.
    Vector apply(const Vector& v) const {
        if (is_dense())
            return dense() * v;
        return sparse() * v;
    }

    template <class F>
    void for_each_in_row(int row, F&& f) const {
        if (is_dense()) {
            const auto& m = dense();
            const double* p = m.data() + static_cast<std::ptrdiff_t>(row) * m.cols();
            for (int c = 0; c < m.cols(); ++c)
                if (p[c] != 0.0)
                    f(c, p[c]);
        } else {
            for (SparseMatrix::InnerIterator it(sparse(), row); it; ++it)
                if (it.value() != 0.0)
                    f(static_cast<int>(it.col()), it.value());
        }
    }

    Matrix to_dense() const {
        if (is_dense())
            return Matrix(dense());
        return Matrix(sparse());
    }

    /// Matrix product `(*this) * rhs`, keeping the storage of `*this`.
    KernelMatrix multiply(const KernelMatrix& rhs) const {
        if (is_dense()) {
            if (rhs.is_dense())
                return KernelMatrix(RowMatrix(dense() * rhs.dense()));
            return KernelMatrix(RowMatrix(dense() * rhs.sparse()));
        }
        SparseMatrix prod = rhs.is_dense() ? SparseMatrix((sparse() * rhs.dense()).sparseView(1.0, 0.0))
                                           : SparseMatrix(sparse() * rhs.sparse());
        return KernelMatrix(std::move(prod));
    }

  private:
    std::variant<RowMatrix, SparseMatrix> data_;
};

// ---------------------------------------------------------------------------
// Power cache
// ---------------------------------------------------------------------------

/// Growable memo of `P_a^n`. Each new `n` costs one matrix product.
class PowerCache {
  public:
    explicit PowerCache(std::vector<KernelMatrix> base) : base_(std::move(base)), powers_(base_.size()) {}

    const KernelMatrix& power(int action, int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto& list = powers_[static_cast<std::size_t>(action)];
        const auto& base = base_[static_cast<std::size_t>(action)];
        if (list.empty())
            list.push_back(std::make_unique<const KernelMatrix>(KernelMatrix::identity(base.size(), base.is_dense())));
        while (static_cast<int>(list.size()) <= n)
            list.push_back(std::make_unique<const KernelMatrix>(list.back()->multiply(base)));
        return *list[static_cast<std::size_t>(n)];
    }

    /// Number of memoized powers for `action` (including the identity).
    int cached(int action) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return static_cast<int>(powers_[static_cast<std::size_t>(action)].size());
    }

  private:
    mutable std::mutex mutex_;
    std::vector<KernelMatrix> base_;
    std::vector<std::vector<std::unique_ptr<const KernelMatrix>>> powers_;
};

// ---------------------------------------------------------------------------
// OcmModel
// ---------------------------------------------------------------------------

/// When the one-step reward is paid within a step of an infinite-horizon model.
enum class RewardTiming {
    start_of_step, ///< collected at the current state, undiscounted
    end_of_step,   ///< collected one step later, so discounted once by gamma
};

struct AbsorbingState {
    int state = 0;
    double pinned_value = 0.0;
};

namespace detail {

inline std::string indexed(const std::string& key, std::size_t i) {
    return key + "[" + std::to_string(i) + "]";
}

inline void check_stochastic(const Matrix& p, const std::string& path) {
    if (p.rows() != p.cols())
        throw ValidationError(path, "matrix must be square, got " + std::to_string(p.rows()) + "x" +
                                        std::to_string(p.cols()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            const double v = p(r, c);
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError(path, "row " + std::to_string(r) + " has a negative or non-finite entry at column " +
                                                std::to_string(c));
            sum += v;
        }
        if (std::abs(sum - 1.0) > stochastic_tolerance)
            throw ValidationError(path, "row " + std::to_string(r) + " sums to " + std::to_string(sum) +
                                            ", expected 1");
    }
}

} // namespace detail

/**
 * A finite Markov decision process with observation costs: per-action
 * row-stochastic kernels, a one-step reward `r(x,a)`, observation cost,
 * discount, switching costs and the truncation horizon.
 *
 * Instances are immutable. Copies share the transition kernels and the power
 * cache, so `with_observation_cost()` and friends are cheap.
 */
class OcmModel {
  public:
    OcmModel(std::vector<Matrix> transitions, Matrix reward, double observation_cost, double gamma, int horizon,
             Matrix switching_cost = Matrix(), std::vector<AbsorbingState> absorbing = {}) {
        if (transitions.empty())
            throw ValidationError("transition", "at least one action is required");
        const auto states = transitions.front().rows();
        if (states < 1)
            throw ValidationError("states", "at least one state is required");
        std::vector<KernelMatrix> kernels;
        kernels.reserve(transitions.size());
        for (std::size_t a = 0; a < transitions.size(); ++a) {
            const auto path = detail::indexed("transition", a);
            if (transitions[a].rows() != states)
                throw ValidationError(path, "expected " + std::to_string(states) + " rows");
            detail::check_stochastic(transitions[a], path);
            kernels.push_back(KernelMatrix::with_default_storage(transitions[a]));
        }
        const auto actions = static_cast<Eigen::Index>(transitions.size());
        if (reward.rows() != states || reward.cols() != actions)
            throw ValidationError("reward", "expected a " + std::to_string(states) + "x" + std::to_string(actions) +
                                                " matrix");
        if (!reward.allFinite())
            throw ValidationError("reward", "entries must be finite");
        if (!(observation_cost >= 0.0) || !std::isfinite(observation_cost))
            throw ValidationError("c_obs", "must be finite and nonnegative");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ValidationError("gamma", "must lie in (0, 1)");
        if (horizon < 1)
            throw ValidationError("horizon", "must be at least 1");
        if (switching_cost.size() == 0)
            switching_cost = Matrix::Zero(actions, actions);
        if (switching_cost.rows() != actions || switching_cost.cols() != actions)
            throw ValidationError("switching_cost", "expected a " + std::to_string(actions) + "x" +
                                                        std::to_string(actions) + " matrix");
        for (Eigen::Index i = 0; i < actions; ++i) {
            if (switching_cost(i, i) != 0.0)
                throw ValidationError("switching_cost", "diagonal entry " + std::to_string(i) + " must be zero");
            for (Eigen::Index j = 0; j < actions; ++j)
                if (!(switching_cost(i, j) >= 0.0) || !std::isfinite(switching_cost(i, j)))
                    throw ValidationError("switching_cost", "row " + std::to_string(i) +
                                                                " has a negative or non-finite entry");
        }
        pinned_.assign(static_cast<std::size_t>(states), std::nullopt);
        for (std::size_t i = 0; i < absorbing.size(); ++i) {
            const auto& s = absorbing[i];
            if (s.state < 0 || s.state >= states)
                throw ValidationError(detail::indexed("absorbing", i), "state index out of range");
            if (!std::isfinite(s.pinned_value))
                throw ValidationError(detail::indexed("absorbing", i), "pinned value must be finite");
            pinned_[static_cast<std::size_t>(s.state)] = s.pinned_value;
        }

        transitions_ = std::make_shared<const std::vector<KernelMatrix>>(kernels);
        cache_ = std::make_shared<PowerCache>(std::move(kernels));
        reward_ = std::move(reward);
        observation_cost_ = observation_cost;
        gamma_ = gamma;
        horizon_ = horizon;
        switching_cost_ = std::move(switching_cost);
        absorbing_ = std::move(absorbing);
    }

    int num_states() const { return transitions_->front().size(); }
    int num_actions() const { return static_cast<int>(transitions_->size()); }

    const KernelMatrix& transition(int action) const {
        check_action(action);
        return (*transitions_)[static_cast<std::size_t>(action)];
    }

    const Matrix& reward() const noexcept { return reward_; }
    double reward(int state, int action) const { return reward_(state, action); }
    double observation_cost() const noexcept { return observation_cost_; }
    double gamma() const noexcept { return gamma_; }
    int horizon() const noexcept { return horizon_; }
    const Matrix& switching_cost() const noexcept { return switching_cost_; }
    bool has_switching_cost() const { return switching_cost_.cwiseAbs().maxCoeff() > 0.0; }
    const std::vector<AbsorbingState>& absorbing() const noexcept { return absorbing_; }

    std::optional<double> pinned_value(int state) const { return pinned_[static_cast<std::size_t>(state)]; }

    RewardTiming reward_timing() const noexcept { return reward_timing_; }

    /// Factor applied to every reward in the discounted QVI.
    double reward_scale() const noexcept { return reward_timing_ == RewardTiming::end_of_step ? gamma_ : 1.0; }

    OcmModel with_reward_timing(RewardTiming timing) const {
        OcmModel copy = *this;
        copy.reward_timing_ = timing;
        return copy;
    }

    /// Memoized `P_a^n`.
    const KernelMatrix& power(int action, int n) const {
        check_action(action);
        if (n < 0)
            throw ArgumentError("matrix power must be nonnegative, got " + std::to_string(n));
        return cache_->power(action, n);
    }

    int cached_powers(int action) const { return cache_->cached(action); }

    const std::vector<std::string>& state_labels() const noexcept { return state_labels_; }
    const std::vector<std::string>& action_labels() const noexcept { return action_labels_; }

    OcmModel with_labels(std::vector<std::string> states, std::vector<std::string> actions) const {
        if (!states.empty() && static_cast<int>(states.size()) != num_states())
            throw ValidationError("states", "label count does not match the transition size");
        if (!actions.empty() && static_cast<int>(actions.size()) != num_actions())
            throw ValidationError("actions", "label count does not match the number of transitions");
        OcmModel copy = *this;
        copy.state_labels_ = std::move(states);
        copy.action_labels_ = std::move(actions);
        return copy;
    }

    OcmModel with_observation_cost(double c_obs) const {
        if (!(c_obs >= 0.0) || !std::isfinite(c_obs))
            throw ValidationError("c_obs", "must be finite and nonnegative");
        OcmModel copy = *this;
        copy.observation_cost_ = c_obs;
        return copy;
    }

    OcmModel with_switching_cost(double g) const {
        Matrix m = Matrix::Constant(num_actions(), num_actions(), g);
        m.diagonal().setZero();
        return with_switching_cost(m);
    }

    OcmModel with_switching_cost(const Matrix& g) const {
        OcmModel copy = *this;
        if (g.rows() != num_actions() || g.cols() != num_actions())
            throw ValidationError("switching_cost", "shape mismatch");
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            if (g(i, i) != 0.0)
                throw ValidationError("switching_cost", "diagonal entry " + std::to_string(i) + " must be zero");
            for (Eigen::Index j = 0; j < g.cols(); ++j)
                if (!(g(i, j) >= 0.0))
                    throw ValidationError("switching_cost", "row " + std::to_string(i) + " has a negative entry");
        }
        copy.switching_cost_ = g;
        return copy;
    }

    OcmModel with_horizon(int horizon) const {
        if (horizon < 1)
            throw ValidationError("horizon", "must be at least 1");
        OcmModel copy = *this;
        copy.horizon_ = horizon;
        return copy;
    }

    OcmModel with_reward(Matrix reward) const {
        if (reward.rows() != reward_.rows() || reward.cols() != reward_.cols() || !reward.allFinite())
            throw ValidationError("reward", "shape mismatch or non-finite entry");
        OcmModel copy = *this;
        copy.reward_ = std::move(reward);
        return copy;
    }

  private:
    void check_action(int action) const {
        if (action < 0 || action >= num_actions())
            throw ArgumentError("action index " + std::to_string(action) + " out of range [0, " +
                                std::to_string(num_actions()) + ")");
    }

    std::shared_ptr<const std::vector<KernelMatrix>> transitions_;
    std::shared_ptr<PowerCache> cache_;
    Matrix reward_;
    double observation_cost_ = 0.0;
    double gamma_ = 0.0;
    int horizon_ = 1;
    Matrix switching_cost_;
    std::vector<AbsorbingState> absorbing_;
    std::vector<std::optional<double>> pinned_;
    RewardTiming reward_timing_ = RewardTiming::start_of_step;
    std::vector<std::string> state_labels_;
    std::vector<std::string> action_labels_;
};

/// `P_a^n`, memoized on the model.
inline const KernelMatrix& n_step_matrix(const OcmModel& model, int action, int n) {
    return model.power(action, n);
}

// ---------------------------------------------------------------------------
// Open-loop action schedules
// ---------------------------------------------------------------------------

/// A finite family of open-loop schedules `f_theta(k)`, `k = 1, 2, ...`.
/// Schedules shorter than the requested step repeat their last action.
class OpenLoopActionSet {
  public:
    explicit OpenLoopActionSet(std::vector<std::vector<int>> schedules) : schedules_(std::move(schedules)) {
        if (schedules_.empty())
            throw ArgumentError("open-loop action set must not be empty");
        for (std::size_t t = 0; t < schedules_.size(); ++t)
            if (schedules_[t].empty())
                throw ArgumentError("schedule " + std::to_string(t) + " is empty");
    }

    /// One constant schedule per base action.
    static OpenLoopActionSet constant(int num_actions) {
        std::vector<std::vector<int>> s;
        for (int a = 0; a < num_actions; ++a)
            s.push_back({a});
        return OpenLoopActionSet(std::move(s));
    }

    int size() const { return static_cast<int>(schedules_.size()); }

    int action(int theta, int step) const {
        if (theta < 0 || theta >= size())
            throw ArgumentError("open-loop parameter " + std::to_string(theta) + " out of range");
        if (step < 1)
            throw ArgumentError("open-loop steps are 1-based, got " + std::to_string(step));
        const auto& s = schedules_[static_cast<std::size_t>(theta)];
        return s[std::min(static_cast<std::size_t>(step - 1), s.size() - 1)];
    }

    void validate(int num_actions, int horizon) const {
        for (int t = 0; t < size(); ++t)
            for (int k = 1; k <= horizon; ++k) {
                const int a = action(t, k);
                if (a < 0 || a >= num_actions)
                    throw ValidationError(detail::indexed("open_loop", static_cast<std::size_t>(t)),
                                          "step " + std::to_string(k) + " uses invalid action " + std::to_string(a));
            }
    }

  private:
    std::vector<std::vector<int>> schedules_;
};

/// Ordered product `P_{f(1)} ... P_{f(n)}`.
inline KernelMatrix open_loop_matrix(const OcmModel& model, const OpenLoopActionSet& actions, int theta, int n) {
    if (n < 1)
        throw ArgumentError("open-loop products need n >= 1");
    KernelMatrix product = model.transition(actions.action(theta, 1));
    for (int k = 2; k <= n; ++k)
        product = product.multiply(model.transition(actions.action(theta, k)));
    return product;
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// Throws ValidationError unless `q` is a generator (nonnegative off-diagonal,
/// zero row sums within `generator_tolerance`).
inline void check_generator(const Matrix& q, const std::string& path = "generator") {
    if (q.rows() != q.cols())
        throw ValidationError(path, "generator must be square");
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            if (!std::isfinite(q(r, c)))
                throw ValidationError(path, "row " + std::to_string(r) + " has a non-finite entry");
            if (r != c && q(r, c) < 0.0)
                throw ValidationError(path, "row " + std::to_string(r) + " has a negative off-diagonal rate");
            sum += q(r, c);
        }
        if (std::abs(sum) > generator_tolerance)
            throw ValidationError(path, "row " + std::to_string(r) + " sums to " + std::to_string(sum) +
                                            ", expected 0");
    }
}

/// Scaling and squaring with the degree-13 Pade approximant (no input checks).
inline Matrix expm_pade13(const Matrix& a) {
    static constexpr double b[] = {64764752532480000.0,
                                   32382376266240000.0,
                                   7771770303897600.0,
                                   1187353796428800.0,
                                   129060195264000.0,
                                   10559470521600.0,
                                   670442572800.0,
                                   33522128640.0,
                                   1323241920.0,
                                   40840800.0,
                                   960960.0,
                                   16380.0,
                                   182.0,
                                   1.0};
    constexpr double theta13 = 5.371920351148152;

    const auto n = a.rows();
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > theta13)
        s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Matrix as = a / std::ldexp(1.0, s);

    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Matrix u = as * u_inner;
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < s; ++k)
        r = r * r;
    return r;
}

/**
 * Transition matrix `e^Q` of a continuous-time generator over one time unit.
 *
 * Tiny negative round-off is clipped and rows are renormalized when their sum
 * is within 1e-9 of one; anything worse raises NumericError.
 */
inline Matrix expm(const Matrix& generator) {
    check_generator(generator);
    Matrix p = expm_pade13(generator);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            if (!std::isfinite(p(r, c)))
                throw NumericError("matrix exponential produced a non-finite entry");
            if (p(r, c) < 0.0) {
                if (p(r, c) < -1e-9)
                    throw NumericError("matrix exponential produced a negative probability at row " +
                                       std::to_string(r));
                p(r, c) = 0.0;
            }
        }
        const double sum = p.row(r).sum();
        if (std::abs(sum - 1.0) > 1e-9)
            throw NumericError("matrix exponential row " + std::to_string(r) + " sums to " + std::to_string(sum));
        p.row(r) /= sum;
    }
    return p;
}

/// Continuous-time model: per-action generators (rates per time unit) and a
/// running cost. Converted to a discrete OcmModel through `P_a = e^{Q_a}`.
struct RateModel {
    std::vector<Matrix> generators;
    Matrix cost; // states x actions; reward = -cost
    double gamma = 0.99;
    double observation_cost = 0.0;
    int horizon = 1;
    Matrix switching_cost;
    std::vector<int> absorbing_states;
    double absorbing_loss = 0.0; // per-step cost while absorbed
};

inline OcmModel to_ocm_model(const RateModel& rate) {
    std::vector<Matrix> kernels;
    kernels.reserve(rate.generators.size());
    for (std::size_t a = 0; a < rate.generators.size(); ++a) {
        check_generator(rate.generators[a], detail::indexed("generator", a));
        kernels.push_back(expm(rate.generators[a]));
    }
    std::vector<AbsorbingState> absorbing;
    for (int s : rate.absorbing_states)
        absorbing.push_back({s, -rate.absorbing_loss / (1.0 - rate.gamma)});
    return OcmModel(std::move(kernels), -rate.cost, rate.observation_cost, rate.gamma, rate.horizon,
                    rate.switching_cost, std::move(absorbing));
}

// ---------------------------------------------------------------------------
// Builtin models
// ---------------------------------------------------------------------------

enum class RewardKind {
    inverse, ///< r(x) = 1 / (|x| + 1)
    peak,    ///< r(0) = 2, r(+-2) = -1, 0 elsewhere
};

inline double random_walk_reward(RewardKind kind, int x) {
    switch (kind) {
    case RewardKind::inverse:
        return 1.0 / (std::abs(x) + 1.0);
    case RewardKind::peak:
        if (x == 0)
            return 2.0;
        if (x == 2 || x == -2)
            return -1.0;
        return 0.0;
    }
    return 0.0;
}

struct RandomWalkOptions {
    double gamma = 0.99;
    double observation_cost = 0.25;
    int horizon = 500;
    double switching_cost = 0.0;
    RewardTiming reward_timing = RewardTiming::start_of_step;
};

/**
 * Integer random walk on `{-L, ..., L}` with drift actions `+1` (index 0) and
 * `-1` (index 1). Action `+1` steps up with probability `theta`; action `-1`
 * steps down with probability `theta`. At `x = +-L` the mass that would leave
 * the interval stays put.
 */
inline OcmModel build_random_walk(double theta, int half_width, RewardKind kind, const RandomWalkOptions& opts = {}) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ArgumentError("random walk theta must lie in (0, 1)");
    if (half_width < 1)
        throw ArgumentError("random walk half-width must be at least 1");
    const int size = 2 * half_width + 1;
    Matrix up = Matrix::Zero(size, size);
    Matrix down = Matrix::Zero(size, size);
    for (int i = 0; i < size; ++i) {
        const int lo = std::max(i - 1, 0);
        const int hi = std::min(i + 1, size - 1);
        up(i, hi) += theta;
        up(i, lo) += 1.0 - theta;
        down(i, hi) += 1.0 - theta;
        down(i, lo) += theta;
    }
    Matrix reward(size, 2);
    std::vector<std::string> labels;
    for (int i = 0; i < size; ++i) {
        const int x = i - half_width;
        reward(i, 0) = reward(i, 1) = random_walk_reward(kind, x);
        labels.push_back(std::to_string(x));
    }
    Matrix g{{0.0, opts.switching_cost}, {opts.switching_cost, 0.0}};
    return OcmModel({up, down}, reward, opts.observation_cost, opts.gamma, opts.horizon, g)
        .with_labels(std::move(labels), {"+1", "-1"})
        .with_reward_timing(opts.reward_timing);
}

struct ToyOptions {
    double gamma = 0.9;
    double observation_cost = 0.1;
    int horizon = 200;
};

/// Two-state maintenance chain: under action `a` the state other than `a`
/// is absorbing and state `a` persists with probability `p`. Reward is 1
/// when state and action agree.
inline OcmModel build_two_state_toy(double p, const ToyOptions& opts = {}) {
    if (!(p > 0.0 && p < 1.0))
        throw ArgumentError("toy persistence probability must lie in (0, 1)");
    Matrix p0{{p, 1.0 - p}, {0.0, 1.0}};
    Matrix p1{{1.0, 0.0}, {1.0 - p, p}};
    Matrix reward{{1.0, 0.0}, {0.0, 1.0}};
    return OcmModel({p0, p1}, reward, opts.observation_cost, opts.gamma, opts.horizon)
        .with_labels({"0", "1"}, {"0", "1"});
}

struct SyntheticCtmcOptions {
    double gamma = 0.95;
    double observation_cost = 0.1;
    int horizon = 60;
    double switching_cost = 0.0;
};

/**
 * Sixteen-state progression chain in unit time steps: severity levels 0..14
 * and an absorbing failure state 15. Action 0 lets the chain progress; action
 * 1 slows progression and favours recovery at a running cost. The state cost
 * grows with severity and failure costs 2 per step forever.
 */
inline RateModel build_synthetic_ctmc(const SyntheticCtmcOptions& opts = {}) {
    constexpr int levels = 15;
    constexpr int failure = levels;
    RateModel rate;
    for (int a = 0; a < 2; ++a) {
        Matrix q = Matrix::Zero(levels + 1, levels + 1);
        for (int i = 0; i < levels; ++i) {
            const double worsen = a == 0 ? 0.3 * (1.0 + i / 15.0) : 0.12;
            const double recover = a == 0 ? 0.05 : 0.3;
            const double fail = 0.01 * i * (a == 0 ? 1.0 : 0.5);
            if (i + 1 < levels)
                q(i, i + 1) = worsen;
            else
                q(i, failure) += worsen;
            if (i > 0)
                q(i, i - 1) = recover;
            q(i, failure) += fail;
            q(i, i) = -q.row(i).sum();
        }
        rate.generators.push_back(q);
    }
    rate.cost = Matrix::Zero(levels + 1, 2);
    for (int i = 0; i < levels; ++i) {
        rate.cost(i, 0) = i / 14.0;
        rate.cost(i, 1) = i / 14.0 + 0.3;
    }
    rate.gamma = opts.gamma;
    rate.observation_cost = opts.observation_cost;
    rate.horizon = opts.horizon;
    rate.switching_cost = Matrix{{0.0, opts.switching_cost}, {opts.switching_cost, 0.0}};
    rate.absorbing_states = {failure};
    rate.absorbing_loss = 2.0;
    return rate;
}

} // namespace ocm
