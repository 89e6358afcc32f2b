#pragma once

#include "ocm/csv.hpp"
#include "ocm/qvi.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

namespace ocm {

enum class LinearSolver {
    block_elimination, ///< exploits the block-bidiagonal plus first-block coupling structure
    sparse_lu,         ///< general sparse LU on the assembled Jacobian
};

struct PenaltyConfig {
    double rho = 1e3;
    int doublings = 6;
    double rel_tol = 1e-8;
    int max_newton_iters = 200;
    LinearSolver linear_solver = LinearSolver::block_elimination;
    /// Start each penalty level from the previous level's solution instead of the
    /// uncoupled initial guess.
    bool warm_start = false;
    /// Keep the solution of every penalty level in the result.
    bool keep_levels = false;

    void validate() const {
        if (!(rho > 0.0))
            throw ValidationError("rho", "must be positive");
        if (doublings < 0)
            throw ValidationError("doublings", "must be nonnegative");
        if (!(rel_tol > 0.0))
            throw ValidationError("rel_tol", "must be positive");
        if (max_newton_iters < 1)
            throw ValidationError("max_newton_iters", "must be at least 1");
    }
};

struct SolveReport {
    std::vector<double> rho_values;
    std::vector<int> newton_iterations;
    /// `|v^rho - v^{2 rho}|_inf`, one per doubling.
    std::vector<double> increments;
    double final_residual = 0.0;
    double wall_seconds = 0.0;
    int threads = 1;

    /// Two lines: Newton iterations per rho, and the increments between
    /// consecutive rho values.
    CsvTable to_csv() const {
        CsvTable t;
        t.header.push_back("line");
        for (double r : rho_values)
            t.header.push_back(format_double(r));
        std::vector<std::string> a{"iterations"};
        for (int it : newton_iterations)
            a.push_back(format_int(it));
        std::vector<std::string> b{"increment", ""};
        for (double inc : increments)
            b.push_back(format_double(inc));
        b.resize(t.header.size());
        a.resize(t.header.size());
        t.add_row(std::move(a));
        t.add_row(std::move(b));
        return t;
    }
};

struct PenaltySolution {
    Vector values;
    SolveReport report;
    std::vector<Vector> levels; // filled when PenaltyConfig::keep_levels
};

/**
 * Generalized derivative of the penalised residual, stored row-wise.
 *
 * Row `i = index(n, x, a)` reads
 * `diag_i u_i + super_i u_{i+m} - coupling_i sum_{x'} Q^n_a(x,x') u(1, x', target(a, x'))`
 * with `m` the block size. `target` is the inner argmax at the linearization point.
 */
struct StructuredJacobian {
    Vector diag;
    Vector super;
    Vector coupling;
    Eigen::MatrixXi target; // controls x states
};

/// Identity/shift rows with no coupling (the `rho = 0` continuation part).
inline StructuredJacobian continuation_jacobian(const QviSystem& sys) {
    const auto size = static_cast<Eigen::Index>(sys.size());
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    StructuredJacobian j{Vector::Ones(size), Vector::Zero(size), Vector::Zero(size),
                         Eigen::MatrixXi(sys.num_controls(), sys.num_states())};
    j.super.head(size - m).setConstant(-sys.gamma());
    for (int a = 0; a < sys.num_controls(); ++a)
        j.target.row(a).setConstant(a);
    return j;
}

namespace detail {

/// Residual and Jacobian at `u`, sharing one obstacle evaluation.
inline Vector penalised_system(const QviSystem& sys, const Vector& u, double rho, StructuredJacobian* jac) {
    ObservationValues obs;
    const Vector mu = sys.obstacle(u, obs);
    const Vector f = sys.continuation(u);
    const double gamma = sys.gamma();
    Vector g(u.size());
    if (jac) {
        *jac = continuation_jacobian(sys);
        jac->target = obs.arg;
    }
    const int big_n = sys.horizon();
    for (int n = 1; n <= big_n; ++n)
        for (int x = 0; x < sys.num_states(); ++x) {
            const auto pinned = sys.pinned_value(x);
            for (int a = 0; a < sys.num_controls(); ++a) {
                const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
                if (pinned) {
                    g[i] = u[i] - *pinned;
                    if (jac)
                        jac->super[i] = 0.0;
                    continue;
                }
                if (n == big_n) {
                    g[i] = u[i] - mu[i];
                    if (jac)
                        jac->coupling[i] = gamma;
                    continue;
                }
                const double gap = mu[i] - u[i];
                if (gap > 0.0) {
                    g[i] = f[i] - rho * gap;
                    if (jac) {
                        jac->diag[i] = 1.0 + rho;
                        jac->coupling[i] = rho * gamma;
                    }
                } else {
                    g[i] = f[i];
                }
            }
        }
    return g;
}

} // namespace detail

/// `F(u) - rho (Mu - u)^+` below the truncation level, `u - Mu` on it, `u - pinned`
/// on absorbing rows.
inline Vector penalised_residual(const QviSystem& sys, const Vector& u, double rho) {
    if (rho < 0.0)
        throw ArgumentError("penalty parameter must be nonnegative");
    return detail::penalised_system(sys, u, rho, nullptr);
}

inline StructuredJacobian generalized_jacobian(const QviSystem& sys, const Vector& u, double rho) {
    if (rho < 0.0)
        throw ArgumentError("penalty parameter must be nonnegative");
    StructuredJacobian jac;
    detail::penalised_system(sys, u, rho, &jac);
    return jac;
}

/// Assembles the structured Jacobian as a sparse matrix.
inline Eigen::SparseMatrix<double> assemble_jacobian(const QviSystem& sys, const StructuredJacobian& jac) {
    const auto size = static_cast<Eigen::Index>(sys.size());
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(2 * size));
    for (int n = 1; n <= sys.horizon(); ++n)
        for (int x = 0; x < sys.num_states(); ++x)
            for (int a = 0; a < sys.num_controls(); ++a) {
                const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
                trip.emplace_back(i, i, jac.diag[i]);
                if (jac.super[i] != 0.0)
                    trip.emplace_back(i, i + m, jac.super[i]);
                if (jac.coupling[i] != 0.0) {
                    const double c = jac.coupling[i];
                    sys.kernel(a, n).for_each_in_row(x, [&](int xp, double p) {
                        const auto col = static_cast<Eigen::Index>(sys.flat(1, xp, jac.target(a, xp)));
                        trip.emplace_back(i, col, -c * p);
                    });
                }
            }
    Eigen::SparseMatrix<double> j(size, size);
    j.setFromTriplets(trip.begin(), trip.end()); // duplicates are summed
    return j;
}

namespace detail {

/// Adds `c_i Q^n_a(x, x')` at `(row(x,a), col(x', target(a,x')))` for every coupled
/// row of block `n`.
template <class Dense>
void scatter_coupling(const QviSystem& sys, const StructuredJacobian& jac, int n, Dense& out) {
    const int d = sys.num_controls();
    for (int x = 0; x < sys.num_states(); ++x)
        for (int a = 0; a < d; ++a) {
            const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
            const double c = jac.coupling[i];
            if (c == 0.0)
                continue;
            const Eigen::Index row = static_cast<Eigen::Index>(x) * d + a;
            sys.kernel(a, n).for_each_in_row(x, [&](int xp, double p) {
                out(row, static_cast<Eigen::Index>(xp) * d + jac.target(a, xp)) += c * p;
            });
        }
}

/// `K_n y` for the coupling block of level `n`.
inline Vector coupling_apply(const QviSystem& sys, const StructuredJacobian& jac, int n, const Vector& y) {
    const int d = sys.num_controls();
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    Vector out = Vector::Zero(m);
    for (int x = 0; x < sys.num_states(); ++x)
        for (int a = 0; a < d; ++a) {
            const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
            const double c = jac.coupling[i];
            if (c == 0.0)
                continue;
            double acc = 0.0;
            sys.kernel(a, n).for_each_in_row(x, [&](int xp, double p) {
                acc += p * y[static_cast<Eigen::Index>(xp) * d + jac.target(a, xp)];
            });
            out[static_cast<Eigen::Index>(x) * d + a] = c * acc;
        }
    return out;
}

/**
 * Solves `J delta = b` by writing `delta_n = alpha_n + B_n delta_1` backward in
 * `n`, solving the dense first block, then recovering all blocks with a second
 * backward sweep. Only one `m x m` matrix is live at a time.
 */
inline Vector block_elimination_solve(const QviSystem& sys, const StructuredJacobian& jac, const Vector& b) {
    const int big_n = sys.horizon();
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    RowMatrix bmat = RowMatrix::Zero(m, m);
    Vector alpha = Vector::Zero(m);
    for (int n = big_n; n >= 1; --n) {
        const auto off = static_cast<Eigen::Index>(n - 1) * m;
        const auto diag = jac.diag.segment(off, m);
        const auto sup = jac.super.segment(off, m);
        if (n < big_n) {
            for (Eigen::Index r = 0; r < m; ++r) {
                if (sup[r] != 0.0)
                    bmat.row(r) *= -sup[r];
                else
                    bmat.row(r).setZero();
            }
            alpha = b.segment(off, m) - sup.cwiseProduct(alpha);
        } else {
            bmat.setZero();
            alpha = b.segment(off, m);
        }
        scatter_coupling(sys, jac, n, bmat);
        const Vector inv = diag.cwiseInverse();
        bmat = inv.asDiagonal() * bmat;
        alpha = alpha.cwiseProduct(inv);
    }
    // delta_1 = alpha_1 + B_1 delta_1
    Matrix first = Matrix::Identity(m, m) - Matrix(bmat);
    Eigen::PartialPivLU<Matrix> lu(first);
    const double rc = lu.rcond();
    if (!(rc >= 1e-14))
        throw SolverError("first-block system is singular (rcond " + std::to_string(rc) + ")");
    const Vector delta1 = lu.solve(alpha);
    if (!delta1.allFinite())
        throw SolverError("first-block solve produced non-finite values");

    Vector delta(b.size());
    Vector next;
    for (int n = big_n; n >= 1; --n) {
        const auto off = static_cast<Eigen::Index>(n - 1) * m;
        Vector rhs = b.segment(off, m) + coupling_apply(sys, jac, n, delta1);
        if (n < big_n)
            rhs -= jac.super.segment(off, m).cwiseProduct(next);
        next = rhs.cwiseQuotient(jac.diag.segment(off, m));
        delta.segment(off, m) = next;
    }
    return delta;
}

inline Vector sparse_lu_solve(const QviSystem& sys, const StructuredJacobian& jac, const Vector& b) {
    Eigen::SparseMatrix<double> j = assemble_jacobian(sys, jac);
    j.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(j);
    if (lu.info() != Eigen::Success)
        throw SolverError("sparse LU factorization failed: " + lu.lastErrorMessage());
    Vector x = lu.solve(b);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw SolverError("sparse LU solve failed");
    return x;
}

} // namespace detail

inline Vector solve_linear(const QviSystem& sys, const StructuredJacobian& jac, const Vector& b,
                           LinearSolver solver = LinearSolver::block_elimination) {
    if (solver == LinearSolver::sparse_lu)
        return detail::sparse_lu_solve(sys, jac, b);
    return detail::block_elimination_solve(sys, jac, b);
}

/// Result of one Newton run at a fixed penalty.
struct NewtonResult {
    Vector values;
    int iterations = 0;
    double last_step = 0.0;
};

/// Semismooth Newton for `G^rho(v) = 0` from `u0`. Iterations count linear solves.
inline NewtonResult newton_solve(const QviSystem& sys, const Vector& u0, double rho, const PenaltyConfig& config) {
    config.validate();
    sys.check_layout(u0);
    NewtonResult out{u0, 0, 0.0};
    double last_residual = 0.0;
    for (int it = 1; it <= config.max_newton_iters; ++it) {
        StructuredJacobian jac;
        const Vector g = detail::penalised_system(sys, out.values, rho, &jac);
        last_residual = g.cwiseAbs().maxCoeff();
        Vector delta;
        try {
            delta = solve_linear(sys, jac, g, config.linear_solver);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " at Newton iteration " + std::to_string(it) + ", rho " +
                              format_double(rho));
        }
        out.values -= delta;
        out.iterations = it;
        const double scale = std::max(1.0, out.values.cwiseAbs().maxCoeff());
        out.last_step = delta.cwiseAbs().maxCoeff() / scale;
        if (!std::isfinite(out.last_step))
            throw SolverError("Newton iterate became non-finite at iteration " + std::to_string(it));
        if (out.last_step <= config.rel_tol)
            return out;
    }
    throw ConvergenceError("Newton iteration did not converge in " + std::to_string(config.max_newton_iters) +
                               " iterations at rho " + format_double(rho),
                           last_residual);
}

/// Overload using `config.rho`.
inline NewtonResult newton_solve(const QviSystem& sys, const Vector& u0, const PenaltyConfig& config) {
    return newton_solve(sys, u0, config.rho, config);
}

/**
 * Solution of the `rho = 0` system in which the terminal level observes but
 * keeps the current control: a linear system with the same block structure.
 */
inline Vector assemble_initial_guess(const QviSystem& sys, LinearSolver solver = LinearSolver::block_elimination) {
    StructuredJacobian jac = continuation_jacobian(sys);
    Vector rhs = sys.running_rewards();
    const int big_n = sys.horizon();
    for (int x = 0; x < sys.num_states(); ++x) {
        const auto pinned = sys.pinned_value(x);
        for (int a = 0; a < sys.num_controls(); ++a) {
            for (int n = 1; n <= big_n; ++n) {
                const auto i = static_cast<Eigen::Index>(sys.flat(n, x, a));
                if (pinned) {
                    rhs[i] = *pinned;
                    jac.super[i] = 0.0;
                } else if (n == big_n) {
                    double expected = 0.0;
                    sys.kernel(a, n).for_each_in_row(
                        x, [&](int xp, double p) { expected += p * sys.observation_reward(xp, a); });
                    rhs[i] = expected - sys.observation_cost();
                    jac.coupling[i] = sys.gamma();
                }
            }
        }
    }
    return solve_linear(sys, jac, rhs, solver);
}

/// Runs Newton over `rho, 2 rho, ..., 2^doublings rho`.
inline PenaltySolution solve_qvi(const QviSystem& sys, const PenaltyConfig& config = {}) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    PenaltySolution out;
    const Vector guess = assemble_initial_guess(sys, config.linear_solver);
    Vector previous;
    double rho = config.rho;
    for (int level = 0; level <= config.doublings; ++level, rho *= 2.0) {
        const Vector& u0 = (config.warm_start && level > 0) ? previous : guess;
        NewtonResult res = newton_solve(sys, u0, rho, config);
        out.report.rho_values.push_back(rho);
        out.report.newton_iterations.push_back(res.iterations);
        if (level > 0)
            out.report.increments.push_back((res.values - previous).cwiseAbs().maxCoeff());
        previous = std::move(res.values);
        if (config.keep_levels)
            out.levels.push_back(previous);
    }
    out.values = std::move(previous);
    out.report.final_residual = qvi_residual(sys, out.values).norm();
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Fixed-point iteration `u <- max(gamma u(n+1) + Q^n r, Mu)` (equality on the
/// truncation level). A gamma-contraction, so it always converges.
inline Vector value_iteration_oracle(const QviSystem& sys, double tol, int max_iters = 1000000) {
    if (!(tol > 0.0))
        throw ArgumentError("value iteration tolerance must be positive");
    Vector u = Vector::Zero(static_cast<Eigen::Index>(sys.size()));
    const auto m = static_cast<Eigen::Index>(sys.block_size());
    const auto inner = u.size() - m;
    for (int it = 0; it < max_iters; ++it) {
        Vector next = sys.obstacle(u);
        const Vector cont = sys.gamma() * u.segment(m, inner) + sys.running_rewards().head(inner);
        next.head(inner) = next.head(inner).cwiseMax(cont);
        for (int x = 0; x < sys.num_states(); ++x)
            if (const auto pinned = sys.pinned_value(x))
                for (int n = 1; n <= sys.horizon(); ++n)
                    for (int a = 0; a < sys.num_controls(); ++a)
                        next[static_cast<Eigen::Index>(sys.flat(n, x, a))] = *pinned;
        const double step = (next - u).cwiseAbs().maxCoeff();
        u = std::move(next);
        if (step <= tol)
            return u;
    }
    throw ConvergenceError("value iteration did not reach the tolerance", tol);
}

/// Exact backward recursion of the finite-horizon QVI. Ties between the two
/// branches resolve to "continue"; the value is the same either way.
inline Vector solve_finite_horizon(const FiniteHorizonSystem& sys) {
    const int big_k = sys.horizon();
    const int states = sys.num_states();
    const int actions = sys.num_actions();
    const auto& model = sys.model();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(sys.size()));

    for (int k = 0; k < big_k; ++k)
        for (int x = 0; x < states; ++x)
            for (int a = 0; a < actions; ++a)
                v[static_cast<Eigen::Index>(sys.flat(big_k, k, x, a))] = sys.terminal_value(k, x, a);

    for (int n = big_k - 1; n >= 1; --n) {
        // h(a, x') = max_{a'} (v^{n+1,n}_{a',x'} + r(x',a') - g(a,a'))
        std::vector<Vector> h(static_cast<std::size_t>(actions), Vector(states));
        for (int a = 0; a < actions; ++a)
            for (int xp = 0; xp < states; ++xp)
                h[static_cast<std::size_t>(a)][xp] = sys.observation_value(v, n, xp, a);
        for (int k = 0; k < n; ++k)
            for (int a = 0; a < actions; ++a) {
                const Vector obs = model.power(a, n - k).apply(h[static_cast<std::size_t>(a)]);
                const Vector er = model.power(a, n - k).apply(model.reward().col(a));
                for (int x = 0; x < states; ++x) {
                    const double cont = v[static_cast<Eigen::Index>(sys.flat(n + 1, k, x, a))] + er[x];
                    const double insp = obs[x] - model.observation_cost();
                    v[static_cast<Eigen::Index>(sys.flat(n, k, x, a))] = std::max(cont, insp);
                }
            }
    }
    return v;
}

} // namespace ocm
