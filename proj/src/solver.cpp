#include "bellman2d/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bellman2d/errors.hpp"

namespace bellman2d {

PolicyField::PolicyField(const Grid2D& grid, std::uint8_t initial) : grid_(grid), choice_(grid.size(), 0) {
    for (int j = 1; j < grid.n() - 1; ++j) {
        for (int i = 1; i < grid.n() - 1; ++i) {
            choice_[grid.index(i, j)] = initial;
        }
    }
}

std::size_t PolicyField::count(std::uint8_t c) const {
    return static_cast<std::size_t>(std::count(choice_.begin(), choice_.end(), c));
}

namespace {

double optimal_omega(int n) {
    return 2.0 / (1.0 + std::sin(std::numbers::pi / (n - 1)));
}

double residual_max_of(const std::vector<double>& v, const Grid2D& g, const Stencil9 (&stencils)[2],
                       const PolicyField& policy) {
    const std::ptrdiff_t stride = g.n();
    double best = 0.0;
    for (int j = 1; j < g.n() - 1; ++j) {
        for (int i = 1; i < g.n() - 1; ++i) {
            const std::size_t k = g.index(i, j);
            const Stencil9& st = stencils[policy(i, j) - 1];
            const double r = st.center * v[k] + st.neighbour_sum(&v[k], stride);
            best = std::max(best, std::abs(r));
        }
    }
    return best;
}

}  // namespace

LinearSolveResult linear_solve(const MixedOperator& op, const ScalarField2D& trace, const ScalarField2D& initial,
                               const LinearSolveOptions& options) {
    const Grid2D& g = trace.grid();
    if (!(initial.grid() == g) || !(op.policy.grid() == g)) {
        throw ValidationError("linear_solve inputs must share one grid");
    }
    if (!(options.tol_lin > 0.0)) {
        throw ValidationError("linear_solve needs tol_lin > 0");
    }
    const Stencil9 stencils[2] = {op.op1.stencil(g.h()), op.op2.stencil(g.h())};

    std::vector<double> v(initial.values().begin(), initial.values().end());
    const int n = g.n();
    for (int k = 0; k < n; ++k) {
        for (const auto& [i, j] : {std::pair{k, 0}, std::pair{k, n - 1}, std::pair{0, k}, std::pair{n - 1, k}}) {
            v[g.index(i, j)] = trace(i, j);
        }
    }
    const double omega = options.omega > 0.0 ? options.omega : optimal_omega(n);
    const std::ptrdiff_t stride = n;
    constexpr int kCheckEvery = 8;

    double res = residual_max_of(v, g, stencils, op.policy);
    int sweeps = 0;
    while (res > options.tol_lin) {
        if (sweeps >= options.max_sweeps) {
            throw NumericalError("linear_solve reached " + std::to_string(sweeps) +
                                 " sweeps with residual " + std::to_string(res) + " above tol_lin");
        }
        for (int it = 0; it < kCheckEvery; ++it) {
            for (int j = 1; j < n - 1; ++j) {
                for (int i = 1; i < n - 1; ++i) {
                    const std::size_t k = g.index(i, j);
                    const Stencil9& st = stencils[op.policy(i, j) - 1];
                    const double target = -st.neighbour_sum(&v[k], stride) / st.center;
                    v[k] += omega * (target - v[k]);
                }
            }
        }
        sweeps += kCheckEvery;
        res = residual_max_of(v, g, stencils, op.policy);
        if (!std::isfinite(res)) {
            throw NumericalError("linear_solve diverged");
        }
    }
    return {ScalarField2D(g, std::move(v)), sweeps, res};
}

LinearSolveResult linear_solve(const EllipticOperator& op, const ScalarField2D& trace, double tol_lin) {
    const MixedOperator mixed{op, op, PolicyField(trace.grid(), 1)};
    LinearSolveOptions options;
    options.tol_lin = tol_lin;
    return linear_solve(mixed, trace, boundary_blend(trace), options);
}

ScalarField2D boundary_blend(const ScalarField2D& trace) {
    const Grid2D& g = trace.grid();
    const int n = g.n();
    const int last = n - 1;
    std::vector<double> out(g.size());
    for (int j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / last;
        for (int i = 0; i < n; ++i) {
            const double s = static_cast<double>(i) / last;
            const double edges = (1 - s) * trace(0, j) + s * trace(last, j) + (1 - t) * trace(i, 0) +
                                 t * trace(i, last);
            const double corners = (1 - s) * (1 - t) * trace(0, 0) + s * (1 - t) * trace(last, 0) +
                                   (1 - s) * t * trace(0, last) + s * t * trace(last, last);
            out[g.index(i, j)] = edges - corners;
        }
    }
    return ScalarField2D(g, std::move(out));
}

SolveOutcome solve_policy_iteration(const BellmanProblem& problem, const ScalarField2D& trace,
                                    const PolicyIterationOptions& options) {
    if (!(options.tol > 0.0)) throw ValidationError("policy iteration needs tol > 0");
    if (options.max_policy_updates < 1) throw ValidationError("max_policy_updates must be positive");
    if (trace.margin() != 0) throw ValidationError("boundary trace must be defined on the boundary ring");

    const Grid2D& g = trace.grid();
    const int n = g.n();
    MixedOperator mixed{problem.op1, problem.op2, PolicyField(g, 1)};
    const Stencil9 stencils[2] = {problem.op1.stencil(g.h()), problem.op2.stencil(g.h())};

    LinearSolveOptions lin;
    lin.tol_lin = options.tol_lin > 0.0 ? std::min(options.tol_lin, options.tol) : options.tol;
    lin.max_sweeps = options.max_sweeps;

    SolveOutcome out{ScalarField2D::zeros(g), PolicyField(g, 1), 0.0, 0, 0, {}};
    ScalarField2D guess = boundary_blend(trace);
    for (int round = 0;; ++round) {
        LinearSolveResult solved = linear_solve(mixed, trace, guess, lin);
        out.linear_iterations += solved.sweeps;
        guess = solved.v;
        if (options.record_iterates) out.iterates.push_back(solved.v);

        const std::span<const double> v = solved.v.values();
        const std::ptrdiff_t stride = n;
        double residual = 0.0;
        bool changed = false;
        PolicyField next = mixed.policy;
        for (int j = 1; j < n - 1; ++j) {
            for (int i = 1; i < n - 1; ++i) {
                const std::size_t k = g.index(i, j);
                const double l1 = stencils[0].center * v[k] + stencils[0].neighbour_sum(&v[k], stride);
                const double l2 = stencils[1].center * v[k] + stencils[1].neighbour_sum(&v[k], stride);
                residual = std::max(residual, std::abs(std::min(l1, l2)));
                const std::uint8_t current = mixed.policy(i, j);
                // Ties keep the current choice.
                const std::uint8_t best = current == 1 ? (l2 < l1 ? 2 : 1) : (l1 < l2 ? 1 : 2);
                if (best != current) {
                    next.set(i, j, best);
                    changed = true;
                }
            }
        }
        out.residual_max = residual;
        if (residual <= options.tol || !changed) {
            out.v = std::move(solved.v);
            out.policy = mixed.policy;
            if (residual > options.tol) {
                throw NumericalError("policy iteration stalled with a stable policy at residual " +
                                     std::to_string(residual));
            }
            return out;
        }
        if (out.policy_updates >= options.max_policy_updates) {
            throw NumericalError("policy iteration exceeded " + std::to_string(options.max_policy_updates) +
                                 " policy updates (residual " + std::to_string(residual) + ")");
        }
        mixed.policy = std::move(next);
        ++out.policy_updates;
    }
}

SmoothedSolveResult solve_smoothed(const SmoothedNonlinearity& nl, const ScalarField2D& trace,
                                   const SmoothedSolveOptions& options) {
    if (!(options.tol > 0.0)) throw ValidationError("smoothed solve needs tol > 0");
    const Grid2D& g = trace.grid();
    const int n = g.n();
    const double inv_h2 = 1.0 / (g.h() * g.h());
    const double c = 2.0 * inv_h2;
    const double omega = options.omega > 0.0 ? options.omega : optimal_omega(n);
    const ScalarField2D start = boundary_blend(trace);
    std::vector<double> v(start.values().begin(), start.values().end());

    auto residual = [&]() {
        double best = 0.0;
        for (int j = 1; j < n - 1; ++j) {
            for (int i = 1; i < n - 1; ++i) {
                const std::size_t k = g.index(i, j);
                const double d11 = (v[k + 1] + v[k - 1] - 2.0 * v[k]) * inv_h2;
                const double d22 = (v[k + n] + v[k - n] - 2.0 * v[k]) * inv_h2;
                best = std::max(best, std::abs(d11 + nl.value(d22)));
            }
        }
        return best;
    };

    constexpr int kCheckEvery = 8;
    double res = residual();
    int sweeps = 0;
    while (res > options.tol) {
        if (sweeps >= options.max_sweeps) {
            throw NumericalError("smoothed solve reached " + std::to_string(sweeps) + " sweeps with residual " +
                                 std::to_string(res));
        }
        for (int it = 0; it < kCheckEvery; ++it) {
            for (int j = 1; j < n - 1; ++j) {
                for (int i = 1; i < n - 1; ++i) {
                    const std::size_t k = g.index(i, j);
                    const double horizontal = (v[k + 1] + v[k - 1]) * inv_h2;
                    const double vertical = (v[k + n] + v[k - n]) * inv_h2;
                    // With s = vertical - c v the node equation reads s + h(s) = vertical - horizontal.
                    const double s = nl.solve_identity_plus(vertical - horizontal);
                    const double target = (vertical - s) / c;
                    v[k] += omega * (target - v[k]);
                }
            }
        }
        sweeps += kCheckEvery;
        res = residual();
        if (!std::isfinite(res)) throw NumericalError("smoothed solve diverged");
    }
    return {ScalarField2D(g, std::move(v)), sweeps, res};
}

ScalarField2D second_derivative_field(const ScalarField2D& v) { return second_difference(v, Direction::E2); }

ScalarField2D phase_field(const BellmanProblem& problem, const ScalarField2D& v) {
    const ScalarField2D diff = apply_operator(problem.op2, v) - apply_operator(problem.op1, v);
    if (problem.m && *problem.m > 1.0) {
        if (problem.rotation == 0.0) return second_derivative_field(v);
        return diff.scaled(1.0 / (*problem.m - 1.0));
    }
    return diff;
}

}  // namespace bellman2d
