#pragma once

#include <cstdint>
#include <vector>

#include "bellman2d/grid.hpp"
#include "bellman2d/operators.hpp"

namespace bellman2d {

/// Which operator attains the minimum at each interior node (1 or 2); 0 on the boundary ring.
class PolicyField {
public:
    explicit PolicyField(const Grid2D& grid, std::uint8_t initial = 1);

    const Grid2D& grid() const { return grid_; }
    std::uint8_t operator()(int i, int j) const { return choice_[grid_.index(i, j)]; }
    void set(int i, int j, std::uint8_t c) { choice_[grid_.index(i, j)] = c; }
    std::size_t count(std::uint8_t c) const;
    bool operator==(const PolicyField&) const = default;

private:
    Grid2D grid_;
    std::vector<std::uint8_t> choice_;
};

/// Node-wise selection between two operators' stencils.
struct MixedOperator {
    EllipticOperator op1;
    EllipticOperator op2;
    PolicyField policy;
};

struct LinearSolveResult {
    ScalarField2D v;
    int sweeps = 0;
    double residual_max = 0.0;
};

struct LinearSolveOptions {
    double tol_lin = 1e-9;
    int max_sweeps = 200000;
    // Over-relaxation factor; <= 0 selects the optimum for the model Laplacian.
    double omega = 0.0;
};

/**
 * Dirichlet solve of L_{policy(x)} v(x) = 0 by lexicographic successive
 * over-relaxation. Only the boundary ring of `trace` is read; `initial`
 * (same grid) seeds the interior. Throws NumericalError when the sweep cap is
 * reached before max |L v| <= tol_lin.
 */
LinearSolveResult linear_solve(const MixedOperator& op, const ScalarField2D& trace, const ScalarField2D& initial,
                               const LinearSolveOptions& options);
LinearSolveResult linear_solve(const EllipticOperator& op, const ScalarField2D& trace, double tol_lin);

// Interior filled by the bilinearly blended (Coons) interpolant of the boundary ring.
ScalarField2D boundary_blend(const ScalarField2D& trace);

struct PolicyIterationOptions {
    double tol = 1e-9;
    int max_policy_updates = 50;
    // Linear-solve tolerance; <= 0 means use `tol`.
    double tol_lin = 0.0;
    int max_sweeps = 200000;
    bool record_iterates = false;
};

struct SolveOutcome {
    ScalarField2D v;
    PolicyField policy;
    double residual_max = 0.0;
    int policy_updates = 0;
    int linear_iterations = 0;
    // Value after each linear solve, when requested.
    std::vector<ScalarField2D> iterates;
};

/**
 * Howard's policy iteration for Min{L1 v, L2 v} = 0 with Dirichlet data.
 *
 * Starts from policy 1 everywhere; each round solves the mixed linear problem
 * then switches a node to the other operator only where it is strictly smaller.
 * Stops on a stable policy or residual <= tol.
 */
SolveOutcome solve_policy_iteration(const BellmanProblem& problem, const ScalarField2D& trace,
                                    const PolicyIterationOptions& options = {});

struct SmoothedSolveOptions {
    double tol = 1e-9;
    int max_sweeps = 400000;
    double omega = 0.0;
};

struct SmoothedSolveResult {
    ScalarField2D v;
    int sweeps = 0;
    double residual_max = 0.0;
};

/**
 * Solves D11 v + h_eps(D22 v) = 0 by nonlinear point over-relaxation; each
 * node update solves its scalar equation exactly.
 */
SmoothedSolveResult solve_smoothed(const SmoothedNonlinearity& nl, const ScalarField2D& trace,
                                   const SmoothedSolveOptions& options = {});

// u = D22 v.
ScalarField2D second_derivative_field(const ScalarField2D& v);

// u = (L2 v - L1 v) / (m - 1): the second derivative of v along the
// anisotropy axis for reduced problems (D22 v when unrotated). For general
// pairs the difference L2 v - L1 v itself.
ScalarField2D phase_field(const BellmanProblem& problem, const ScalarField2D& v);

}  // namespace bellman2d
