#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bellman2d/errors.hpp"
#include "bellman2d/manufactured.hpp"
#include "bellman2d/solver.hpp"

using namespace bellman2d;

namespace {

ScalarField2D trace_of(const ExactSolution& s, const Grid2D& g) {
    return sample([&](Point x) { return exact_value(s, x); }, g);
}

double max_error(const ScalarField2D& v, const ExactSolution& s) { return (v - trace_of(s, v.grid())).max_abs(); }

}  // namespace

TEST_CASE("linear solve reproduces kernel elements") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 33);
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    const ScalarField2D bil = trace_of(Bilinear{}, g);
    for (std::uint8_t choice : {1, 2}) {
        const MixedOperator op{p.op1, p.op2, PolicyField(g, choice)};
        const LinearSolveResult r = linear_solve(op, bil, ScalarField2D::zeros(g), {});
        CHECK(r.residual_max <= 1e-9);
        CHECK((r.v - bil).max_abs() < 1e-9);
    }
    const ScalarField2D harmonic = sample([](Point x) { return x.y * x.y * x.y - 3.0 * x.x * x.x * x.y; }, g);
    const LinearSolveResult h = linear_solve(p.op1, harmonic, 1e-10);
    CHECK((h.v - harmonic).max_abs() < 1e-9);
    CHECK(linear_solve(p.op1, ScalarField2D::zeros(g), 1e-10).v.max_abs() == 0.0);
}

TEST_CASE("linear solve reports the sweep cap") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 65);
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    LinearSolveOptions opt;
    opt.max_sweeps = 8;
    const MixedOperator op{p.op1, p.op2, PolicyField(g, 1)};
    CHECK_THROWS_AS(linear_solve(op, trace_of(GluedCubic{}, g), ScalarField2D::zeros(g), opt), NumericalError);
    opt.tol_lin = 0.0;
    CHECK_THROWS_AS(linear_solve(op, trace_of(GluedCubic{}, g), ScalarField2D::zeros(g), opt), ValidationError);
}

TEST_CASE("policy iteration on closed-form solutions") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 33);
    const BellmanProblem p = BellmanProblem::reduced(2.0);

    const SolveOutcome saddle = solve_policy_iteration(p, trace_of(QuadraticSaddle{2.0}, g));
    CHECK(max_error(saddle.v, QuadraticSaddle{2.0}) < 1e-8);
    // L1 v = 0 < L2 v everywhere, and ties keep the first operator.
    CHECK(saddle.policy.count(2) == 0);
    CHECK(saddle.policy_updates == 0);

    const SolveOutcome bil = solve_policy_iteration(p, trace_of(Bilinear{}, g));
    CHECK(max_error(bil.v, Bilinear{}) < 1e-8);
}

TEST_CASE("policy iteration converges at second order on the glued cubic") {
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    const ExactSolution s = GluedCubic{2.0, 1.0, 0.0};
    double prev = 0.0;
    for (int n : {33, 65, 129}) {
        const Grid2D g = Grid2D::make({0, 0}, 1.0, n);
        const SolveOutcome r = solve_policy_iteration(p, trace_of(s, g));
        CHECK(r.residual_max <= 1e-9);
        // The returned residual is the recomputed Bellman residual.
        CHECK(bellman_residual(p, r.v).max_abs() == doctest::Approx(r.residual_max).epsilon(1e-6));
        const double e = max_error(r.v, s);
        if (prev > 0.0) CHECK(std::log2(prev / e) >= 1.9);
        prev = e;
    }
}

TEST_CASE("policy iteration options") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 65);
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    PolicyIterationOptions opt;
    opt.max_policy_updates = 1;
    CHECK_THROWS_AS(solve_policy_iteration(p, trace_of(GluedCubic{}, g), opt), NumericalError);
    opt.max_policy_updates = 50;
    opt.tol = -1.0;
    CHECK_THROWS_AS(solve_policy_iteration(p, trace_of(GluedCubic{}, g), opt), ValidationError);
    opt.tol = 1e-9;
    opt.record_iterates = true;
    const SolveOutcome r = solve_policy_iteration(p, trace_of(GluedCubic{}, g), opt);
    CHECK(r.iterates.size() == static_cast<std::size_t>(r.policy_updates + 1));
    // Deterministic given the inputs.
    const SolveOutcome again = solve_policy_iteration(p, trace_of(GluedCubic{}, g), opt);
    CHECK((again.v - r.v).max_abs() == 0.0);
    CHECK(again.policy == r.policy);
}

TEST_CASE("smoothed solver") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 33);
    const ScalarField2D harmonic = sample([](Point x) { return x.y * x.y * x.y - 3.0 * x.x * x.x * x.y; }, g);
    CHECK((solve_smoothed(SmoothedNonlinearity(1.0, 0.1), harmonic).v - harmonic).max_abs() < 1e-8);

    // Zero data: h(0) = -(m-1) eps / 4 acts as a source, and the barriers
    // 0 and -(m-1) eps / 8 (1 - x1^2) bracket the solution.
    const double m = 3.0, eps = 0.1;
    const ScalarField2D z = solve_smoothed(SmoothedNonlinearity(m, eps), ScalarField2D::zeros(g)).v;
    for (int j = 0; j < g.n(); ++j) {
        for (int i = 0; i < g.n(); ++i) {
            const double x1 = g.node(i, j).x;
            CHECK(z(i, j) <= 1e-9);
            CHECK(z(i, j) >= -(m - 1.0) * eps / 8.0 * (1.0 - x1 * x1) - 1e-9);
        }
    }
    CHECK(z.max_abs() > 0.0);

    const BellmanProblem p = BellmanProblem::reduced(2.0);
    const ScalarField2D t = trace_of(GluedCubic{}, g);
    const ScalarField2D pol = solve_policy_iteration(p, t).v;
    for (double e : {1e-1, 1e-2, 1e-3}) {
        const SmoothedSolveResult s = solve_smoothed(SmoothedNonlinearity(2.0, e), t);
        CHECK(s.residual_max <= 1e-9);
        CHECK((s.v - pol).max_abs() <= (2.0 - 1.0) * e + 10 * 1e-9);
    }
}

TEST_CASE("phase field") {
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 33);
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    CHECK((second_derivative_field(trace_of(QuadraticSaddle{}, g)).scaled(0.5)).max_abs() ==
          doctest::Approx(1.0));
    CHECK(second_derivative_field(trace_of(Bilinear{}, g)).max_abs() < 1e-10);

    // u = 2 x2^+ - x2^- exactly except on the row through the glue line,
    // where the straddling stencil gives b (m - 1) h / 6.
    const ScalarField2D u = phase_field(p, trace_of(GluedCubic{2.0, 1.0, 0.0}, g));
    const double h = g.h();
    for (int j = 1; j < g.n() - 1; ++j) {
        const double y = g.node(0, j).y;
        const double expected = j == g.mid() ? h / 6.0 : (y > 0 ? 2.0 * y : y);
        CHECK(std::abs(u(7, j) - expected) < 1e-10);
    }

    // Rotated frames use (L2 v - L1 v) / (m - 1), the second derivative along eta.
    const double theta = 15.0 * std::numbers::pi / 180.0;
    const BellmanProblem pr = BellmanProblem::reduced(3.0, theta);
    const Point eta = pr.anisotropy_axis();
    const ScalarField2D ur =
        phase_field(pr, sample([&](Point x) { return std::pow(dot(x, eta), 2) + dot(x, perp(eta)); }, g));
    CHECK(ur(10, 20) == doctest::Approx(2.0).epsilon(1e-9));
}
