#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bellman2d/freeboundary.hpp"
#include "bellman2d/grid.hpp"
#include "bellman2d/operators.hpp"
#include "bellman2d/twophase.hpp"

namespace bellman2d {

// Max centered-difference gradient magnitude of u over nodes in the ball of
// the given radius around the grid center. Requires radius <= half_width / 2.
double lipschitz_seminorm(const ScalarField2D& u, double radius);

/**
 * Max over node pairs (x, y) in the centered ball with |x - y| >= 4h of
 * max(|dD11|, |dD12|, |dD22|) / |x - y|, where D is the discrete Hessian.
 * Every pair is visited for n <= 129; above that every stride-th node is
 * paired with all nodes.
 */
double c21_seminorm(const ScalarField2D& v, double radius);

struct SeminormReport {
    double lipschitz_u = 0.0;
    double c21_v = 0.0;
    double grid_h = 0.0;
};

/// r, r/2, r/4, ... down to the last value >= floor_factor * h.
std::vector<double> dyadic_radii(double r_max, double h, double floor_factor = 8.0);

struct BlowupFit {
    double r = 0.0;
    Point nu;
    // Kink position along nu relative to x0, within one grid step.
    double offset = 0.0;
    double a = 0.0;
    double b = 0.0;
    // ||w - model|| / ||w|| over the grid nodes of the ball, rescaled to the unit disk (0 when w == 0).
    double residual = 0.0;
    // max of the negative part of w.
    double negative_max = 0.0;
};

enum class BlowupVerdict { TwoPlane, OnePhase, Unresolved };

std::string to_string(BlowupVerdict v);

struct BlowupOptions {
    double fit_tol = 0.05;
    double flux_tol = 0.1;
    double b_floor = 0.02;
    int angles = 720;
};

struct BlowupClassification {
    Point x0;
    std::vector<double> radii;  // decreasing
    std::vector<BlowupFit> fits;
    BlowupVerdict verdict = BlowupVerdict::Unresolved;
    // The fit at the smallest radius as a two-plane (kink through x0 + offset nu).
    TwoPlaneSolution plane;
    // |a - G(b, nu)| / max(a, G(b, nu)) at the smallest radius.
    double flux_mismatch = 0.0;
};

/**
 * Fits w(xi) = u(x0 + r xi) / r on the unit disk to a (xi.nu)^+ - b (xi.nu)^-
 * for each radius: a, b in closed form per direction, 720 directions, then a
 * golden-section refinement of the direction and of the kink position along nu
 * (within h of x0). The verdict is taken at the smallest radius.
 * Throws ValidationError when u does not change sign within h of x0, or a
 * radius is below 8h or leaves the grid.
 */
BlowupClassification blowup_classify(const ScalarField2D& u, Point x0, const FluxLaw& law, std::vector<double> radii,
                                     const BlowupOptions& options = {});

// Residual non-increasing as r shrinks toward the floor, up to `slack`.
bool residual_decreasing_in_r(const BlowupClassification& c, double slack = 1e-12);

struct ExpansionFit {
    Point x0;
    Point nu;
    // Coefficients of 1, dx, dy, dx^2, dx dy, dy^2, dx^3, dx^2 dy, dx dy^2, dy^3 with d = x - x0.
    std::array<double, 10> Q{};
    double gamma = 0.0;
    std::vector<double> radii;
    std::vector<double> remainder_norms;
    double alpha_est = 0.0;
    double L1Q = 0.0;
    double L2Q = 0.0;
    int fit_nodes = 0;
};

/**
 * Least-squares fit of v on the smallest ball to a full cubic plus
 * gamma ((x - x0).nu)^+^3. nu starts from the supplied normal and is refined
 * within +-3 degrees. Remainders max|v - fit| are taken on every ball with the
 * same fit; alpha_est is their log-log slope minus 3, clipped to [0, 1].
 */
ExpansionFit fit_cubic_expansion(const ScalarField2D& v, Point x0, Point nu, std::vector<double> radii,
                                 const BellmanProblem& problem);

double expansion_eval(const ExpansionFit& fit, Point x);

struct DecayResult {
    std::vector<double> radii;
    std::vector<double> sup_diff;
    std::vector<double> ratio;
    double alpha_probe = 0.5;
    // max |u| on the largest ball; ratios are compared against C0 * scale.
    double scale = 0.0;
    double C0 = 1.0;
    bool bounded = false;
    // Log-log slope of ratio against r (negative: ratios grow as r shrinks).
    double trend_exponent = 0.0;
};

// sup_{B_r(x0)} |u - p| and its ratio to r^(1 + alpha_probe); p = 0 when absent.
DecayResult dyadic_decay_check(const ScalarField2D& u, Point x0, const std::optional<TwoPlaneSolution>& p,
                               std::vector<double> radii, double alpha_probe, double C0 = 1.0);

struct ThirdDerivativeJump {
    int count = 0;
    double median_plus = 0.0;
    double median_minus = 0.0;
    double median_ratio = 0.0;
};

// One-sided derivatives of u along the axis (turned towards the positive side) at free-boundary vertices.
ThirdDerivativeJump third_derivative_jump(const ScalarField2D& u, const FreeBoundary& fb, Point axis,
                                          std::optional<double> within = std::nullopt);

/**
 * Residual G(b, nu) v+_nu - b G1(b, nu) v-_nu - v_tau G_nu(b, nu) along the grid
 * line `line` (a row for nu = +-e2, a column for nu = +-e1). Normal
 * derivatives use second-order one-sided differences on each side, the
 * tangential one the average of both fields' centered differences.
 */
std::vector<double> transmission_residual(const ScalarField2D& v_plus, const ScalarField2D& v_minus, Point nu,
                                          int line, double b, const FluxLaw& law);

}  // namespace bellman2d
