#pragma once

#include <optional>

#include "bellman2d/grid.hpp"

namespace bellman2d {

struct SymMatrix2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;

    double quad(Point v) const { return a11 * v.x * v.x + 2.0 * a12 * v.x * v.y + a22 * v.y * v.y; }
    double min_eigenvalue() const;
    double max_eigenvalue() const;
    // R * this * R^T with R the counter-clockwise rotation by `angle`.
    SymMatrix2 rotated(double angle) const;
    bool operator==(const SymMatrix2&) const = default;
};

/// Nine-point stencil weights, already divided by h^2.
struct Stencil9 {
    double center = 0.0;
    double e = 0.0, w = 0.0, n = 0.0, s = 0.0;
    double ne = 0.0, sw = 0.0, nw = 0.0, se = 0.0;

    double apply(const ScalarField2D& f, int i, int j) const {
        return center * f(i, j) + e * f(i + 1, j) + w * f(i - 1, j) + n * f(i, j + 1) + s * f(i, j - 1) +
               ne * f(i + 1, j + 1) + sw * f(i - 1, j - 1) + nw * f(i - 1, j + 1) + se * f(i + 1, j - 1);
    }
    double neighbour_sum(const double* v, std::ptrdiff_t stride) const {
        return e * v[1] + w * v[-1] + n * v[stride] + s * v[-stride] + ne * v[stride + 1] + sw * v[-stride - 1] +
               nw * v[stride - 1] + se * v[-stride + 1];
    }
};

/**
 * L v = tr(A D^2 v) with constant symmetric A, lambda I <= A <= Lambda I.
 */
class EllipticOperator {
public:
    // Checks the ellipticity bounds against the eigenvalues of A.
    EllipticOperator(SymMatrix2 A, double lambda, double Lambda);
    // Bounds taken from the eigenvalues of A; A must be positive definite.
    static EllipticOperator from_matrix(SymMatrix2 A);

    const SymMatrix2& A() const { return A_; }
    double lambda() const { return lambda_; }
    double Lambda() const { return Lambda_; }

    // a11 >= |a12| and a22 >= |a12|: the sign-adapted nine-point stencil has
    // nonnegative neighbour weights.
    bool monotone_admissible() const;

    // Throws StencilMonotonicityError when not admissible.
    Stencil9 stencil(double h) const;

private:
    SymMatrix2 A_;
    double lambda_;
    double Lambda_;
};

/**
 * Pair of operators for Min{L1 v, L2 v} = 0.
 *
 * In reduced form L1 = Laplacian and L2 = v11 + m v22 expressed in a frame
 * rotated by `rotation` radians, so op2.A = R diag(1, m) R^T.
 */
struct BellmanProblem {
    EllipticOperator op1;
    EllipticOperator op2;
    std::optional<double> m;
    double rotation = 0.0;

    static BellmanProblem reduced(double m, double rotation = 0.0);
    // Both operators share (lambda, Lambda) spanning the eigenvalues of A1 and A2.
    static BellmanProblem general(SymMatrix2 A1, SymMatrix2 A2);

    // Unit vector eta with L2 - L1 = (m - 1) d^2/d eta^2 in reduced form.
    Point anisotropy_axis() const { return {-std::sin(rotation), std::cos(rotation)}; }
    double lambda() const { return op1.lambda(); }
    double Lambda() const { return op1.Lambda(); }
};

/**
 * Concave C^{1,1} smoothing h_eps of h_0(s) = s^+ - m s^-.
 *
 * h_eps(s) = s for s >= eps, m s for s <= -eps; on [-eps, eps] the slope
 * interpolates linearly from m down to 1.
 */
class SmoothedNonlinearity {
public:
    SmoothedNonlinearity(double m, double eps);

    double m() const { return m_; }
    double eps() const { return eps_; }
    double value(double s) const;
    double slope(double s) const;
    // Second derivative; constant (1 - m) / (2 eps) inside the band, 0 outside.
    double curvature(double s) const;
    // Solves s + h(s) = r for s (the map is strictly increasing).
    double solve_identity_plus(double r) const;

private:
    double m_;
    double eps_;
};

double h_eval(const SmoothedNonlinearity& nl, double s, int order);

ScalarField2D apply_operator(const EllipticOperator& op, const ScalarField2D& f);
ScalarField2D bellman_residual(const BellmanProblem& problem, const ScalarField2D& v);
// D11 v + h_eps(D22 v) on interior nodes.
ScalarField2D smoothed_residual(const SmoothedNonlinearity& nl, const ScalarField2D& v);

}  // namespace bellman2d
