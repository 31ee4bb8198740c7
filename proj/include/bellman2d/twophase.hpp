#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "bellman2d/grid.hpp"
#include "bellman2d/operators.hpp"

namespace bellman2d {

/**
 * Free-boundary flux law u_nu^+ = G(u_nu^-, nu).
 *
 * The Bellman reduction gives G(b, nu) = (1 + (m - 1)(nu . eta)^2) b, where eta
 * is the anisotropy axis (e2 when unrotated). For a general operator pair the
 * flux balance across the interface gives G(b, nu) = A2(nu, nu) / A1(nu, nu) b.
 */
class FluxLaw {
public:
    using Evaluator = std::function<double(double, Point)>;

    enum class Kind { BellmanReduced, OperatorPair, Custom };

    static FluxLaw bellman_reduced(double m, double axis_rotation = 0.0);
    static FluxLaw operator_pair(SymMatrix2 A1, SymMatrix2 A2);
    static FluxLaw for_problem(const BellmanProblem& problem);
    // `omega` is the coercivity floor G(b, nu) >= omega(b). Derivatives are
    // taken by central differences.
    static FluxLaw custom(Evaluator G, std::function<double(double)> omega);

    Kind kind() const { return kind_; }
    double operator()(double b, Point nu) const;
    double omega(double b) const;
    // dG/db.
    double d_db(double b, Point nu) const;
    // Derivative of G as nu turns towards perp(nu).
    double d_dnu(double b, Point nu) const;
    // The b >= 0 with G(b, nu) = a; nullopt when a <= G(0, nu).
    std::optional<double> inverse(double a, Point nu) const;

    struct Certificate {
        bool monotone = true;
        bool coercive = true;
        double min_increment = 0.0;  // smallest G(b_{k+1}) - G(b_k) over the lattice
        double min_floor_margin = 0.0;  // smallest G(b, nu) - omega(b)
    };
    // Samples 1024 values of b in [0, b_max] times 64 directions.
    Certificate certify(double b_max = 100.0) const;

private:
    FluxLaw() = default;

    Kind kind_ = Kind::BellmanReduced;
    double m_ = 1.0;
    Point axis_{0.0, 1.0};
    SymMatrix2 A1_{}, A2_{};
    double pair_floor_ = 1.0;
    Evaluator custom_;
    std::function<double(double)> omega_;
};

// Validates |nu| = 1 and b >= 0.
double flux_eval(const FluxLaw& law, double b, Point nu);

/// a ((x - x0) . nu)^+ - b ((x - x0) . nu)^-
struct TwoPlaneSolution {
    Point x0;
    Point nu{0.0, 1.0};
    double a = 1.0;
    double b = 1.0;

    double operator()(Point x) const {
        const double s = dot(x - x0, nu);
        return s > 0.0 ? a * s : b * s;
    }
};

// Builds the two-plane with a = G(b, nu); requires b > 0 and a unit nu.
TwoPlaneSolution make_two_plane(const FluxLaw& law, Point x0, Point nu, double b);
double two_plane_eval(const TwoPlaneSolution& p, Point x);

/**
 * Two-plane solution touching u at node (i, j) to first order. Undefined
 * (nullopt) when the discrete gradient vanishes or when u(y) > 0 with
 * |grad u| <= G(0, nu). Throws ValidationError for nodes without defined
 * neighbours and for u(y) = 0.
 */
std::optional<TwoPlaneSolution> tangent_two_plane(const ScalarField2D& u, int i, int j, const FluxLaw& law);

/// phi = s + C s^2 with s = x2 - x1^2.
struct PhiParabolic {
    double C = 0.0;
};

/// Psi = a_plus phi^+ - gamma phi^- built on PhiParabolic{C}; a_plus = omega(gamma) by default.
struct PsiTwoPhase {
    double C = 0.0;
    double gamma = 1.0;
    double a_plus = 1.0;
};

/// l_s(x) = (1 + s) x2 - 2 s.
struct LineFamily {
    double s = 1.0;
};

/// Sampled solution of the one-dimensional profile equation, see g_profile_solve.
struct GProfile {
    double m = 1.0;
    double nu2sq = 0.0;
    double delta = 0.0;
    double eps = 1e-3;
    double t_min = -1.0;
    double step = 1e-4;
    std::vector<double> g;

    double operator()(double t) const;
    double t_max() const { return t_min + step * static_cast<double>(g.size() - 1); }
};

/// g(d(x)): d = x . nu for delta = 0, else the signed distance to the circle of
/// radius delta^-3 through the origin with inner normal nu.
struct GProfileComparison {
    GProfile profile;
    Point nu{0.0, 1.0};
};

using ComparisonFunction = std::variant<PhiParabolic, PsiTwoPhase, LineFamily, GProfileComparison>;

double comparison_eval(const ComparisonFunction& c, Point x);

// Sufficient C making phi a subsolution of every L with lambda I <= A <= Lambda I
// on |x2 - x1^2| <= 1 / (4C): from L phi >= -3 Lambda + 2 C lambda.
double parabolic_constant(double lambda, double Lambda);

/**
 * Marches the profile equation
 *
 *   [nu1^2 + (nu2^2 + delta) h_eps'(g)] g' = 1 + delta t,   g(0) = 0,
 *
 * from t = 0 in both directions with classical RK4, step <= 1e-4 of the range.
 */
GProfile g_profile_solve(double m, double nu2sq, double delta, double eps, std::pair<double, double> t_range);

// (g(t+k) - g(t)) / k on the stored lattice.
double g_profile_slope(const GProfile& g, double t);

/// Rectangle of node indices [i0, i1] x [j0, j1] on a grid.
struct Window {
    Grid2D grid;
    int i0, i1, j0, j1;

    static Window centered(const Grid2D& grid, Point center, double half_side);
    bool on_edge(int i, int j) const { return i == i0 || i == i1 || j == j0 || j == j1; }
};

struct SubsolutionReport {
    double operator_margin = 0.0;  // min over checked nodes of the operator values
    std::optional<double> slope_margin;  // min G(b, nu) - a over zero crossings
    int nodes_checked = 0;
    int crossings_checked = 0;
    bool passed = false;
};

/**
 * Checks L_i c >= 0 discretely on the window (L1 where c > 0 and L2 where
 * c < 0 for two-phase functions) and, for Psi, the slope inequality
 * a <= G(b, nu) at the zero crossings. GProfile comparisons are checked
 * against the smoothed equation u11 + h'(u) u22 + h''(u) u2^2 >= 0.
 */
SubsolutionReport subsolution_check(const ComparisonFunction& c, const BellmanProblem& problem, const FluxLaw& law,
                                    const Window& window, double tol = 1e-9);

struct MaximumPrincipleReport {
    bool holds = true;
    bool boundary_dominated = false;
    std::optional<std::pair<int, int>> first_violation;
    double max_violation = 0.0;  // max over the window of u - p - tol (<= 0 when holding)
};

// True iff (u <= p on the window's edge nodes) implies u <= p + tol on every window node.
MaximumPrincipleReport maximum_principle_check(const ScalarField2D& u, const TwoPlaneSolution& p,
                                               const Window& region, double tol);

// Default comparison tolerance 5 (residual_max + h^2).
double comparison_tolerance(double residual_max, double h);

}  // namespace bellman2d
