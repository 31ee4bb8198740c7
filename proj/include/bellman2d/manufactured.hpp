#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bellman2d/grid.hpp"
#include "bellman2d/operators.hpp"

namespace bellman2d {

/**
 * Piecewise cubic glued across the line y2 = 0 of the frame rotated by `rotation`:
 *
 *   v = (b m / 6) (y2^3 - 3 y1^2 y2)       for y2 >= 0   (harmonic, L1 v = 0)
 *   v = b (y2^3 / 6 - (m / 2) y1^2 y2)     for y2 <  0   (L2 v = 0)
 *
 * with y = R^T x. It is C^2, its v_{eta eta eta} jumps by the factor m, and
 * u = v_{eta eta} = b m y2^+ - b y2^-.
 */
struct GluedCubic {
    double m = 2.0;
    double b = 1.0;
    double rotation = 0.0;
};

/// v = x2^2 - x1^2.
struct QuadraticSaddle {
    double m = 2.0;
};

/// v = x1 x2.
struct Bilinear {};

struct PolynomialTerm {
    double coef = 0.0;
    int px = 0;
    int py = 0;
};

/// Sum of coef * x1^px * x2^py. Not a solution in general; used as boundary data.
struct CustomPolynomial {
    std::vector<PolynomialTerm> terms;
};

using ExactSolution = std::variant<GluedCubic, QuadraticSaddle, Bilinear, CustomPolynomial>;

struct Derivatives {
    double value = 0.0;
    Point grad;
    SymMatrix2 hess{0.0, 0.0, 0.0};
    // v111, v112, v122, v222
    std::array<double, 4> third{};
    // On the glue line: the third derivatives from the y2 < 0 side.
    std::optional<std::array<double, 4>> third_other;
};

enum class DerivativeOrder { Value, Grad, Hess, Third };

// Returns every derivative up to `order`; higher entries are left zero.
Derivatives exact_eval(const ExactSolution& sol, Point x, DerivativeOrder order = DerivativeOrder::Third);
double exact_value(const ExactSolution& sol, Point x);

// Evaluates one polynomial phase of a glued cubic (+1 upper, -1 lower) anywhere in the plane.
Derivatives glued_phase_eval(const GluedCubic& sol, Point x, int phase);

struct OracleReport {
    double residual_max = 0.0;
    double value_defect = 0.0;
    double grad_defect = 0.0;
    double hess_defect = 0.0;
    int samples = 0;
};

/**
 * Substitutes the closed-form Hessians into Min{L1, L2} on a deterministic
 * lattice of at least `sample_count` points in [-1, 1]^2 and measures the
 * C^2 matching defects along the glue line. Throws NumericalError when any
 * quantity exceeds `reject_above`.
 */
OracleReport oracle_check(const ExactSolution& sol, const BellmanProblem& problem, int sample_count = 10000,
                          double reject_above = 1e-12);

// The operator pair a catalog entry solves (reduced form, matching m and rotation).
BellmanProblem matching_problem(const ExactSolution& sol, double m_fallback = 2.0);

struct CatalogEntry {
    std::string name;
    ExactSolution solution;
    BellmanProblem problem;
};

std::vector<CatalogEntry> manufactured_catalog();

std::string describe(const ExactSolution& sol);

}  // namespace bellman2d
