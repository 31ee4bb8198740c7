#include "bellman2d/manufactured.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bellman2d/errors.hpp"

namespace bellman2d {

namespace {

using Third = std::array<double, 4>;

// Full symmetric third-derivative tensor entry T[i][j][k] from the packed form.
double third_entry(const Third& t, int i, int j, int k) {
    return t[static_cast<std::size_t>(i + j + k)];
}

Third rotate_third(const Third& t, double c, double s) {
    const double R[2][2] = {{c, -s}, {s, c}};
    Third out{};
    // Packed index = number of "2" indices.
    const int idx[4][3] = {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    for (int p = 0; p < 4; ++p) {
        double acc = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int d = 0; d < 2; ++d)
                    acc += R[idx[p][0]][a] * R[idx[p][1]][b] * R[idx[p][2]][d] * third_entry(t, a, b, d);
        out[static_cast<std::size_t>(p)] = acc;
    }
    return out;
}

// Derivatives of k3 y2^3 + k12 y1^2 y2 in local coordinates, mapped back to x.
Derivatives cubic_phase(double k3, double k12, double rotation, Point x) {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    const double y1 = c * x.x + s * x.y;
    const double y2 = -s * x.x + c * x.y;

    Derivatives d;
    d.value = k3 * y2 * y2 * y2 + k12 * y1 * y1 * y2;
    const double g1 = 2.0 * k12 * y1 * y2;
    const double g2 = 3.0 * k3 * y2 * y2 + k12 * y1 * y1;
    d.grad = {c * g1 - s * g2, s * g1 + c * g2};
    const SymMatrix2 local{2.0 * k12 * y2, 2.0 * k12 * y1, 6.0 * k3 * y2};
    d.hess = local.rotated(rotation);
    d.third = rotate_third(Third{0.0, 2.0 * k12, 0.0, 6.0 * k3}, c, s);
    return d;
}

double falling(int p, int k) {
    double out = 1.0;
    for (int r = 0; r < k; ++r) out *= (p - r);
    return out;
}

double power(double base, int e) {
    return e < 0 ? 0.0 : std::pow(base, e);
}

// d^{a+b}/dx1^a dx2^b of the polynomial.
double poly_derivative(const CustomPolynomial& p, Point x, int a, int b) {
    double acc = 0.0;
    for (const PolynomialTerm& t : p.terms) {
        if (t.px < a || t.py < b) continue;
        acc += t.coef * falling(t.px, a) * falling(t.py, b) * power(x.x, t.px - a) * power(x.y, t.py - b);
    }
    return acc;
}

}  // namespace

Derivatives glued_phase_eval(const GluedCubic& sol, Point x, int phase) {
    if (phase != 1 && phase != -1) throw ValidationError("phase must be +1 or -1");
    const double k12 = -0.5 * sol.b * sol.m;
    const double k3 = phase > 0 ? sol.b * sol.m / 6.0 : sol.b / 6.0;
    return cubic_phase(k3, k12, sol.rotation, x);
}

Derivatives exact_eval(const ExactSolution& sol, Point x, DerivativeOrder order) {
    Derivatives d = std::visit(
        [&](const auto& s) -> Derivatives {
            using T = std::decay_t<decltype(s)>;
            Derivatives out;
            if constexpr (std::is_same_v<T, GluedCubic>) {
                const double y2 = -std::sin(s.rotation) * x.x + std::cos(s.rotation) * x.y;
                out = glued_phase_eval(s, x, y2 >= 0.0 ? 1 : -1);
                if (y2 == 0.0) out.third_other = glued_phase_eval(s, x, -1).third;
            } else if constexpr (std::is_same_v<T, QuadraticSaddle>) {
                out.value = x.y * x.y - x.x * x.x;
                out.grad = {-2.0 * x.x, 2.0 * x.y};
                out.hess = {-2.0, 0.0, 2.0};
            } else if constexpr (std::is_same_v<T, Bilinear>) {
                out.value = x.x * x.y;
                out.grad = {x.y, x.x};
                out.hess = {0.0, 1.0, 0.0};
            } else {
                out.value = poly_derivative(s, x, 0, 0);
                out.grad = {poly_derivative(s, x, 1, 0), poly_derivative(s, x, 0, 1)};
                out.hess = {poly_derivative(s, x, 2, 0), poly_derivative(s, x, 1, 1), poly_derivative(s, x, 0, 2)};
                out.third = {poly_derivative(s, x, 3, 0), poly_derivative(s, x, 2, 1), poly_derivative(s, x, 1, 2),
                             poly_derivative(s, x, 0, 3)};
            }
            return out;
        },
        sol);
    // Trim to the requested order so callers see exactly what they asked for.
    if (order < DerivativeOrder::Third) {
        d.third = {};
        d.third_other.reset();
    }
    if (order < DerivativeOrder::Hess) d.hess = {0.0, 0.0, 0.0};
    if (order < DerivativeOrder::Grad) d.grad = {};
    return d;
}

double exact_value(const ExactSolution& sol, Point x) { return exact_eval(sol, x, DerivativeOrder::Value).value; }

OracleReport oracle_check(const ExactSolution& sol, const BellmanProblem& problem, int sample_count,
                          double reject_above) {
    if (sample_count < 1) throw ValidationError("oracle_check needs a positive sample count");
    if (const auto* g = std::get_if<GluedCubic>(&sol)) {
        if (!problem.m || std::abs(*problem.m - g->m) > 1e-15 || std::abs(problem.rotation - g->rotation) > 1e-15) {
            throw ValidationError("oracle_check: solution and problem disagree on m or rotation");
        }
    }
    const int side = std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(sample_count)))));
    OracleReport rep;
    const SymMatrix2& A1 = problem.op1.A();
    const SymMatrix2& A2 = problem.op2.A();
    auto trace = [](const SymMatrix2& A, const SymMatrix2& H) {
        return A.a11 * H.a11 + 2.0 * A.a12 * H.a12 + A.a22 * H.a22;
    };
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            const Point x{-1.0 + 2.0 * i / (side - 1), -1.0 + 2.0 * j / (side - 1)};
            const SymMatrix2 H = exact_eval(sol, x, DerivativeOrder::Hess).hess;
            rep.residual_max = std::max(rep.residual_max, std::abs(std::min(trace(A1, H), trace(A2, H))));
            ++rep.samples;
        }
    }
    if (const auto* g = std::get_if<GluedCubic>(&sol)) {
        const Point along{std::cos(g->rotation), std::sin(g->rotation)};
        for (int k = 0; k < side; ++k) {
            const Point x = along * (-1.0 + 2.0 * k / (side - 1));
            const Derivatives up = glued_phase_eval(*g, x, 1);
            const Derivatives dn = glued_phase_eval(*g, x, -1);
            rep.value_defect = std::max(rep.value_defect, std::abs(up.value - dn.value));
            rep.grad_defect = std::max(rep.grad_defect, norm(up.grad - dn.grad));
            rep.hess_defect = std::max({rep.hess_defect, std::abs(up.hess.a11 - dn.hess.a11),
                                        std::abs(up.hess.a12 - dn.hess.a12), std::abs(up.hess.a22 - dn.hess.a22)});
        }
    }
    const double worst = std::max({rep.residual_max, rep.value_defect, rep.grad_defect, rep.hess_defect});
    if (!(worst <= reject_above)) {
        std::ostringstream msg;
        msg << "oracle_check rejected " << describe(sol) << ": residual " << rep.residual_max << ", C2 defects ("
            << rep.value_defect << ", " << rep.grad_defect << ", " << rep.hess_defect << ")";
        throw NumericalError(msg.str());
    }
    return rep;
}

BellmanProblem matching_problem(const ExactSolution& sol, double m_fallback) {
    if (const auto* g = std::get_if<GluedCubic>(&sol)) return BellmanProblem::reduced(g->m, g->rotation);
    if (const auto* q = std::get_if<QuadraticSaddle>(&sol)) return BellmanProblem::reduced(q->m);
    return BellmanProblem::reduced(m_fallback);
}

std::vector<CatalogEntry> manufactured_catalog() {
    const double deg15 = std::numbers::pi / 12.0;
    std::vector<CatalogEntry> out;
    auto add = [&](std::string name, ExactSolution s) {
        BellmanProblem p = matching_problem(s);
        out.push_back(CatalogEntry{std::move(name), std::move(s), std::move(p)});
    };
    for (double m : {1.5, 2.0, 4.0}) {
        std::ostringstream a, b;
        a << "glued_cubic(m=" << m << ",b=1)";
        b << "glued_cubic(m=" << m << ",b=1,rot=15deg)";
        add(a.str(), GluedCubic{m, 1.0, 0.0});
        add(b.str(), GluedCubic{m, 1.0, deg15});
    }
    add("glued_cubic(m=3,b=0.5,rot=15deg)", GluedCubic{3.0, 0.5, deg15});
    add("quadratic_saddle(m=2)", QuadraticSaddle{2.0});
    add("quadratic_saddle(m=1)", QuadraticSaddle{1.0});
    add("bilinear(m=2)", Bilinear{});
    return out;
}

std::string describe(const ExactSolution& sol) {
    std::ostringstream out;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GluedCubic>) {
                out << "glued_cubic(m=" << s.m << ", b=" << s.b << ", rotation=" << s.rotation << ")";
            } else if constexpr (std::is_same_v<T, QuadraticSaddle>) {
                out << "quadratic_saddle(m=" << s.m << ")";
            } else if constexpr (std::is_same_v<T, Bilinear>) {
                out << "bilinear";
            } else {
                out << "polynomial(" << s.terms.size() << " terms)";
            }
        },
        sol);
    return out.str();
}

}  // namespace bellman2d
