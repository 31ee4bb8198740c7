#include "bellman2d/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bellman2d/errors.hpp"

namespace bellman2d {

namespace {

double discriminant(const SymMatrix2& A) {
    const double half_diff = 0.5 * (A.a11 - A.a22);
    return std::sqrt(half_diff * half_diff + A.a12 * A.a12);
}

constexpr double kBoundSlack = 1e-12;

}  // namespace

double SymMatrix2::min_eigenvalue() const { return 0.5 * (a11 + a22) - discriminant(*this); }
double SymMatrix2::max_eigenvalue() const { return 0.5 * (a11 + a22) + discriminant(*this); }

SymMatrix2 SymMatrix2::rotated(double angle) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    // R = [[c, -s], [s, c]]
    SymMatrix2 out;
    out.a11 = c * c * a11 - 2.0 * c * s * a12 + s * s * a22;
    out.a22 = s * s * a11 + 2.0 * c * s * a12 + c * c * a22;
    out.a12 = c * s * (a11 - a22) + (c * c - s * s) * a12;
    return out;
}

EllipticOperator::EllipticOperator(SymMatrix2 A, double lambda, double Lambda)
    : A_(A), lambda_(lambda), Lambda_(Lambda) {
    if (!(lambda > 0.0) || !(Lambda >= lambda) || !std::isfinite(Lambda)) {
        throw ValidationError("ellipticity bounds need 0 < lambda <= Lambda");
    }
    if (!std::isfinite(A.a11) || !std::isfinite(A.a12) || !std::isfinite(A.a22)) {
        throw ValidationError("operator matrix must be finite");
    }
    const double slack = kBoundSlack * std::max(1.0, Lambda);
    if (A.min_eigenvalue() < lambda - slack || A.max_eigenvalue() > Lambda + slack) {
        std::ostringstream msg;
        msg << "operator eigenvalues [" << A.min_eigenvalue() << ", " << A.max_eigenvalue()
            << "] leave the ellipticity range [" << lambda << ", " << Lambda << "]";
        throw ValidationError(msg.str());
    }
}

EllipticOperator EllipticOperator::from_matrix(SymMatrix2 A) {
    return EllipticOperator(A, A.min_eigenvalue(), A.max_eigenvalue());
}

bool EllipticOperator::monotone_admissible() const {
    const double off = std::abs(A_.a12);
    return A_.a11 >= off && A_.a22 >= off;
}

Stencil9 EllipticOperator::stencil(double h) const {
    if (!monotone_admissible()) {
        std::ostringstream msg;
        msg << "operator [[" << A_.a11 << ", " << A_.a12 << "], [" << A_.a12 << ", " << A_.a22
            << "]] has |a12| above a diagonal entry; the nine-point stencil would not be monotone";
        throw StencilMonotonicityError(msg.str());
    }
    const double inv = 1.0 / (h * h);
    const double off = std::abs(A_.a12);
    Stencil9 st;
    st.e = st.w = (A_.a11 - off) * inv;
    st.n = st.s = (A_.a22 - off) * inv;
    // The cross term rides on whichever diagonal keeps its weight positive.
    if (A_.a12 >= 0.0) {
        st.ne = st.sw = off * inv;
    } else {
        st.nw = st.se = off * inv;
    }
    st.center = -2.0 * (A_.a11 + A_.a22 - off) * inv;
    return st;
}

BellmanProblem BellmanProblem::reduced(double m, double rotation) {
    if (!(m >= 1.0) || !std::isfinite(m)) {
        throw ValidationError("reduced Bellman problem needs m >= 1");
    }
    const SymMatrix2 A2 = SymMatrix2{1.0, 0.0, m}.rotated(rotation);
    BellmanProblem p{EllipticOperator(SymMatrix2{}, 1.0, m), EllipticOperator(A2, 1.0, m), m, rotation};
    p.op2.stencil(1.0);  // refuses rotations without a monotone nine-point stencil
    return p;
}

BellmanProblem BellmanProblem::general(SymMatrix2 A1, SymMatrix2 A2) {
    const double lo = std::min(A1.min_eigenvalue(), A2.min_eigenvalue());
    const double hi = std::max(A1.max_eigenvalue(), A2.max_eigenvalue());
    if (!(lo > 0.0)) {
        throw ValidationError("operator matrices must be positive definite");
    }
    return BellmanProblem{EllipticOperator(A1, lo, hi), EllipticOperator(A2, lo, hi), std::nullopt, 0.0};
}

SmoothedNonlinearity::SmoothedNonlinearity(double m, double eps) : m_(m), eps_(eps) {
    if (!(m >= 1.0) || !std::isfinite(m)) throw ValidationError("smoothing needs m >= 1");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("smoothing width eps must be positive");
}

double SmoothedNonlinearity::value(double s) const {
    if (s >= eps_) return s;
    if (s <= -eps_) return m_ * s;
    const double t = s + eps_;
    return -m_ * eps_ + m_ * t + (1.0 - m_) * t * t / (4.0 * eps_);
}

double SmoothedNonlinearity::slope(double s) const {
    if (s >= eps_) return 1.0;
    if (s <= -eps_) return m_;
    return m_ + (1.0 - m_) * (s + eps_) / (2.0 * eps_);
}

double SmoothedNonlinearity::curvature(double s) const {
    if (s >= eps_ || s <= -eps_) return 0.0;
    return (1.0 - m_) / (2.0 * eps_);
}

double SmoothedNonlinearity::solve_identity_plus(double r) const {
    // s + h(s) is 2s above the band and (1 + m)s below it.
    if (r >= 2.0 * eps_) return 0.5 * r;
    if (r <= -(1.0 + m_) * eps_) return r / (1.0 + m_);
    if (m_ == 1.0) return 0.5 * r;
    // Inside the band, with t = s + eps:
    //   c t^2 + (1 + m) t - (r + (1 + m) eps) = 0,  c = (1 - m) / (4 eps) < 0.
    const double c = (1.0 - m_) / (4.0 * eps_);
    const double b = 1.0 + m_;
    const double rhs = r + (1.0 + m_) * eps_;
    // Root on the increasing branch, written to avoid cancellation.
    const double t = 2.0 * rhs / (b + std::sqrt(std::max(0.0, b * b + 4.0 * c * rhs)));
    return t - eps_;
}

double h_eval(const SmoothedNonlinearity& nl, double s, int order) {
    switch (order) {
        case 0: return nl.value(s);
        case 1: return nl.slope(s);
        default: throw ValidationError("h_eval order must be 0 or 1");
    }
}

ScalarField2D apply_operator(const EllipticOperator& op, const ScalarField2D& f) {
    const Grid2D& g = f.grid();
    const Stencil9 st = op.stencil(g.h());
    const int margin = f.margin() + 1;
    std::vector<double> out(g.size(), 0.0);
    for (int j = margin; j < g.n() - margin; ++j) {
        for (int i = margin; i < g.n() - margin; ++i) {
            out[g.index(i, j)] = st.apply(f, i, j);
        }
    }
    return ScalarField2D(g, std::move(out), margin);
}

ScalarField2D bellman_residual(const BellmanProblem& problem, const ScalarField2D& v) {
    return apply_operator(problem.op1, v).pointwise_min(apply_operator(problem.op2, v));
}

ScalarField2D smoothed_residual(const SmoothedNonlinearity& nl, const ScalarField2D& v) {
    const ScalarField2D d11 = second_difference(v, Direction::E1);
    const ScalarField2D d22 = second_difference(v, Direction::E2);
    const Grid2D& g = v.grid();
    const int margin = d11.margin();
    std::vector<double> out(g.size(), 0.0);
    for (int j = margin; j < g.n() - margin; ++j) {
        for (int i = margin; i < g.n() - margin; ++i) {
            out[g.index(i, j)] = d11(i, j) + nl.value(d22(i, j));
        }
    }
    return ScalarField2D(g, std::move(out), margin);
}

}  // namespace bellman2d
