#include "bellman2d/twophase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bellman2d/errors.hpp"

namespace bellman2d {

namespace {

constexpr double kUnitTol = 1e-9;

void require_unit(Point nu) {
    if (!(std::abs(norm(nu) - 1.0) <= kUnitTol)) {
        throw ValidationError("flux law direction must be a unit vector");
    }
}

// Smallest generalized eigenvalue of (A2, A1): min over nu of A2(nu, nu) / A1(nu, nu).
double min_rayleigh_ratio(const SymMatrix2& A1, const SymMatrix2& A2) {
    // det(A2 - mu A1) = 0  ->  a mu^2 + b mu + c = 0
    const double a = A1.a11 * A1.a22 - A1.a12 * A1.a12;
    const double b = -(A2.a11 * A1.a22 + A1.a11 * A2.a22 - 2.0 * A1.a12 * A2.a12);
    const double c = A2.a11 * A2.a22 - A2.a12 * A2.a12;
    const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
    return (-b - disc) / (2.0 * a);
}

Point unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

FluxLaw FluxLaw::bellman_reduced(double m, double axis_rotation) {
    if (!(m >= 1.0) || !std::isfinite(m)) throw ValidationError("bellman flux law needs m >= 1");
    FluxLaw law;
    law.kind_ = Kind::BellmanReduced;
    law.m_ = m;
    law.axis_ = {-std::sin(axis_rotation), std::cos(axis_rotation)};
    return law;
}

FluxLaw FluxLaw::operator_pair(SymMatrix2 A1, SymMatrix2 A2) {
    if (!(A1.min_eigenvalue() > 0.0) || !(A2.min_eigenvalue() > 0.0)) {
        throw ValidationError("operator-pair flux law needs positive definite matrices");
    }
    FluxLaw law;
    law.kind_ = Kind::OperatorPair;
    law.A1_ = A1;
    law.A2_ = A2;
    law.pair_floor_ = min_rayleigh_ratio(A1, A2);
    return law;
}

FluxLaw FluxLaw::for_problem(const BellmanProblem& problem) {
    if (problem.m) return bellman_reduced(*problem.m, problem.rotation);
    return operator_pair(problem.op1.A(), problem.op2.A());
}

FluxLaw FluxLaw::custom(Evaluator G, std::function<double(double)> omega) {
    if (!G || !omega) throw ValidationError("custom flux law needs an evaluator and a floor");
    FluxLaw law;
    law.kind_ = Kind::Custom;
    law.custom_ = std::move(G);
    law.omega_ = std::move(omega);
    return law;
}

double FluxLaw::operator()(double b, Point nu) const {
    switch (kind_) {
        case Kind::BellmanReduced: {
            const double c = dot(nu, axis_);
            return (1.0 + (m_ - 1.0) * c * c) * b;
        }
        case Kind::OperatorPair: return A2_.quad(nu) / A1_.quad(nu) * b;
        case Kind::Custom: return custom_(b, nu);
    }
    return 0.0;
}

double FluxLaw::omega(double b) const {
    switch (kind_) {
        case Kind::BellmanReduced: return b;
        case Kind::OperatorPair: return pair_floor_ * b;
        case Kind::Custom: return omega_(b);
    }
    return 0.0;
}

double FluxLaw::d_db(double b, Point nu) const {
    switch (kind_) {
        case Kind::BellmanReduced: {
            const double c = dot(nu, axis_);
            return 1.0 + (m_ - 1.0) * c * c;
        }
        case Kind::OperatorPair: return A2_.quad(nu) / A1_.quad(nu);
        case Kind::Custom: {
            const double step = 1e-6 * std::max(1.0, std::abs(b));
            const double lo = std::max(0.0, b - step);
            return ((*this)(b + step, nu) - (*this)(lo, nu)) / (b + step - lo);
        }
    }
    return 0.0;
}

double FluxLaw::d_dnu(double b, Point nu) const {
    const Point tau = perp(nu);
    switch (kind_) {
        case Kind::BellmanReduced:
            return 2.0 * (m_ - 1.0) * b * dot(nu, axis_) * dot(tau, axis_);
        case Kind::OperatorPair: {
            // d/dtheta of q2 / q1 with dq/dtheta = 2 A(nu, tau).
            auto bil = [](const SymMatrix2& A, Point x, Point y) {
                return A.a11 * x.x * y.x + A.a12 * (x.x * y.y + x.y * y.x) + A.a22 * x.y * y.y;
            };
            const double q1 = A1_.quad(nu);
            const double q2 = A2_.quad(nu);
            return b * (2.0 * bil(A2_, nu, tau) * q1 - 2.0 * bil(A1_, nu, tau) * q2) / (q1 * q1);
        }
        case Kind::Custom: {
            const double angle = std::atan2(nu.y, nu.x);
            constexpr double step = 1e-6;
            return ((*this)(b, unit_at(angle + step)) - (*this)(b, unit_at(angle - step))) / (2.0 * step);
        }
    }
    return 0.0;
}

std::optional<double> FluxLaw::inverse(double a, Point nu) const {
    if (!(a > (*this)(0.0, nu))) return std::nullopt;
    if (kind_ != Kind::Custom) return a / d_db(1.0, nu);
    // Bracket then bisect; G is strictly increasing in b.
    double lo = 0.0;
    double hi = 1.0;
    for (int k = 0; (*this)(hi, nu) < a; ++k) {
        if (k > 200) throw NumericalError("custom flux law could not be inverted");
        lo = hi;
        hi *= 2.0;
    }
    for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((*this)(mid, nu) < a ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

FluxLaw::Certificate FluxLaw::certify(double b_max) const {
    constexpr int kB = 1024;
    constexpr int kDirections = 64;
    Certificate cert;
    cert.min_increment = std::numeric_limits<double>::infinity();
    cert.min_floor_margin = std::numeric_limits<double>::infinity();
    double prev_omega = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kB; ++k) {
        const double b = b_max * k / (kB - 1);
        const double w = omega(b);
        if (w < prev_omega) cert.coercive = false;
        prev_omega = w;
    }
    if (!(omega(b_max) > omega(0.0))) cert.coercive = false;
    for (int d = 0; d < kDirections; ++d) {
        const Point nu = unit_at(2.0 * std::numbers::pi * d / kDirections);
        double prev = (*this)(0.0, nu);
        cert.min_floor_margin = std::min(cert.min_floor_margin, prev - omega(0.0));
        for (int k = 1; k < kB; ++k) {
            const double b = b_max * k / (kB - 1);
            const double g = (*this)(b, nu);
            cert.min_increment = std::min(cert.min_increment, g - prev);
            cert.min_floor_margin = std::min(cert.min_floor_margin, g - omega(b));
            prev = g;
        }
    }
    cert.monotone = cert.min_increment > 0.0;
    cert.coercive = cert.coercive && cert.min_floor_margin >= -1e-12 * std::max(1.0, b_max);
    return cert;
}

double flux_eval(const FluxLaw& law, double b, Point nu) {
    require_unit(nu);
    if (!(b >= 0.0)) throw ValidationError("flux law needs b >= 0");
    return law(b, nu);
}

TwoPlaneSolution make_two_plane(const FluxLaw& law, Point x0, Point nu, double b) {
    require_unit(nu);
    if (!(b > 0.0)) throw ValidationError("two-plane solution needs b > 0");
    const double a = law(b, nu);
    if (!(a > 0.0)) throw ValidationError("two-plane solution needs a = G(b, nu) > 0");
    return {x0, nu, a, b};
}

double two_plane_eval(const TwoPlaneSolution& p, Point x) { return p(x); }

std::optional<TwoPlaneSolution> tangent_two_plane(const ScalarField2D& u, int i, int j, const FluxLaw& law) {
    const Grid2D& g = u.grid();
    if (!u.defined(i - 1, j - 1) || !u.defined(i + 1, j + 1)) {
        throw ValidationError("tangent two-plane needs a node with defined neighbours");
    }
    const double value = u(i, j);
    if (value == 0.0) {
        throw ValidationError("tangent two-plane is taken away from the zero set (u(y) = 0)");
    }
    const Point grad{(u(i + 1, j) - u(i - 1, j)) / (2.0 * g.h()), (u(i, j + 1) - u(i, j - 1)) / (2.0 * g.h())};
    const double slope = norm(grad);
    if (slope == 0.0) return std::nullopt;
    const Point nu = grad * (1.0 / slope);
    const Point y = g.node(i, j);
    if (value > 0.0) {
        const std::optional<double> b = law.inverse(slope, nu);
        if (!b || !(*b > 0.0)) return std::nullopt;
        return TwoPlaneSolution{y - nu * (value / slope), nu, slope, *b};
    }
    return TwoPlaneSolution{y - nu * (value / slope), nu, law(slope, nu), slope};
}

double GProfile::operator()(double t) const {
    const double pos = (t - t_min) / step;
    if (!(pos >= -1e-9) || !(pos <= static_cast<double>(g.size() - 1) + 1e-9)) {
        throw ValidationError("g profile evaluated outside its range");
    }
    const std::size_t k = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), g.size() - 2);
    const double frac = pos - static_cast<double>(k);
    return (1.0 - frac) * g[k] + frac * g[k + 1];
}

double comparison_eval(const ComparisonFunction& c, Point x) {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, PhiParabolic>) {
                const double s = x.y - x.x * x.x;
                return s + f.C * s * s;
            } else if constexpr (std::is_same_v<T, PsiTwoPhase>) {
                const double s = x.y - x.x * x.x;
                const double phi = s + f.C * s * s;
                return phi > 0.0 ? f.a_plus * phi : f.gamma * phi;
            } else if constexpr (std::is_same_v<T, LineFamily>) {
                return (1.0 + f.s) * x.y - 2.0 * f.s;
            } else {
                const GProfile& p = f.profile;
                if (p.delta == 0.0) return p(dot(x, f.nu));
                const double radius = 1.0 / (p.delta * p.delta * p.delta);
                return p(radius - norm(x - f.nu * radius));
            }
        },
        c);
}

double parabolic_constant(double lambda, double Lambda) {
    if (!(lambda > 0.0) || !(Lambda >= lambda)) throw ValidationError("parabolic_constant needs 0 < lambda <= Lambda");
    // Any C >= 3 Lambda / (2 lambda) works; this choice leaves L phi >= Lambda.
    return 2.0 * Lambda / lambda;
}

GProfile g_profile_solve(double m, double nu2sq, double delta, double eps, std::pair<double, double> t_range) {
    const auto [t0, t1] = t_range;
    if (!(delta >= 0.0)) throw ValidationError("g profile needs delta >= 0");
    if (!(nu2sq >= 0.0 && nu2sq <= 1.0)) throw ValidationError("g profile needs nu2^2 in [0, 1]");
    if (!(t0 < 0.0 && t1 > 0.0)) throw ValidationError("g profile range must contain 0 in its interior");
    if (delta > 0.0 && !(1.0 + delta * t0 > 0.0)) {
        throw ValidationError("g profile range must keep 1 + delta t > 0");
    }
    const SmoothedNonlinearity h(m, eps);
    const double nu1sq = 1.0 - nu2sq;
    const double range = t1 - t0;
    // At most 1e-4 of the range, and fine enough to resolve the smoothing band.
    double step = std::min(1e-4 * range, 0.25 * eps);
    if (!(step > 1e-12 * range) || !(step > 0.0)) throw NumericalError("g profile step underflow");
    // Put t = 0 on the lattice.
    const auto below = static_cast<std::size_t>(std::ceil(-t0 / step));
    const auto above = static_cast<std::size_t>(std::ceil(t1 / step));

    auto rhs = [&](double t, double g) { return (1.0 + delta * t) / (nu1sq + (nu2sq + delta) * h.slope(g)); };
    auto march = [&](double direction, std::size_t steps) {
        std::vector<double> out{0.0};
        out.reserve(steps + 1);
        double t = 0.0;
        double g = 0.0;
        const double k = direction * step;
        for (std::size_t s = 0; s < steps; ++s) {
            const double k1 = rhs(t, g);
            const double k2 = rhs(t + 0.5 * k, g + 0.5 * k * k1);
            const double k3 = rhs(t + 0.5 * k, g + 0.5 * k * k2);
            const double k4 = rhs(t + k, g + k * k3);
            g += k * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            t += k;
            out.push_back(g);
        }
        return out;
    };
    const std::vector<double> fwd = march(1.0, above);
    const std::vector<double> bwd = march(-1.0, below);

    GProfile p;
    p.m = m;
    p.nu2sq = nu2sq;
    p.delta = delta;
    p.eps = eps;
    p.step = step;
    p.t_min = -step * static_cast<double>(below);
    p.g.assign(bwd.rbegin(), bwd.rend());
    p.g.insert(p.g.end(), fwd.begin() + 1, fwd.end());
    return p;
}

double g_profile_slope(const GProfile& g, double t) {
    const double k = g.step;
    return (g(t + k) - g(t)) / k;
}

Window Window::centered(const Grid2D& grid, Point center, double half_side) {
    const Point lo = grid.node(0, 0);
    const int i0 = static_cast<int>(std::ceil((center.x - half_side - lo.x) / grid.h() - 1e-9));
    const int i1 = static_cast<int>(std::floor((center.x + half_side - lo.x) / grid.h() + 1e-9));
    const int j0 = static_cast<int>(std::ceil((center.y - half_side - lo.y) / grid.h() - 1e-9));
    const int j1 = static_cast<int>(std::floor((center.y + half_side - lo.y) / grid.h() + 1e-9));
    if (i0 < 0 || j0 < 0 || i1 >= grid.n() || j1 >= grid.n() || i1 - i0 < 2 || j1 - j0 < 2) {
        throw ValidationError("window does not fit inside the grid");
    }
    return {grid, i0, i1, j0, j1};
}

namespace {

void require_interior_window(const Window& w) {
    const int n = w.grid.n();
    if (w.i0 < 1 || w.j0 < 1 || w.i1 > n - 2 || w.j1 > n - 2 || w.i1 < w.i0 || w.j1 < w.j0) {
        throw ValidationError("comparison window touches the grid boundary");
    }
}

double operator_at(const Stencil9& st, const ScalarField2D& f, int i, int j) { return st.apply(f, i, j); }

}  // namespace

SubsolutionReport subsolution_check(const ComparisonFunction& c, const BellmanProblem& problem, const FluxLaw& law,
                                    const Window& window, double tol) {
    require_interior_window(window);
    const Grid2D& g = window.grid;
    // Only the window and its one-node ring are ever read.
    std::vector<double> vals(g.size(), 0.0);
    for (int j = window.j0 - 1; j <= window.j1 + 1; ++j)
        for (int i = window.i0 - 1; i <= window.i1 + 1; ++i) vals[g.index(i, j)] = comparison_eval(c, g.node(i, j));
    const ScalarField2D f(g, std::move(vals));
    const Stencil9 st1 = problem.op1.stencil(g.h());
    const Stencil9 st2 = problem.op2.stencil(g.h());

    SubsolutionReport rep;
    rep.operator_margin = std::numeric_limits<double>::infinity();

    if (const auto* gp = std::get_if<GProfileComparison>(&c)) {
        const SmoothedNonlinearity h(gp->profile.m, gp->profile.eps);
        const double inv_h2 = 1.0 / (g.h() * g.h());
        for (int j = window.j0; j <= window.j1; ++j) {
            for (int i = window.i0; i <= window.i1; ++i) {
                const double u = f(i, j);
                const double d11 = (f(i + 1, j) + f(i - 1, j) - 2.0 * u) * inv_h2;
                const double d22 = (f(i, j + 1) + f(i, j - 1) - 2.0 * u) * inv_h2;
                const double d2 = (f(i, j + 1) - f(i, j - 1)) / (2.0 * g.h());
                const double e = d11 + h.slope(u) * d22 + h.curvature(u) * d2 * d2;
                rep.operator_margin = std::min(rep.operator_margin, e);
                ++rep.nodes_checked;
            }
        }
    } else {
        double C = 0.0;
        bool two_phase = false;
        if (const auto* phi = std::get_if<PhiParabolic>(&c)) C = phi->C;
        if (const auto* psi = std::get_if<PsiTwoPhase>(&c)) {
            C = psi->C;
            two_phase = true;
        }
        auto valid = [&](Point x) {
            if (std::holds_alternative<LineFamily>(c) || C <= 0.0) return true;
            return std::abs(x.y - x.x * x.x) <= 0.25 / C;
        };
        for (int j = window.j0; j <= window.j1; ++j) {
            for (int i = window.i0; i <= window.i1; ++i) {
                if (!valid(g.node(i, j))) continue;
                double value;
                if (two_phase) {
                    double lo = f(i, j);
                    double hi = f(i, j);
                    for (int dj = -1; dj <= 1; ++dj)
                        for (int di = -1; di <= 1; ++di) {
                            lo = std::min(lo, f(i + di, j + dj));
                            hi = std::max(hi, f(i + di, j + dj));
                        }
                    if (lo > 0.0) {
                        value = operator_at(st1, f, i, j);
                    } else if (hi < 0.0) {
                        value = operator_at(st2, f, i, j);
                    } else {
                        continue;  // stencil straddles the zero set; covered by the slope check
                    }
                } else {
                    value = std::min(operator_at(st1, f, i, j), operator_at(st2, f, i, j));
                }
                rep.operator_margin = std::min(rep.operator_margin, value);
                ++rep.nodes_checked;
            }
        }
        if (const auto* psi = std::get_if<PsiTwoPhase>(&c)) {
            // Zero crossings along vertical grid lines: phi = 0 exactly on x2 = x1^2.
            double slope_margin = std::numeric_limits<double>::infinity();
            for (int i = window.i0; i <= window.i1; ++i) {
                const Point x{g.node(i, 0).x, 0.0};
                const Point crossing{x.x, x.x * x.x};
                if (crossing.y < g.node(0, window.j0).y || crossing.y > g.node(0, window.j1).y) continue;
                const Point grad{-2.0 * crossing.x, 1.0};  // grad phi = grad s where s = 0
                const double gnorm = norm(grad);
                const Point nu = grad * (1.0 / gnorm);
                const double a = psi->a_plus * gnorm;
                const double b = psi->gamma * gnorm;
                slope_margin = std::min(slope_margin, law(b, nu) - a);
                ++rep.crossings_checked;
            }
            if (rep.crossings_checked > 0) rep.slope_margin = slope_margin;
        }
    }
    if (rep.nodes_checked == 0) throw ValidationError("comparison window contains no admissible nodes");
    rep.passed = rep.operator_margin >= -tol && (!rep.slope_margin || *rep.slope_margin >= -tol);
    return rep;
}

MaximumPrincipleReport maximum_principle_check(const ScalarField2D& u, const TwoPlaneSolution& p,
                                               const Window& region, double tol) {
    if (!(region.grid == u.grid())) throw ValidationError("maximum principle region is on another grid");
    if (!u.defined(region.i0, region.j0) || !u.defined(region.i1, region.j1)) {
        throw ValidationError("maximum principle region covers undefined nodes");
    }
    const Grid2D& g = u.grid();
    MaximumPrincipleReport rep;
    rep.boundary_dominated = true;
    for (int j = region.j0; j <= region.j1 && rep.boundary_dominated; ++j) {
        for (int i = region.i0; i <= region.i1; ++i) {
            if (region.on_edge(i, j) && u(i, j) > p(g.node(i, j))) {
                rep.boundary_dominated = false;
                break;
            }
        }
    }
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (int j = region.j0; j <= region.j1; ++j) {
        for (int i = region.i0; i <= region.i1; ++i) {
            const double excess = u(i, j) - p(g.node(i, j)) - tol;
            rep.max_violation = std::max(rep.max_violation, excess);
            if (rep.boundary_dominated && excess > 0.0 && !rep.first_violation) rep.first_violation = {i, j};
        }
    }
    rep.holds = !rep.boundary_dominated || !rep.first_violation;
    return rep;
}

double comparison_tolerance(double residual_max, double h) { return 5.0 * (residual_max + h * h); }

}  // namespace bellman2d
