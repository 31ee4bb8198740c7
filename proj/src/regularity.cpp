#include "bellman2d/regularity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "bellman2d/errors.hpp"

namespace bellman2d {

namespace {

constexpr double kGolden = 0.6180339887498949;

void require_radius(const Grid2D& g, double radius) {
    if (!(radius > 0.0) || radius > 0.5 * g.half_width() * (1.0 + 1e-12)) {
        throw ValidationError("seminorm radius must lie in (0, half_width / 2]");
    }
}

void require_floor(const Grid2D& g, const std::vector<double>& radii) {
    if (radii.empty()) throw ValidationError("radius list is empty");
    for (double r : radii) {
        if (!(r >= 8.0 * g.h() * (1.0 - 1e-9))) throw ValidationError("radii must be >= 8h");
    }
}

void sort_decreasing(std::vector<double>& radii) { std::sort(radii.begin(), radii.end(), std::greater<>()); }

// Minimises f on [lo, hi]; returns the argmin.
double golden_section(const std::function<double(double)>& f, double lo, double hi, int iterations = 60) {
    double x1 = hi - kGolden * (hi - lo);
    double x2 = lo + kGolden * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int k = 0; k < iterations; ++k) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kGolden * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kGolden * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

struct BallNode {
    int i, j;
};

// Defined nodes within distance r of x0; throws when the ball leaves the defined region.
std::vector<BallNode> ball_nodes(const ScalarField2D& f, Point x0, double r) {
    const Grid2D& g = f.grid();
    const Point lo = g.node(0, 0);
    const int i0 = static_cast<int>(std::floor((x0.x - r - lo.x) / g.h()));
    const int i1 = static_cast<int>(std::ceil((x0.x + r - lo.x) / g.h()));
    const int j0 = static_cast<int>(std::floor((x0.y - r - lo.y) / g.h()));
    const int j1 = static_cast<int>(std::ceil((x0.y + r - lo.y) / g.h()));
    std::vector<BallNode> out;
    const double r2 = r * r * (1.0 + 1e-12);
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            const Point d = Point{lo.x + i * g.h(), lo.y + j * g.h()} - x0;
            if (dot(d, d) > r2) continue;
            if (i < 0 || j < 0 || i >= g.n() || j >= g.n() || !f.defined(i, j)) {
                throw ValidationError("ball around the analysis point leaves the defined grid region");
            }
            out.push_back({i, j});
        }
    }
    return out;
}

double log_log_slope(const std::vector<double>& r, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (y[k] > 0.0) {
            lx.push_back(std::log(r[k]));
            ly.push_back(std::log(y[k]));
        }
    }
    if (lx.size() < 2) return 0.0;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxy += (lx[k] - mx) * (ly[k] - my);
        sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

double lipschitz_seminorm(const ScalarField2D& u, double radius) {
    const Grid2D& g = u.grid();
    require_radius(g, radius);
    const Point c = g.center();
    double best = 0.0;
    for (int j = 1; j + 1 < g.n(); ++j) {
        for (int i = 1; i + 1 < g.n(); ++i) {
            if (norm(g.node(i, j) - c) > radius * (1.0 + 1e-12)) continue;
            if (!u.defined(i - 1, j - 1) || !u.defined(i + 1, j + 1)) continue;
            const double gx = (u(i + 1, j) - u(i - 1, j)) / (2.0 * g.h());
            const double gy = (u(i, j + 1) - u(i, j - 1)) / (2.0 * g.h());
            best = std::max(best, std::hypot(gx, gy));
        }
    }
    return best;
}

double c21_seminorm(const ScalarField2D& v, double radius) {
    const Grid2D& g = v.grid();
    require_radius(g, radius);
    const ScalarField2D d11 = second_difference(v, Direction::E1);
    const ScalarField2D d22 = second_difference(v, Direction::E2);
    const ScalarField2D d12 = mixed_difference(v);
    struct Entry {
        int i, j;
        double h11, h12, h22;
    };
    std::vector<Entry> nodes;
    const Point c = g.center();
    for (int j = 0; j < g.n(); ++j) {
        for (int i = 0; i < g.n(); ++i) {
            if (norm(g.node(i, j) - c) > radius * (1.0 + 1e-12)) continue;
            if (!d11.defined(i, j) || !d12.defined(i, j)) continue;
            nodes.push_back({i, j, d11(i, j), d12(i, j), d22(i, j)});
        }
    }
    const std::size_t count = nodes.size();
    std::size_t stride = 1;
    if (g.n() > 129) {
        // Anchors every stride-th node, paired with all nodes: about 4e7 pairs, never below 1e5.
        stride = std::max<std::size_t>(1, count * count / 40000000);
        while (stride > 1 && (count / stride) * count < 100000) --stride;
    }
    double best = 0.0;
    for (std::size_t a = 0; a < count; a += stride) {
        const Entry& p = nodes[a];
        for (std::size_t b = 0; b < count; ++b) {
            const Entry& q = nodes[b];
            const int di = p.i - q.i;
            const int dj = p.j - q.j;
            const int d2 = di * di + dj * dj;
            if (d2 < 16) continue;
            const double diff =
                std::max({std::abs(p.h11 - q.h11), std::abs(p.h12 - q.h12), std::abs(p.h22 - q.h22)});
            best = std::max(best, diff / std::sqrt(static_cast<double>(d2)));
        }
    }
    return best / g.h();
}

std::vector<double> dyadic_radii(double r_max, double h, double floor_factor) {
    if (!(r_max > 0.0) || !(h > 0.0)) throw ValidationError("dyadic_radii needs positive r_max and h");
    std::vector<double> out;
    for (double r = r_max; r >= floor_factor * h * (1.0 - 1e-12); r *= 0.5) out.push_back(r);
    return out;
}

std::string to_string(BlowupVerdict v) {
    switch (v) {
        case BlowupVerdict::TwoPlane: return "two_plane";
        case BlowupVerdict::OnePhase: return "one_phase";
        case BlowupVerdict::Unresolved: return "unresolved";
    }
    return "unresolved";
}

BlowupClassification blowup_classify(const ScalarField2D& u, Point x0, const FluxLaw& law, std::vector<double> radii,
                                     const BlowupOptions& options) {
    const Grid2D& g = u.grid();
    require_floor(g, radii);
    sort_decreasing(radii);
    if (options.angles < 8) throw ValidationError("blow-up angle lattice too coarse");

    // x0 must sit within h of the zero set: both signs among nearby nodes.
    {
        bool pos = false, nonpos = false;
        const Point lo = g.node(0, 0);
        const int ic = static_cast<int>(std::lround((x0.x - lo.x) / g.h()));
        const int jc = static_cast<int>(std::lround((x0.y - lo.y) / g.h()));
        for (int j = jc - 2; j <= jc + 2; ++j) {
            for (int i = ic - 2; i <= ic + 2; ++i) {
                if (i < 0 || j < 0 || i >= g.n() || j >= g.n() || !u.defined(i, j)) continue;
                if (norm(g.node(i, j) - x0) > 1.5 * g.h()) continue;
                (u(i, j) > 0.0 ? pos : nonpos) = true;
            }
        }
        if (!pos || !nonpos) throw ValidationError("blowup_classify: x0 is not within h of the free boundary");
    }

    BlowupClassification out;
    out.x0 = x0;
    out.radii = radii;
    std::vector<Point> xi;
    std::vector<double> w;
    for (double r : radii) {
        // Grid nodes of the ball, rescaled to the unit disk: no interpolation across the kink.
        xi.clear();
        w.clear();
        double ww = 0.0;
        double neg = 0.0;
        double wmax = 0.0;
        for (const BallNode& q : ball_nodes(u, x0, r)) {
            xi.push_back((g.node(q.i, q.j) - x0) * (1.0 / r));
            w.push_back(u(q.i, q.j) / r);
            ww += w.back() * w.back();
            neg = std::max(neg, -w.back());
            wmax = std::max(wmax, std::abs(w.back()));
        }
        struct Eval {
            double sse, a, b;
        };
        // Kink at xi.nu = c; c is refined within one cell of x0.
        auto fit = [&](double theta, double c) {
            const Point nu{std::cos(theta), std::sin(theta)};
            double sp = 0.0, spp = 0.0, sn = 0.0, snn = 0.0;
            for (std::size_t k = 0; k < xi.size(); ++k) {
                const double s = dot(xi[k], nu) - c;
                if (s > 0.0) {
                    sp += w[k] * s;
                    spp += s * s;
                } else if (s < 0.0) {
                    sn += w[k] * s;
                    snn += s * s;
                }
            }
            const double a = spp > 0.0 ? std::max(0.0, sp / spp) : 0.0;
            const double b = snn > 0.0 ? std::max(0.0, sn / snn) : 0.0;
            double sse = 0.0;
            for (std::size_t k = 0; k < xi.size(); ++k) {
                const double s = dot(xi[k], nu) - c;
                const double model = s > 0.0 ? a * s : b * s;
                sse += (w[k] - model) * (w[k] - model);
            }
            return Eval{sse, a, b};
        };
        const double dtheta = 2.0 * std::numbers::pi / options.angles;
        double theta = 0.0;
        double best_sse = std::numeric_limits<double>::infinity();
        for (int k = 0; k < options.angles; ++k) {
            const double sse = fit(k * dtheta, 0.0).sse;
            if (sse < best_sse) {
                best_sse = sse;
                theta = k * dtheta;
            }
        }
        double c = 0.0;
        const double c_max = g.h() / r;
        for (int round = 0; round < 2; ++round) {
            const double t = golden_section([&](double q) { return fit(q, c).sse; }, theta - dtheta, theta + dtheta);
            if (fit(t, c).sse <= best_sse) {
                theta = t;
                best_sse = fit(t, c).sse;
            }
            const double q = golden_section([&](double cc) { return fit(theta, cc).sse; }, -c_max, c_max);
            if (fit(theta, q).sse <= best_sse) {
                c = q;
                best_sse = fit(theta, q).sse;
            }
        }
        const Eval e = fit(theta, c);
        BlowupFit f;
        f.r = r;
        f.nu = {std::cos(theta), std::sin(theta)};
        f.offset = c * r;
        f.a = e.a;
        f.b = e.b;
        f.residual = ww > 0.0 ? std::sqrt(e.sse / ww) : 0.0;
        f.negative_max = neg;
        out.fits.push_back(f);
        if (r == radii.back()) {
            const BlowupFit& last = f;
            const double G = law(last.b, last.nu);
            const double scale_ab = std::max(last.a, last.b);
            const double scale_w = std::max(last.a, wmax);
            out.plane = TwoPlaneSolution{x0 + last.nu * last.offset, last.nu, last.a, last.b};
            out.flux_mismatch = std::abs(last.a - G) / std::max({last.a, G, 1e-300});
            if (last.residual <= options.fit_tol && scale_ab > 0.0 && last.b >= options.b_floor * scale_ab &&
                out.flux_mismatch <= options.flux_tol) {
                out.verdict = BlowupVerdict::TwoPlane;
            } else if ((last.b == 0.0 || last.b < options.b_floor * scale_w) &&
                       last.negative_max <= options.fit_tol * scale_w) {
                out.verdict = BlowupVerdict::OnePhase;
            } else {
                out.verdict = BlowupVerdict::Unresolved;
            }
        }
    }
    return out;
}

bool residual_decreasing_in_r(const BlowupClassification& c, double slack) {
    // fits are ordered by decreasing r: residuals must not grow along the list.
    for (std::size_t k = 1; k < c.fits.size(); ++k) {
        if (c.fits[k].residual > c.fits[k - 1].residual + slack) return false;
    }
    return true;
}

namespace {

constexpr int kMonomials[10][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};

double ipow(double x, int p) {
    double out = 1.0;
    for (int k = 0; k < p; ++k) out *= x;
    return out;
}

struct CubicFit {
    double sse = 0.0;
    std::array<double, 10> Q{};
    double gamma = 0.0;
};

CubicFit fit_on_ball(const ScalarField2D& v, const std::vector<BallNode>& nodes, Point x0, Point nu, double r) {
    const Grid2D& g = v.grid();
    const auto rows = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd A(rows, 11);
    Eigen::VectorXd y(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        const Point d = (g.node(nodes[k].i, nodes[k].j) - x0) * (1.0 / r);
        for (int c = 0; c < 10; ++c) A(k, c) = ipow(d.x, kMonomials[c][0]) * ipow(d.y, kMonomials[c][1]);
        const double s = std::max(0.0, dot(d, nu));
        A(k, 10) = s * s * s;
        y(k) = v(nodes[k].i, nodes[k].j);
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    CubicFit out;
    out.sse = (A * c - y).squaredNorm();
    for (int k = 0; k < 10; ++k) {
        out.Q[k] = c(k) / ipow(r, kMonomials[k][0] + kMonomials[k][1]);
    }
    out.gamma = c(10) / (r * r * r);
    return out;
}

}  // namespace

double expansion_eval(const ExpansionFit& fit, Point x) {
    const Point d = x - fit.x0;
    double acc = 0.0;
    for (int c = 0; c < 10; ++c) acc += fit.Q[c] * ipow(d.x, kMonomials[c][0]) * ipow(d.y, kMonomials[c][1]);
    const double s = std::max(0.0, dot(d, fit.nu));
    return acc + fit.gamma * s * s * s;
}

ExpansionFit fit_cubic_expansion(const ScalarField2D& v, Point x0, Point nu, std::vector<double> radii,
                                 const BellmanProblem& problem) {
    if (std::abs(norm(nu) - 1.0) > 1e-9) throw ValidationError("fit_cubic_expansion needs a unit normal");
    if (radii.empty()) throw ValidationError("radius list is empty");
    sort_decreasing(radii);
    const double r_min = radii.back();
    const std::vector<BallNode> fit_nodes = ball_nodes(v, x0, r_min);
    if (fit_nodes.size() < 40) {
        throw ValidationError("fit_cubic_expansion: fewer than 40 nodes in the smallest ball");
    }

    const double theta0 = std::atan2(nu.y, nu.x);
    auto sse_at = [&](double theta) {
        return fit_on_ball(v, fit_nodes, x0, {std::cos(theta), std::sin(theta)}, r_min).sse;
    };
    const double window = 3.0 * std::numbers::pi / 180.0;
    double best_theta = theta0;
    double best_sse = sse_at(theta0);
    for (int k = -30; k <= 30; ++k) {
        const double t = theta0 + window * k / 30.0;
        const double s = sse_at(t);
        if (s < best_sse) {
            best_sse = s;
            best_theta = t;
        }
    }
    const double step = window / 30.0;
    const double refined = golden_section(sse_at, best_theta - step, best_theta + step);
    const double theta = sse_at(refined) < best_sse ? refined : best_theta;

    ExpansionFit out;
    out.x0 = x0;
    out.nu = {std::cos(theta), std::sin(theta)};
    const CubicFit fit = fit_on_ball(v, fit_nodes, x0, out.nu, r_min);
    out.Q = fit.Q;
    out.gamma = fit.gamma;
    out.fit_nodes = static_cast<int>(fit_nodes.size());
    out.radii = radii;
    for (double r : radii) {
        double worst = 0.0;
        for (const BallNode& p : ball_nodes(v, x0, r)) {
            worst = std::max(worst, std::abs(v(p.i, p.j) - expansion_eval(out, v.grid().node(p.i, p.j))));
        }
        out.remainder_norms.push_back(worst);
    }
    out.alpha_est = std::clamp(log_log_slope(out.radii, out.remainder_norms) - 3.0, 0.0, 1.0);
    const SymMatrix2 H{2.0 * out.Q[3], out.Q[4], 2.0 * out.Q[5]};
    auto trace = [&](const SymMatrix2& A) { return A.a11 * H.a11 + 2.0 * A.a12 * H.a12 + A.a22 * H.a22; };
    out.L1Q = trace(problem.op1.A());
    out.L2Q = trace(problem.op2.A());
    return out;
}

DecayResult dyadic_decay_check(const ScalarField2D& u, Point x0, const std::optional<TwoPlaneSolution>& p,
                               std::vector<double> radii, double alpha_probe, double C0) {
    const Grid2D& g = u.grid();
    require_floor(g, radii);
    sort_decreasing(radii);
    if (!(alpha_probe > 0.0)) throw ValidationError("alpha_probe must be positive");
    DecayResult out;
    out.alpha_probe = alpha_probe;
    out.C0 = C0;
    out.radii = radii;
    for (double r : radii) {
        double sup = 0.0;
        for (const BallNode& q : ball_nodes(u, x0, r)) {
            const double value = u(q.i, q.j);
            const double ref = p ? (*p)(g.node(q.i, q.j)) : 0.0;
            sup = std::max(sup, std::abs(value - ref));
            if (r == radii.front()) out.scale = std::max(out.scale, std::abs(value));
        }
        out.sup_diff.push_back(sup);
        out.ratio.push_back(sup / std::pow(r, 1.0 + alpha_probe));
    }
    const double worst = *std::max_element(out.ratio.begin(), out.ratio.end());
    out.bounded = worst <= C0 * out.scale;
    out.trend_exponent = log_log_slope(out.radii, out.ratio);
    return out;
}

ThirdDerivativeJump third_derivative_jump(const ScalarField2D& u, const FreeBoundary& fb, Point axis,
                                          std::optional<double> within) {
    const Point c = u.grid().center();
    std::vector<double> plus, minus, ratio;
    for (const Polyline& line : fb.segments) {
        for (std::size_t k = 0; k < line.vertices.size(); ++k) {
            const Point x = line.vertices[k];
            if (within && std::max(std::abs(x.x - c.x), std::abs(x.y - c.y)) > *within) continue;
            const double side = dot(axis, line.normals[k]);
            if (side == 0.0) continue;
            const Point d = axis * (side > 0.0 ? 1.0 : -1.0);
            try {
                const double up = one_sided_derivative(u, x, d, Side::Plus);
                const double dn = one_sided_derivative(u, x, d, Side::Minus);
                if (!(dn > 0.0)) continue;
                plus.push_back(up);
                minus.push_back(dn);
                ratio.push_back(up / dn);
            } catch (const ValidationError&) {
            }
        }
    }
    ThirdDerivativeJump out;
    out.count = static_cast<int>(ratio.size());
    if (ratio.empty()) throw ValidationError("third_derivative_jump: no measurable vertices");
    out.median_plus = quantile(plus, 0.5);
    out.median_minus = quantile(minus, 0.5);
    out.median_ratio = quantile(ratio, 0.5);
    return out;
}

std::vector<double> transmission_residual(const ScalarField2D& v_plus, const ScalarField2D& v_minus, Point nu,
                                          int line, double b, const FluxLaw& law) {
    if (!(v_plus.grid() == v_minus.grid())) throw ValidationError("transmission_residual: fields on different grids");
    const bool along_x = std::abs(std::abs(nu.x) - 1.0) <= 1e-12 && std::abs(nu.y) <= 1e-12;
    const bool along_y = std::abs(std::abs(nu.y) - 1.0) <= 1e-12 && std::abs(nu.x) <= 1e-12;
    if (!along_x && !along_y) throw ValidationError("transmission_residual: misaligned interface");
    const Grid2D& g = v_plus.grid();
    const int n = g.n();
    if (line < 2 || line > n - 3) throw ValidationError("transmission_residual: interface line too close to the edge");
    const int s = static_cast<int>(along_x ? nu.x : nu.y);
    const Point tau = perp(nu);
    const int ts = static_cast<int>(std::lround(along_x ? tau.y : tau.x));
    // Field value at (normal offset k, tangential index t).
    auto at = [&](const ScalarField2D& f, int k, int t) {
        return along_x ? f(line + s * k, t) : f(t, line + s * k);
    };
    const double G = law(b, nu);
    const double G1 = law.d_db(b, nu);
    const double Gnu = law.d_dnu(b, nu);
    const double h = g.h();
    std::vector<double> out;
    for (int t = 1; t + 1 < n; ++t) {
        const double vp = (-3.0 * at(v_plus, 0, t) + 4.0 * at(v_plus, 1, t) - at(v_plus, 2, t)) / (2.0 * h);
        const double vm = (3.0 * at(v_minus, 0, t) - 4.0 * at(v_minus, -1, t) + at(v_minus, -2, t)) / (2.0 * h);
        const double dp = (at(v_plus, 0, t + 1) - at(v_plus, 0, t - 1)) / (2.0 * h);
        const double dm = (at(v_minus, 0, t + 1) - at(v_minus, 0, t - 1)) / (2.0 * h);
        const double vtau = 0.5 * (dp + dm) * ts;
        out.push_back(G * vp - b * G1 * vm - vtau * Gnu);
    }
    return out;
}

}  // namespace bellman2d
