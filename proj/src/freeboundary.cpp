#include "bellman2d/freeboundary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_map>

#include "bellman2d/errors.hpp"

namespace bellman2d {

std::size_t FreeBoundary::vertex_count() const {
    std::size_t total = 0;
    for (const Polyline& p : segments) total += p.vertices.size();
    return total;
}

namespace {

struct Crossing {
    EdgeId from;
    EdgeId to;
};

long long edge_key(const EdgeId& e, int n) {
    return (static_cast<long long>(e.j) * n + e.i) * 2 + (e.vertical ? 1 : 0);
}

double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

// Bilinear gradient of cell (ci, cj) at x, or nullopt when a corner is undefined.
std::optional<Point> cell_gradient(const ScalarField2D& u, int ci, int cj, Point x) {
    const Grid2D& g = u.grid();
    if (ci < 0 || cj < 0 || ci > g.n() - 2 || cj > g.n() - 2) return std::nullopt;
    if (!u.defined(ci, cj) || !u.defined(ci + 1, cj + 1)) return std::nullopt;
    const Point lo = g.node(ci, cj);
    const double s = std::clamp((x.x - lo.x) / g.h(), 0.0, 1.0);
    const double t = std::clamp((x.y - lo.y) / g.h(), 0.0, 1.0);
    const double u00 = u(ci, cj), u10 = u(ci + 1, cj), u01 = u(ci, cj + 1), u11 = u(ci + 1, cj + 1);
    return Point{((u10 - u00) * (1.0 - t) + (u11 - u01) * t) / g.h(),
                 ((u01 - u00) * (1.0 - s) + (u11 - u10) * s) / g.h()};
}

// Cells straddling a kink in u bias the averaged gradient by O(1). Re-estimate
// from whole cells about 2h off the contour on each side, where u is smooth.
Point refine_one_sided(const ScalarField2D& u, Point x, Point nu0, double band_tol) {
    const Grid2D& g = u.grid();
    const Point lo = g.node(0, 0);
    Point nu = nu0;
    for (int pass = 0; pass < 2; ++pass) {
        Point acc;
        int found = 0;
        for (double side : {1.0, -1.0}) {
            const Point p = x + nu * (2.0 * side * g.h());
            const int ci = static_cast<int>(std::floor((p.x - lo.x) / g.h()));
            const int cj = static_cast<int>(std::floor((p.y - lo.y) / g.h()));
            const auto grad = cell_gradient(u, ci, cj, p);
            if (!grad) continue;
            bool same_side = true;
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const double v = u(ci + di, cj + dj);
                    if (side > 0 ? !(v > 0.0) : v > 0.0) same_side = false;
                }
            const double len = norm(*grad);
            if (!same_side || !(len > std::max(band_tol, 1e-14))) continue;
            acc = acc + *grad * (1.0 / len);
            ++found;
        }
        const double len = norm(acc);
        if (found == 0 || !(len > 0.0)) break;
        nu = acc * (1.0 / len);
    }
    return nu;
}

}  // namespace

FreeBoundary extract_gamma(const ScalarField2D& u, double band_tol) {
    if (!(band_tol >= 0.0)) throw ValidationError("band_tol must be >= 0");
    const Grid2D& g = u.grid();
    const int n = g.n();
    FreeBoundary fb;

    bool any_pos = false;
    bool any_nonpos = false;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (!u.defined(i, j)) continue;
            (u(i, j) > 0.0 ? any_pos : any_nonpos) = true;
        }
    }
    if (!any_pos || !any_nonpos) {
        fb.one_phase = true;
        return fb;
    }

    std::unordered_map<long long, Point> points;
    auto edge_point = [&](const EdgeId& e) -> Point {
        const long long key = edge_key(e, n);
        if (auto it = points.find(key); it != points.end()) return it->second;
        const int i2 = e.vertical ? e.i : e.i + 1;
        const int j2 = e.vertical ? e.j + 1 : e.j;
        const double ua = u(e.i, e.j);
        const double ub = u(i2, j2);
        // Interpolate from the positive end so a zero node is hit exactly.
        const bool a_pos = ua > 0.0;
        const Point pa = a_pos ? g.node(e.i, e.j) : g.node(i2, j2);
        const Point pb = a_pos ? g.node(i2, j2) : g.node(e.i, e.j);
        const double fa = a_pos ? ua : ub;
        const double fb_ = a_pos ? ub : ua;
        const double t = fa / (fa - fb_);
        const Point p = pa + (pb - pa) * t;
        points.emplace(key, p);
        return p;
    };

    std::vector<Crossing> pieces;
    for (int j = 0; j + 1 < n; ++j) {
        for (int i = 0; i + 1 < n; ++i) {
            if (!u.defined(i, j) || !u.defined(i + 1, j + 1)) continue;
            const std::array<double, 4> c{u(i, j), u(i + 1, j), u(i + 1, j + 1), u(i, j + 1)};
            if (std::all_of(c.begin(), c.end(), [&](double v) { return std::abs(v) < band_tol; })) {
                fb.degenerate_cells.emplace_back(i, j);
                continue;
            }
            const std::array<bool, 4> pos{c[0] > 0.0, c[1] > 0.0, c[2] > 0.0, c[3] > 0.0};
            const std::array<Point, 4> corner{g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1), g.node(i, j + 1)};
            // Edge k joins corner k and corner k+1.
            const std::array<EdgeId, 4> edge{EdgeId{i, j, false}, EdgeId{i + 1, j, true}, EdgeId{i, j + 1, false},
                                             EdgeId{i, j, true}};
            std::vector<int> crossed;
            for (int k = 0; k < 4; ++k)
                if (pos[k] != pos[(k + 1) % 4]) crossed.push_back(k);
            if (crossed.empty()) continue;

            auto emit = [&](int ea, int eb, int cut_corner) {
                const Point P = edge_point(edge[ea]);
                const Point Q = edge_point(edge[eb]);
                double side = 0.0;
                if (cut_corner >= 0) {
                    side = cross(Q - P, corner[cut_corner] - P) * (pos[cut_corner] ? 1.0 : -1.0);
                } else {
                    for (int k = 0; k < 4; ++k) {
                        if (!pos[k]) continue;
                        const double s = cross(Q - P, corner[k] - P);
                        if (std::abs(s) > std::abs(side)) side = s;
                    }
                }
                if (side >= 0.0) {
                    pieces.push_back({edge[ea], edge[eb]});
                } else {
                    pieces.push_back({edge[eb], edge[ea]});
                }
            };

            if (crossed.size() == 2) {
                emit(crossed[0], crossed[1], -1);
            } else {
                // Saddle: corners 0, 2 share a sign opposite to 1, 3.
                const double centre = 0.25 * (c[0] + c[1] + c[2] + c[3]);
                const bool joined_pos = centre > 0.0;
                // Cut off the corners of the sign that is not joined through the centre.
                const int first = (pos[0] != joined_pos) ? 0 : 1;
                for (int k : {first, first + 2}) emit((k + 3) % 4, k, k);
            }
        }
    }

    // A crossing that lands exactly on a zero node is shared by every edge
    // meeting there, so such crossings are chained by node instead of by edge.
    auto chain_key = [&](const EdgeId& e) -> long long {
        const int i2 = e.vertical ? e.i : e.i + 1;
        const int j2 = e.vertical ? e.j + 1 : e.j;
        const bool a_pos = u(e.i, e.j) > 0.0;
        const int ni = a_pos ? i2 : e.i;
        const int nj = a_pos ? j2 : e.j;
        if (u(ni, nj) == 0.0) return -1 - (static_cast<long long>(nj) * n + ni);
        return edge_key(e, n);
    };
    std::erase_if(pieces, [&](const Crossing& c) { return chain_key(c.from) == chain_key(c.to); });

    std::unordered_map<long long, int> start_of;
    std::unordered_map<long long, int> end_of;
    for (int s = 0; s < static_cast<int>(pieces.size()); ++s) {
        start_of[chain_key(pieces[s].from)] = s;
        end_of[chain_key(pieces[s].to)] = s;
    }
    std::vector<bool> used(pieces.size(), false);

    auto walk = [&](int s0, bool closed) {
        Polyline line;
        line.closed = closed;
        line.vertices.push_back(edge_point(pieces[s0].from));
        line.edges.push_back(pieces[s0].from);
        for (int s = s0; s >= 0 && !used[s];) {
            used[s] = true;
            const EdgeId to = pieces[s].to;
            auto next = start_of.find(chain_key(to));
            const bool wraps = closed && next != start_of.end() && next->second == s0;
            if (!wraps) {
                line.vertices.push_back(edge_point(to));
                line.edges.push_back(to);
            }
            s = next == start_of.end() ? -1 : next->second;
        }
        // Drop repeated points produced by contours through zero-valued nodes.
        const double tiny = 1e-12 * g.h();
        Polyline clean;
        clean.closed = closed;
        for (std::size_t k = 0; k < line.vertices.size(); ++k) {
            if (!clean.vertices.empty() && norm(line.vertices[k] - clean.vertices.back()) <= tiny) continue;
            clean.vertices.push_back(line.vertices[k]);
            clean.edges.push_back(line.edges[k]);
        }
        if (closed && clean.vertices.size() > 1 && norm(clean.vertices.front() - clean.vertices.back()) <= tiny) {
            clean.vertices.pop_back();
            clean.edges.pop_back();
        }
        if (clean.vertices.size() >= 2) fb.segments.push_back(std::move(clean));
    };

    for (int s = 0; s < static_cast<int>(pieces.size()); ++s) {
        if (!used[s] && !end_of.contains(chain_key(pieces[s].from))) walk(s, false);
    }
    for (int s = 0; s < static_cast<int>(pieces.size()); ++s) {
        if (!used[s]) walk(s, true);
    }

    for (int sidx = 0; sidx < static_cast<int>(fb.segments.size()); ++sidx) {
        Polyline& line = fb.segments[sidx];
        line.normals.resize(line.vertices.size());
        for (int k = 0; k < static_cast<int>(line.vertices.size()); ++k) {
            line.normals[k] = normal_estimate(fb, u, sidx, k, band_tol);
        }
    }
    return fb;
}

Point normal_estimate(const FreeBoundary& fb, const ScalarField2D& u, int segment, int vertex, double band_tol) {
    if (segment < 0 || segment >= static_cast<int>(fb.segments.size())) {
        throw ValidationError("normal_estimate: no such polyline");
    }
    const Polyline& line = fb.segments[segment];
    const int count = static_cast<int>(line.vertices.size());
    if (vertex < 0 || vertex >= count || line.edges.size() != line.vertices.size()) {
        throw ValidationError("normal_estimate: dangling vertex");
    }
    const Point x = line.vertices[vertex];
    const EdgeId e = line.edges[vertex];
    // Cells on either side of the edge.
    const std::array<std::pair<int, int>, 2> cells =
        e.vertical ? std::array<std::pair<int, int>, 2>{{{e.i, e.j}, {e.i - 1, e.j}}}
                   : std::array<std::pair<int, int>, 2>{{{e.i, e.j}, {e.i, e.j - 1}}};
    Point sum;
    int used = 0;
    for (const auto& [ci, cj] : cells) {
        if (const auto grad = cell_gradient(u, ci, cj, x)) {
            sum = sum + *grad;
            ++used;
        }
    }
    if (used > 0) {
        const Point grad = sum * (1.0 / used);
        const double len = norm(grad);
        if (len > band_tol && len > 0.0) return refine_one_sided(u, x, grad * (1.0 / len), band_tol);
    }
    // Fallback: left normal of the local chord.
    int prev = vertex - 1;
    int next = vertex + 1;
    if (line.closed) {
        prev = (prev + count) % count;
        next %= count;
    } else {
        prev = std::max(prev, 0);
        next = std::min(next, count - 1);
    }
    const Point tangent = line.vertices[next] - line.vertices[prev];
    const double len = norm(tangent);
    if (len == 0.0) throw NumericalError("normal_estimate: degenerate polyline");
    return perp(tangent) * (1.0 / len);
}

double one_sided_derivative(const ScalarField2D& u, Point point, Point nu, Side side) {
    const double h = u.grid().h();
    const double dir = side == Side::Plus ? 1.0 : -1.0;
    std::vector<double> ts;
    std::vector<double> ys;
    for (int k = 2; k <= 8; ++k) {
        const double t = k * h;
        const std::optional<double> value = try_interpolate(u, point + nu * (dir * t));
        if (!value) continue;
        if (side == Side::Plus ? *value < 0.0 : *value > 0.0) continue;
        ts.push_back(t);
        ys.push_back(std::abs(*value));
    }
    if (ts.size() < 4) {
        throw ValidationError("one_sided_derivative: fewer than 4 samples with the required sign");
    }
    const double count = static_cast<double>(ts.size());
    double tm = 0.0, ym = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        tm += ts[k];
        ym += ys[k];
    }
    tm /= count;
    ym /= count;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        sxy += (ts[k] - tm) * (ys[k] - ym);
        sxx += (ts[k] - tm) * (ts[k] - tm);
    }
    return std::max(0.0, sxy / sxx);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of an empty list");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(k);
    return values[k] + frac * (values[k + 1] - values[k]);
}

JumpSurvey jump_condition_survey(const ScalarField2D& u, const FreeBoundary& fb, const FluxLaw& law,
                                 const SurveyOptions& options) {
    if (fb.empty()) throw ValidationError("jump_condition_survey: empty free boundary");
    const Point centre = u.grid().center();
    JumpSurvey survey;
    std::vector<double> errors;
    for (int s = 0; s < static_cast<int>(fb.segments.size()); ++s) {
        const Polyline& line = fb.segments[s];
        for (int k = 0; k < static_cast<int>(line.vertices.size()); ++k) {
            const Point x = line.vertices[k];
            if (options.within &&
                std::max(std::abs(x.x - centre.x), std::abs(x.y - centre.y)) > *options.within) {
                continue;
            }
            JumpMeasurement m;
            m.segment = s;
            m.vertex = k;
            m.point = x;
            m.nu = line.normals[k];
            try {
                m.u_plus = one_sided_derivative(u, x, m.nu, Side::Plus);
                m.u_minus = one_sided_derivative(u, x, m.nu, Side::Minus);
            } catch (const ValidationError&) {
                ++survey.skipped;
                continue;
            }
            m.predicted_plus = law(m.u_minus, m.nu);
            m.relative_error = std::abs(m.u_plus - m.predicted_plus) /
                               std::max({m.u_plus, m.predicted_plus, options.relative_floor});
            m.unconstrained = m.u_minus < options.noise_floor;
            if (m.unconstrained) {
                ++survey.unconstrained;
            } else {
                errors.push_back(m.relative_error);
            }
            survey.measurements.push_back(m);
        }
    }
    if (survey.measurements.empty()) throw ValidationError("jump_condition_survey: every vertex was skipped");
    if (!errors.empty()) {
        survey.median_relative_error = quantile(errors, 0.5);
        survey.p90_relative_error = quantile(errors, 0.9);
    }
    return survey;
}

void write_gamma_csv(const std::string& path, const FreeBoundary& fb) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << "segment_id,x,y,nu_x,nu_y\n" << std::setprecision(17);
    for (std::size_t s = 0; s < fb.segments.size(); ++s) {
        const Polyline& line = fb.segments[s];
        for (std::size_t k = 0; k < line.vertices.size(); ++k) {
            out << s << ',' << line.vertices[k].x << ',' << line.vertices[k].y << ',' << line.normals[k].x << ','
                << line.normals[k].y << '\n';
        }
    }
}

void write_jump_survey_csv(const std::string& path, const JumpSurvey& survey) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << "segment_id,vertex,x,y,nu_x,nu_y,u_plus,u_minus,predicted_plus,relative_error,unconstrained\n"
        << std::setprecision(17);
    for (const JumpMeasurement& m : survey.measurements) {
        out << m.segment << ',' << m.vertex << ',' << m.point.x << ',' << m.point.y << ',' << m.nu.x << ','
            << m.nu.y << ',' << m.u_plus << ',' << m.u_minus << ',' << m.predicted_plus << ',' << m.relative_error
            << ',' << (m.unconstrained ? 1 : 0) << '\n';
    }
}

}  // namespace bellman2d
