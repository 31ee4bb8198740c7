#include "bellman2d/grid.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>

#include "bellman2d/errors.hpp"

namespace bellman2d {

Grid2D Grid2D::make(Point center, double half_width, int n) {
    if (n < 17) {
        throw ValidationError("grid needs n >= 17 nodes per side, got " + std::to_string(n));
    }
    if (n % 2 == 0) {
        throw ValidationError("grid node count must be odd so the center is a node, got " +
                              std::to_string(n));
    }
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
        throw ValidationError("grid half_width must be positive and finite");
    }
    if (!std::isfinite(center.x) || !std::isfinite(center.y)) {
        throw ValidationError("grid center must be finite");
    }
    return Grid2D(center, half_width, n);
}

bool Grid2D::contains(Point p, double slack) const {
    const double tol = half_width_ * 1e-12 + slack;
    return std::abs(p.x - center_.x) <= half_width_ + tol && std::abs(p.y - center_.y) <= half_width_ + tol;
}

ScalarField2D::ScalarField2D(Grid2D grid, std::vector<double> values, int margin)
    : grid_(grid), values_(std::move(values)), margin_(margin) {
    if (values_.size() != grid_.size()) {
        throw ValidationError("field size does not match its grid");
    }
    if (margin_ < 0 || 2 * margin_ >= grid_.n()) {
        throw ValidationError("field margin leaves no defined nodes");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw NumericalError("non-finite value in scalar field");
        }
    }
}

namespace {

void require_same_grid(const ScalarField2D& a, const ScalarField2D& b) {
    if (!(a.grid() == b.grid())) {
        throw ValidationError("field algebra requires identical grids");
    }
}

template <typename Op>
ScalarField2D combine(const ScalarField2D& a, const ScalarField2D& b, Op op) {
    require_same_grid(a, b);
    const int margin = std::max(a.margin(), b.margin());
    const Grid2D& g = a.grid();
    std::vector<double> out(g.size(), 0.0);
    for (int j = margin; j < g.n() - margin; ++j) {
        for (int i = margin; i < g.n() - margin; ++i) {
            out[g.index(i, j)] = op(a(i, j), b(i, j));
        }
    }
    return ScalarField2D(g, std::move(out), margin);
}

}  // namespace

ScalarField2D ScalarField2D::operator+(const ScalarField2D& o) const {
    return combine(*this, o, [](double a, double b) { return a + b; });
}

ScalarField2D ScalarField2D::operator-(const ScalarField2D& o) const {
    return combine(*this, o, [](double a, double b) { return a - b; });
}

ScalarField2D ScalarField2D::pointwise_min(const ScalarField2D& o) const {
    return combine(*this, o, [](double a, double b) { return std::min(a, b); });
}

ScalarField2D ScalarField2D::scaled(double t) const {
    std::vector<double> out(values_);
    for (double& v : out) v *= t;
    return ScalarField2D(grid_, std::move(out), margin_);
}

double ScalarField2D::max_abs(int extra) const {
    const int m = margin_ + extra;
    double best = 0.0;
    for (int j = m; j < grid_.n() - m; ++j) {
        for (int i = m; i < grid_.n() - m; ++i) {
            best = std::max(best, std::abs((*this)(i, j)));
        }
    }
    return best;
}

ScalarField2D sample(const std::function<double(Point)>& f, const Grid2D& grid) {
    std::vector<double> out(grid.size());
    for (int j = 0; j < grid.n(); ++j) {
        for (int i = 0; i < grid.n(); ++i) {
            const double v = f(grid.node(i, j));
            if (!std::isfinite(v)) {
                throw ValidationError("sampled function is not finite at node (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
            out[grid.index(i, j)] = v;
        }
    }
    return ScalarField2D(grid, std::move(out));
}

namespace {

struct Offset {
    int di;
    int dj;
};

Offset offset_of(Direction dir) {
    switch (dir) {
        case Direction::E1: return {1, 0};
        case Direction::E2: return {0, 1};
        case Direction::DiagPlus: return {1, 1};
        case Direction::DiagMinus: return {-1, 1};
    }
    return {0, 0};
}

double step_of(Direction dir, double h) {
    return (dir == Direction::E1 || dir == Direction::E2) ? h : h * std::sqrt(2.0);
}

}  // namespace

ScalarField2D second_difference(const ScalarField2D& f, Direction dir) {
    const Grid2D& g = f.grid();
    const int margin = f.margin() + 1;
    if (g.n() - 2 * margin < 1) {
        throw ValidationError("grid too small for a second difference");
    }
    const auto [di, dj] = offset_of(dir);
    const double step = step_of(dir, g.h());
    // Diagonals: h*sqrt(2) squared is 2h^2 exactly; avoid the rounding of sqrt.
    const double inv = (di != 0 && dj != 0) ? 1.0 / (2.0 * g.h() * g.h()) : 1.0 / (step * step);
    std::vector<double> out(g.size(), 0.0);
    for (int j = margin; j < g.n() - margin; ++j) {
        for (int i = margin; i < g.n() - margin; ++i) {
            out[g.index(i, j)] = (f(i + di, j + dj) - 2.0 * f(i, j) + f(i - di, j - dj)) * inv;
        }
    }
    return ScalarField2D(g, std::move(out), margin);
}

ScalarField2D mixed_difference(const ScalarField2D& f) {
    return (second_difference(f, Direction::DiagPlus) - second_difference(f, Direction::DiagMinus)).scaled(0.5);
}

ScalarField2D first_difference(const ScalarField2D& f, Direction dir) {
    if (dir != Direction::E1 && dir != Direction::E2) {
        throw ValidationError("first differences are only taken along the axes");
    }
    const Grid2D& g = f.grid();
    const int margin = f.margin() + 1;
    const auto [di, dj] = offset_of(dir);
    const double inv = 1.0 / (2.0 * g.h());
    std::vector<double> out(g.size(), 0.0);
    for (int j = margin; j < g.n() - margin; ++j) {
        for (int i = margin; i < g.n() - margin; ++i) {
            out[g.index(i, j)] = (f(i + di, j + dj) - f(i - di, j - dj)) * inv;
        }
    }
    return ScalarField2D(g, std::move(out), margin);
}

std::optional<double> try_interpolate(const ScalarField2D& f, Point x) {
    const Grid2D& g = f.grid();
    if (!g.contains(x)) return std::nullopt;
    const Point lo = g.node(0, 0);
    const double fx = (x.x - lo.x) / g.h();
    const double fy = (x.y - lo.y) / g.h();
    const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.n() - 2);
    const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, g.n() - 2);
    if (!f.defined(i, j) || !f.defined(i + 1, j + 1)) return std::nullopt;
    const double tx = std::clamp(fx - i, 0.0, 1.0);
    const double ty = std::clamp(fy - j, 0.0, 1.0);
    return (1.0 - tx) * (1.0 - ty) * f(i, j) + tx * (1.0 - ty) * f(i + 1, j) + (1.0 - tx) * ty * f(i, j + 1) +
           tx * ty * f(i + 1, j + 1);
}

double interpolate(const ScalarField2D& f, Point x) {
    if (!f.grid().contains(x)) {
        throw ValidationError("interpolation point lies outside the grid square");
    }
    const std::optional<double> v = try_interpolate(f, x);
    if (!v) throw ValidationError("interpolation cell touches undefined nodes");
    return *v;
}

void write_field_csv(const std::string& path, const ScalarField2D& f) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot open " + path + " for writing");
    }
    out << "x,y,value\n" << std::setprecision(17);
    const Grid2D& g = f.grid();
    for (int j = 0; j < g.n(); ++j) {
        for (int i = 0; i < g.n(); ++i) {
            if (!f.defined(i, j)) continue;
            const Point p = g.node(i, j);
            out << p.x << ',' << p.y << ',' << f(i, j) << '\n';
        }
    }
}

}  // namespace bellman2d
