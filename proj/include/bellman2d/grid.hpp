#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bellman2d {

struct Point {
    double x = 0.0;
    double y = 0.0;

    Point operator+(Point o) const { return {x + o.x, y + o.y}; }
    Point operator-(Point o) const { return {x - o.x, y - o.y}; }
    Point operator*(double t) const { return {t * x, t * y}; }
    bool operator==(const Point&) const = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
// Counter-clockwise quarter turn.
inline Point perp(Point a) { return {-a.y, a.x}; }

/**
 * Uniform node lattice over the square [center - half_width, center + half_width]^2.
 *
 * Nodes are indexed (i, j) with i along e1 and j along e2. The node count per side
 * is odd, so the center is always node ((n-1)/2, (n-1)/2).
 */
class Grid2D {
public:
    // Rejects even n, n < 17, and non-positive half-widths.
    static Grid2D make(Point center, double half_width, int n);

    Point center() const { return center_; }
    double half_width() const { return half_width_; }
    int n() const { return n_; }
    double h() const { return h_; }
    int mid() const { return (n_ - 1) / 2; }
    std::size_t size() const { return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_); }

    Point node(int i, int j) const {
        return {center_.x + (i - mid()) * h_, center_.y + (j - mid()) * h_};
    }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
    }
    bool contains(Point p, double slack = 0.0) const;

    bool operator==(const Grid2D&) const = default;

private:
    Grid2D(Point center, double half_width, int n)
        : center_(center), half_width_(half_width), n_(n), h_(2.0 * half_width / (n - 1)) {}

    Point center_;
    double half_width_;
    int n_;
    double h_;
};

/**
 * Grid-sampled real function. Immutable once built.
 *
 * `margin` counts the outer node rings that carry no value (for example the
 * boundary ring of a second difference). Those nodes store 0 and report
 * defined() == false.
 */
class ScalarField2D {
public:
    ScalarField2D(Grid2D grid, std::vector<double> values, int margin = 0);

    static ScalarField2D zeros(const Grid2D& grid) {
        return ScalarField2D(grid, std::vector<double>(grid.size(), 0.0));
    }

    const Grid2D& grid() const { return grid_; }
    int margin() const { return margin_; }
    std::span<const double> values() const { return values_; }

    bool defined(int i, int j) const {
        const int n = grid_.n();
        return i >= margin_ && j >= margin_ && i < n - margin_ && j < n - margin_;
    }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }

    ScalarField2D operator+(const ScalarField2D& o) const;
    ScalarField2D operator-(const ScalarField2D& o) const;
    ScalarField2D scaled(double t) const;
    ScalarField2D pointwise_min(const ScalarField2D& o) const;
    ScalarField2D operator-() const { return scaled(-1.0); }

    // Max |value| over defined nodes at least `extra` rings inside the defined region.
    double max_abs(int extra = 0) const;

private:
    Grid2D grid_;
    std::vector<double> values_;
    int margin_;
};

ScalarField2D sample(const std::function<double(Point)>& f, const Grid2D& grid);

enum class Direction { E1, E2, DiagPlus, DiagMinus };

// Centered second difference along `dir`, divided by the squared step
// (h along the axes, h*sqrt(2) along the diagonals). The result has one
// more undefined ring than the input.
ScalarField2D second_difference(const ScalarField2D& f, Direction dir);

// Mixed derivative from the two diagonal differences: (D_diag+ - D_diag-) / 2.
ScalarField2D mixed_difference(const ScalarField2D& f);

// Centered first differences; one more undefined ring than the input.
ScalarField2D first_difference(const ScalarField2D& f, Direction dir);

// Bilinear interpolation from the enclosing cell. Throws ValidationError
// outside the grid square or when a cell corner is undefined.
double interpolate(const ScalarField2D& f, Point x);
// Same, but nullopt instead of throwing.
std::optional<double> try_interpolate(const ScalarField2D& f, Point x);

// CSV snapshot with header `x,y,value`, rows ordered j-major then i.
void write_field_csv(const std::string& path, const ScalarField2D& f);

}  // namespace bellman2d
