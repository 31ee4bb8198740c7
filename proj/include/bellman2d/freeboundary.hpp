#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bellman2d/grid.hpp"
#include "bellman2d/twophase.hpp"

namespace bellman2d {

/// Grid edge carrying a contour vertex: from node (i, j) to (i+1, j) or (i, j+1).
struct EdgeId {
    int i = 0;
    int j = 0;
    bool vertical = false;
    bool operator==(const EdgeId&) const = default;
};

struct Polyline {
    std::vector<Point> vertices;
    // Unit normals pointing into {u > 0}.
    std::vector<Point> normals;
    std::vector<EdgeId> edges;
    bool closed = false;
};

/**
 * Zero contour of a phase field. The positive phase lies to the left of
 * each polyline's direction of travel.
 */
struct FreeBoundary {
    std::vector<Polyline> segments;
    bool one_phase = false;
    // Lower-left node of every cell skipped because all corners were below band_tol.
    std::vector<std::pair<int, int>> degenerate_cells;

    bool empty() const { return segments.empty(); }
    std::size_t vertex_count() const;
};

/**
 * Marching squares on the zero set of u with linear interpolation along cell
 * edges. A node counts as positive when u > 0. Ambiguous saddle cells are
 * resolved by the average of the four corners. Cells whose corners all have
 * |u| < band_tol are flagged degenerate and not contoured. Normals come from
 * normal_estimate.
 */
FreeBoundary extract_gamma(const ScalarField2D& u, double band_tol);

// Averaged bilinear cell gradients of the (one or two) cells sharing the
// vertex's edge, then re-taken from whole cells about 2h off the contour on
// either side. The polyline's left normal when the first gradient is below band_tol.
Point normal_estimate(const FreeBoundary& fb, const ScalarField2D& u, int segment, int vertex, double band_tol = 0.0);

enum class Side { Plus, Minus };

/**
 * Inward slope of |u| along point + t (+-nu), fitted by least squares over
 * t = 2h, ..., 8h. Only samples with the side's sign (u >= 0 on the plus side,
 * u <= 0 on the minus side) inside the defined region are used; fewer than 4
 * raise ValidationError. The slope is clamped at 0.
 */
double one_sided_derivative(const ScalarField2D& u, Point point, Point nu, Side side);

struct JumpMeasurement {
    int segment = 0;
    int vertex = 0;
    Point point;
    Point nu;
    double u_plus = 0.0;
    double u_minus = 0.0;
    double predicted_plus = 0.0;
    double relative_error = 0.0;
    // u_minus below the noise floor: the flux law does not constrain this point.
    bool unconstrained = false;
};

struct SurveyOptions {
    double noise_floor = 1e-6;
    double relative_floor = 1e-12;
    // Only vertices with max-norm distance <= within from the grid center, when set.
    std::optional<double> within;
};

struct JumpSurvey {
    std::vector<JumpMeasurement> measurements;
    int skipped = 0;
    int unconstrained = 0;
    // Over constrained measurements.
    double median_relative_error = 0.0;
    double p90_relative_error = 0.0;
};

// Throws ValidationError for an empty free boundary or when every vertex is skipped.
JumpSurvey jump_condition_survey(const ScalarField2D& u, const FreeBoundary& fb, const FluxLaw& law,
                                 const SurveyOptions& options = {});

double quantile(std::vector<double> values, double q);

// segment_id,x,y,nu_x,nu_y
void write_gamma_csv(const std::string& path, const FreeBoundary& fb);
void write_jump_survey_csv(const std::string& path, const JumpSurvey& survey);

}  // namespace bellman2d
