#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bellman2d/freeboundary.hpp"
#include "bellman2d/manufactured.hpp"
#include "bellman2d/operators.hpp"
#include "bellman2d/regularity.hpp"
#include "bellman2d/solver.hpp"

namespace bellman2d {

struct BoundarySpec {
    // manufactured_cubic | quadratic_saddle | bilinear | expression | polynomial
    std::string kind = "manufactured_cubic";
    double b = 1.0;
    std::string expr;
    std::vector<PolynomialTerm> terms;

    bool operator==(const BoundarySpec& o) const;
};

struct AnalysisSpec {
    bool jump_survey = true;
    bool blowup = true;
    bool expansion_fit = true;
    bool seminorms = true;
    bool decay_check = true;
    double alpha_probe = 0.5;
    int blowup_vertices = 10;

    bool operator==(const AnalysisSpec&) const = default;
};

struct ExperimentConfig {
    std::optional<double> m = 2.0;
    double rotation_deg = 0.0;
    std::optional<SymMatrix2> A1;
    std::optional<SymMatrix2> A2;
    int n = 129;
    double half_width = 1.0;
    BoundarySpec boundary;
    double tol = 1e-9;
    int max_policy_updates = 50;
    // Smoothing width; when set the smoothed solver replaces policy iteration.
    std::optional<double> eps;
    AnalysisSpec analysis;
    std::vector<int> n_list;
    std::string output_dir = "run";

    bool operator==(const ExperimentConfig&) const = default;
};

// Unknown keys raise ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);
// Checks everything that can be checked before any compute.
void validate(const ExperimentConfig& c);

BellmanProblem make_problem(const ExperimentConfig& c);
Grid2D make_grid(const ExperimentConfig& c);
// The boundary data as a function of position.
std::function<double(Point)> boundary_function(const ExperimentConfig& c);
// Closed-form solution when the boundary data is one (manufactured_cubic, quadratic_saddle, bilinear).
std::optional<ExactSolution> exact_solution(const ExperimentConfig& c);

struct SolveRecord {
    ScalarField2D v;
    // 1 or 2 on interior nodes: the operator attaining the minimum.
    ScalarField2D policy;
    std::string solver;
    double residual_max = 0.0;
    int policy_updates = 0;
    int linear_iterations = 0;
    double wall_seconds = 0.0;
};

SolveRecord solve(const ExperimentConfig& c);
// v.csv, u.csv, policy.csv, solve_meta.json
void write_solve_outputs(const std::string& dir, const ExperimentConfig& c, const SolveRecord& rec);

/**
 * Solve followed by every enabled analysis. Writes v.csv, u.csv, gamma.csv,
 * jump_survey.csv, decay_table.csv, regularity_report.json, report.json
 * (deterministic) and timings.json into `dir`. A failing stage still writes
 * report.json with `failed_stage` and rethrows with the stage named.
 */
nlohmann::json run(const ExperimentConfig& c, const std::string& dir);

struct ConvergenceRow {
    int n = 0;
    double h = 0.0;
    double max_error = 0.0;
    std::optional<double> order;
    std::optional<double> jump_error;
    std::optional<double> jump_order;
    bool exact = false;
};

// Needs >= 3 increasing odd n and manufactured boundary data; writes convergence.csv when dir is non-empty.
std::vector<ConvergenceRow> convergence_study(const ExperimentConfig& base, const std::vector<int>& n_list,
                                              const std::string& dir);

// Comparison-function and maximum-principle suites; writes comparison_report.json when dir is non-empty.
nlohmann::json verify_comparisons(std::uint64_t seed, int trials, const std::string& dir);

// Random polynomial boundary data of total degree <= 4, coefficients uniform in [-1, 1].
CustomPolynomial random_polynomial(std::uint64_t seed, int degree = 4);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace bellman2d
