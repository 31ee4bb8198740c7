#include "bellman2d/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "bellman2d/errors.hpp"
#include "bellman2d/expression.hpp"
#include "bellman2d/twophase.hpp"

namespace bellman2d {

using nlohmann::json;

bool BoundarySpec::operator==(const BoundarySpec& o) const {
    if (kind != o.kind || b != o.b || expr != o.expr || terms.size() != o.terms.size()) return false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        if (terms[k].coef != o.terms[k].coef || terms[k].px != o.terms[k].px || terms[k].py != o.terms[k].py) {
            return false;
        }
    }
    return true;
}

namespace {

constexpr int kSchemaVersion = 1;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

SymMatrix2 matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(where + " must be [a11, a12, a22]");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

json matrix_to_json(const SymMatrix2& A) { return json::array({A.a11, A.a12, A.a22}); }

std::string kind_of(const ExperimentConfig& c) { return c.boundary.kind; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json point_json(Point p) { return json::array({p.x, p.y}); }

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"m", "rotation_deg", "A1", "A2", "n", "half_width", "boundary", "tol", "max_policy_updates", "eps",
                    "analysis", "n_list", "output_dir"},
                   "config");
    ExperimentConfig c;
    c.m.reset();
    if (j.contains("m")) c.m = get<double>(j, "m", "config");
    if (j.contains("rotation_deg")) c.rotation_deg = get<double>(j, "rotation_deg", "config");
    if (j.contains("A1")) c.A1 = matrix_from_json(j.at("A1"), "config.A1");
    if (j.contains("A2")) c.A2 = matrix_from_json(j.at("A2"), "config.A2");
    if (!j.contains("m") && !j.contains("A1") && !j.contains("A2")) c.m = 2.0;
    if (j.contains("n")) c.n = get<int>(j, "n", "config");
    if (j.contains("half_width")) c.half_width = get<double>(j, "half_width", "config");
    if (j.contains("tol")) c.tol = get<double>(j, "tol", "config");
    if (j.contains("max_policy_updates")) c.max_policy_updates = get<int>(j, "max_policy_updates", "config");
    if (j.contains("eps") && !j.at("eps").is_null()) c.eps = get<double>(j, "eps", "config");
    if (j.contains("n_list")) c.n_list = get<std::vector<int>>(j, "n_list", "config");
    if (j.contains("output_dir")) c.output_dir = get<std::string>(j, "output_dir", "config");
    if (j.contains("boundary")) {
        const json& b = j.at("boundary");
        if (!b.is_object() || !b.contains("kind")) throw ValidationError("config.boundary needs a kind");
        c.boundary.kind = get<std::string>(b, "kind", "config.boundary");
        const std::string& kind = c.boundary.kind;
        if (kind == "manufactured_cubic") {
            reject_unknown(b, {"kind", "b"}, "config.boundary");
            if (b.contains("b")) c.boundary.b = get<double>(b, "b", "config.boundary");
        } else if (kind == "quadratic_saddle" || kind == "bilinear") {
            reject_unknown(b, {"kind"}, "config.boundary");
        } else if (kind == "expression") {
            reject_unknown(b, {"kind", "expr"}, "config.boundary");
            c.boundary.expr = get<std::string>(b, "expr", "config.boundary");
        } else if (kind == "polynomial") {
            reject_unknown(b, {"kind", "terms"}, "config.boundary");
            for (const json& t : b.at("terms")) {
                if (!t.is_array() || t.size() != 3) throw ValidationError("polynomial terms are [coef, px, py]");
                c.boundary.terms.push_back({t[0].get<double>(), t[1].get<int>(), t[2].get<int>()});
            }
        } else {
            throw ValidationError("unknown boundary kind '" + kind + "'");
        }
    }
    if (j.contains("analysis")) {
        const json& a = j.at("analysis");
        reject_unknown(a,
                       {"jump_survey", "blowup", "expansion_fit", "seminorms", "decay_check", "alpha_probe",
                        "blowup_vertices"},
                       "config.analysis");
        AnalysisSpec& s = c.analysis;
        if (a.contains("jump_survey")) s.jump_survey = get<bool>(a, "jump_survey", "config.analysis");
        if (a.contains("blowup")) s.blowup = get<bool>(a, "blowup", "config.analysis");
        if (a.contains("expansion_fit")) s.expansion_fit = get<bool>(a, "expansion_fit", "config.analysis");
        if (a.contains("seminorms")) s.seminorms = get<bool>(a, "seminorms", "config.analysis");
        if (a.contains("decay_check")) s.decay_check = get<bool>(a, "decay_check", "config.analysis");
        if (a.contains("alpha_probe")) s.alpha_probe = get<double>(a, "alpha_probe", "config.analysis");
        if (a.contains("blowup_vertices")) s.blowup_vertices = get<int>(a, "blowup_vertices", "config.analysis");
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    if (c.m) {
        j["m"] = *c.m;
        j["rotation_deg"] = c.rotation_deg;
    }
    if (c.A1) j["A1"] = matrix_to_json(*c.A1);
    if (c.A2) j["A2"] = matrix_to_json(*c.A2);
    j["n"] = c.n;
    j["half_width"] = c.half_width;
    json b;
    b["kind"] = c.boundary.kind;
    if (c.boundary.kind == "manufactured_cubic") b["b"] = c.boundary.b;
    if (c.boundary.kind == "expression") b["expr"] = c.boundary.expr;
    if (c.boundary.kind == "polynomial") {
        b["terms"] = json::array();
        for (const PolynomialTerm& t : c.boundary.terms) b["terms"].push_back(json::array({t.coef, t.px, t.py}));
    }
    j["boundary"] = b;
    j["tol"] = c.tol;
    j["max_policy_updates"] = c.max_policy_updates;
    if (c.eps) j["eps"] = *c.eps;
    const AnalysisSpec& a = c.analysis;
    j["analysis"] = {{"jump_survey", a.jump_survey},   {"blowup", a.blowup},
                     {"expansion_fit", a.expansion_fit}, {"seminorms", a.seminorms},
                     {"decay_check", a.decay_check},   {"alpha_probe", a.alpha_probe},
                     {"blowup_vertices", a.blowup_vertices}};
    if (!c.n_list.empty()) j["n_list"] = c.n_list;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
    if (c.m && (c.A1 || c.A2)) throw ValidationError("config: give either m or A1/A2, not both");
    if (!c.m && !(c.A1 && c.A2)) throw ValidationError("config: give m, or both A1 and A2");
    if (c.n % 2 == 0 || c.n < 17) throw ValidationError("config: n must be odd and >= 17");
    if (!(c.half_width > 0.0)) throw ValidationError("config: half_width must be positive");
    if (!(c.tol > 0.0)) throw ValidationError("config: tol must be positive");
    if (c.max_policy_updates < 1) throw ValidationError("config: max_policy_updates must be >= 1");
    if (c.eps) {
        if (!(*c.eps > 0.0)) throw ValidationError("config: eps must be positive");
        if (!c.m || c.rotation_deg != 0.0) throw ValidationError("config: eps needs an unrotated reduced problem");
    }
    if (!(c.analysis.alpha_probe > 0.0)) throw ValidationError("config: alpha_probe must be positive");
    if (c.analysis.blowup_vertices < 1) throw ValidationError("config: blowup_vertices must be >= 1");
    const BellmanProblem p = make_problem(c);
    if (!p.op1.monotone_admissible() || !p.op2.monotone_admissible()) {
        throw StencilMonotonicityError("config: operators are not diagonally dominant; the nine-point stencil is not monotone");
    }
    if (c.boundary.kind == "manufactured_cubic" && !c.m) {
        throw ValidationError("config: manufactured_cubic needs a reduced problem (m)");
    }
    if (c.boundary.kind == "expression") (void)Expression::parse(c.boundary.expr);
    for (int nn : c.n_list) {
        if (nn % 2 == 0 || nn < 17) throw ValidationError("config: every n_list entry must be odd and >= 17");
    }
}

BellmanProblem make_problem(const ExperimentConfig& c) {
    if (c.m) return BellmanProblem::reduced(*c.m, c.rotation_deg * std::numbers::pi / 180.0);
    if (!c.A1 || !c.A2) throw ValidationError("config: missing operator matrices");
    return BellmanProblem::general(*c.A1, *c.A2);
}

Grid2D make_grid(const ExperimentConfig& c) { return Grid2D::make({0.0, 0.0}, c.half_width, c.n); }

std::optional<ExactSolution> exact_solution(const ExperimentConfig& c) {
    const std::string kind = kind_of(c);
    if (kind == "manufactured_cubic") {
        return GluedCubic{c.m.value_or(2.0), c.boundary.b, c.rotation_deg * std::numbers::pi / 180.0};
    }
    if (kind == "quadratic_saddle" && c.m && c.rotation_deg == 0.0) return QuadraticSaddle{*c.m};
    if (kind == "bilinear") return Bilinear{};
    return std::nullopt;
}

std::function<double(Point)> boundary_function(const ExperimentConfig& c) {
    const std::string kind = kind_of(c);
    if (kind == "expression") {
        const Expression e = Expression::parse(c.boundary.expr);
        return [e](Point x) { return e(x.x, x.y); };
    }
    if (kind == "polynomial") {
        const ExactSolution poly = CustomPolynomial{c.boundary.terms};
        return [poly](Point x) { return exact_value(poly, x); };
    }
    if (kind == "quadratic_saddle") return [](Point x) { return x.y * x.y - x.x * x.x; };
    const std::optional<ExactSolution> sol = exact_solution(c);
    if (!sol) throw ValidationError("config: no boundary data for kind '" + kind + "'");
    return [s = *sol](Point x) { return exact_value(s, x); };
}

SolveRecord solve(const ExperimentConfig& c) {
    validate(c);
    const auto t0 = std::chrono::steady_clock::now();
    const BellmanProblem problem = make_problem(c);
    const Grid2D grid = make_grid(c);
    const ScalarField2D trace = sample(boundary_function(c), grid);
    SolveRecord rec{ScalarField2D::zeros(grid), ScalarField2D::zeros(grid), "", 0.0, 0, 0, 0.0};
    if (c.eps) {
        const SmoothedNonlinearity nl(*c.m, *c.eps);
        SmoothedSolveOptions opt;
        opt.tol = c.tol;
        const SmoothedSolveResult r = solve_smoothed(nl, trace, opt);
        rec.v = r.v;
        rec.solver = "smoothed";
        rec.residual_max = r.residual_max;
        rec.linear_iterations = r.sweeps;
    } else {
        PolicyIterationOptions opt;
        opt.tol = c.tol;
        opt.max_policy_updates = c.max_policy_updates;
        const SolveOutcome r = solve_policy_iteration(problem, trace, opt);
        rec.v = r.v;
        rec.solver = "policy_iteration";
        rec.residual_max = r.residual_max;
        rec.policy_updates = r.policy_updates;
        rec.linear_iterations = r.linear_iterations;
    }
    // Which operator attains the minimum, from the final field.
    const ScalarField2D l1 = apply_operator(problem.op1, rec.v);
    const ScalarField2D l2 = apply_operator(problem.op2, rec.v);
    std::vector<double> choice(grid.size(), 0.0);
    for (int j = 1; j + 1 < grid.n(); ++j)
        for (int i = 1; i + 1 < grid.n(); ++i) choice[grid.index(i, j)] = l2(i, j) < l1(i, j) ? 2.0 : 1.0;
    rec.policy = ScalarField2D(grid, std::move(choice), 1);
    rec.wall_seconds = seconds_since(t0);
    return rec;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

json solve_meta(const ExperimentConfig& c, const SolveRecord& rec) {
    return {{"schema_version", kSchemaVersion},
            {"solver", rec.solver},
            {"n", c.n},
            {"h", make_grid(c).h()},
            {"residual_max", rec.residual_max},
            {"policy_updates", rec.policy_updates},
            {"linear_iterations", rec.linear_iterations},
            {"wall_seconds", rec.wall_seconds}};
}

json blowup_json(const BlowupClassification& b) {
    json fits = json::array();
    for (const BlowupFit& f : b.fits) {
        fits.push_back({{"r", f.r}, {"a", f.a}, {"b", f.b}, {"nu", point_json(f.nu)}, {"residual", f.residual},
                        {"negative_max", f.negative_max}});
    }
    return {{"x0", point_json(b.x0)},
            {"verdict", to_string(b.verdict)},
            {"a", b.plane.a},
            {"b", b.plane.b},
            {"nu", point_json(b.plane.nu)},
            {"flux_mismatch", b.flux_mismatch},
            {"residual_decreasing_in_r", residual_decreasing_in_r(b)},
            {"fits", fits}};
}

json expansion_json(const ExpansionFit& e) {
    return {{"x0", point_json(e.x0)},       {"nu", point_json(e.nu)},
            {"Q", e.Q},                      {"gamma", e.gamma},
            {"radii", e.radii},              {"remainder_norms", e.remainder_norms},
            {"alpha_est", e.alpha_est},      {"L1Q_at_x0", e.L1Q},
            {"L2Q_at_x0", e.L2Q},            {"fit_nodes", e.fit_nodes}};
}

json decay_json(const DecayResult& d) {
    return {{"radii", d.radii},     {"sup_diff", d.sup_diff}, {"ratio", d.ratio},
            {"alpha_probe", d.alpha_probe}, {"scale", d.scale},       {"C0", d.C0},
            {"bounded", d.bounded}, {"trend_exponent", d.trend_exponent}};
}

void write_decay_csv(const std::string& path, const std::optional<DecayResult>& d) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << "r,sup_diff,ratio\n" << std::setprecision(17);
    if (!d) return;
    for (std::size_t k = 0; k < d->radii.size(); ++k) {
        out << d->radii[k] << ',' << d->sup_diff[k] << ',' << d->ratio[k] << '\n';
    }
}

// Vertex indices (segment, vertex) inside the analysis square, in polyline order.
std::vector<std::pair<int, int>> inner_vertices(const FreeBoundary& fb, Point centre, double within) {
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s < static_cast<int>(fb.segments.size()); ++s) {
        const Polyline& line = fb.segments[s];
        for (int k = 0; k < static_cast<int>(line.vertices.size()); ++k) {
            const Point x = line.vertices[k];
            if (std::max(std::abs(x.x - centre.x), std::abs(x.y - centre.y)) <= within) out.emplace_back(s, k);
        }
    }
    return out;
}

template <class E>
[[noreturn]] void rethrow_staged(const std::string& stage, const E& e) {
    throw E(stage + ": " + e.what());
}

}  // namespace

void write_solve_outputs(const std::string& dir, const ExperimentConfig& c, const SolveRecord& rec) {
    ensure_dir(dir);
    write_field_csv(join(dir, "v.csv"), rec.v);
    write_field_csv(join(dir, "u.csv"), phase_field(make_problem(c), rec.v));
    write_field_csv(join(dir, "policy.csv"), rec.policy);
    write_json(join(dir, "solve_meta.json"), solve_meta(c, rec));
}

json run(const ExperimentConfig& c, const std::string& dir) {
    ensure_dir(dir);
    json report;
    report["schema_version"] = kSchemaVersion;
    report["config"] = config_to_json(c);
    json timings = json::object();
    json regularity;
    std::string stage = "config";
    auto flush_failure = [&](const std::string& what) {
        report["failed_stage"] = stage;
        report["error"] = what;
        write_json(join(dir, "report.json"), report);
        write_json(join(dir, "timings.json"), timings);
    };
    try {
        validate(c);
        const BellmanProblem problem = make_problem(c);
        const FluxLaw law = FluxLaw::for_problem(problem);

        stage = "solve";
        auto t0 = std::chrono::steady_clock::now();
        const SolveRecord rec = solve(c);
        timings["solve"] = seconds_since(t0);
        const Grid2D& grid = rec.v.grid();
        const double h = grid.h();
        json sj = {{"solver", rec.solver},
                   {"n", c.n},
                   {"h", h},
                   {"residual_max", rec.residual_max},
                   {"policy_updates", rec.policy_updates},
                   {"linear_iterations", rec.linear_iterations}};
        if (const auto sol = exact_solution(c)) {
            const ScalarField2D exact = sample([&](Point x) { return exact_value(*sol, x); }, grid);
            sj["max_error_vs_exact"] = (rec.v - exact).max_abs();
        }
        report["solve"] = sj;
        const ScalarField2D u = phase_field(problem, rec.v);
        write_field_csv(join(dir, "v.csv"), rec.v);
        write_field_csv(join(dir, "u.csv"), u);

        stage = "free_boundary";
        t0 = std::chrono::steady_clock::now();
        const double band_tol = 10.0 * rec.residual_max;
        const FreeBoundary fb = extract_gamma(u, band_tol);
        write_gamma_csv(join(dir, "gamma.csv"), fb);
        timings["free_boundary"] = seconds_since(t0);
        report["free_boundary"] = {{"one_phase", fb.one_phase},
                                   {"band_tol", band_tol},
                                   {"segments", fb.segments.size()},
                                   {"vertices", fb.vertex_count()},
                                   {"degenerate_cells", fb.degenerate_cells.size()}};
        const Point centre = grid.center();
        const double within = 0.5 * c.half_width;
        const std::vector<std::pair<int, int>> inner = inner_vertices(fb, centre, within);
        regularity["grid"] = {{"n", c.n}, {"h", h}, {"half_width", c.half_width}, {"analysis_half_width", within}};

        if (c.analysis.seminorms) {
            stage = "seminorms";
            t0 = std::chrono::steady_clock::now();
            const SeminormReport s{lipschitz_seminorm(u, within), c21_seminorm(rec.v, within), h};
            report["seminorms"] = {{"lipschitz_u", s.lipschitz_u}, {"c21_v", s.c21_v}, {"grid_h", s.grid_h},
                                   {"radius", within}};
            regularity["seminorms"] = report["seminorms"];
            timings["seminorms"] = seconds_since(t0);
        }

        JumpSurvey survey;
        if (c.analysis.jump_survey) {
            stage = "jump_survey";
            t0 = std::chrono::steady_clock::now();
            if (fb.empty()) {
                report["jump_survey"] = {{"status", "empty_gamma"}, {"measured", 0}, {"skipped", 0}};
            } else {
                SurveyOptions opt;
                opt.within = within;
                survey = jump_condition_survey(u, fb, law, opt);
                report["jump_survey"] = {{"status", "measured"},
                                         {"measured", survey.measurements.size()},
                                         {"skipped", survey.skipped},
                                         {"unconstrained", survey.unconstrained},
                                         {"median_relative_error", survey.median_relative_error},
                                         {"p90_relative_error", survey.p90_relative_error}};
            }
            write_jump_survey_csv(join(dir, "jump_survey.csv"), survey);
            timings["jump_survey"] = seconds_since(t0);
        }

        // Blow-up centres sit within an eighth of the width of the centre, so
        // balls of radius half_width / 2 keep clear of the boundary layer.
        const std::vector<double> radii = dyadic_radii(0.5 * c.half_width, h);
        const std::vector<std::pair<int, int>> core = inner_vertices(fb, centre, 0.125 * c.half_width);
        std::vector<BlowupClassification> blowups;
        // Analysis vertex closest to the centre.
        std::optional<std::pair<int, int>> central;
        for (const auto& sv : core) {
            const Point x = fb.segments[sv.first].vertices[sv.second];
            if (!central || norm(x - centre) < norm(fb.segments[central->first].vertices[central->second] - centre)) {
                central = sv;
            }
        }

        if (c.analysis.blowup || c.analysis.decay_check) {
            stage = "blowup";
            t0 = std::chrono::steady_clock::now();
            std::vector<std::pair<int, int>> picks;
            if (c.analysis.blowup) {
                const int want = std::min<int>(c.analysis.blowup_vertices, static_cast<int>(core.size()));
                for (int k = 0; k < want; ++k) picks.push_back(core[(k * core.size()) / want + core.size() / (2 * want)]);
            } else if (central) {
                picks.push_back(*central);
            }
            for (const auto& [s, k] : picks) {
                blowups.push_back(blowup_classify(u, fb.segments[s].vertices[k], law, radii));
            }
            if (c.analysis.blowup) {
                json list = json::array();
                int two = 0, one = 0, unres = 0;
                for (const BlowupClassification& b : blowups) {
                    list.push_back(blowup_json(b));
                    if (b.verdict == BlowupVerdict::TwoPlane) ++two;
                    if (b.verdict == BlowupVerdict::OnePhase) ++one;
                    if (b.verdict == BlowupVerdict::Unresolved) ++unres;
                }
                report["blowup"] = {{"status", fb.empty() ? "empty_gamma" : "classified"},
                                    {"one_phase_field", fb.one_phase},
                                    {"two_plane", two},
                                    {"one_phase", one},
                                    {"unresolved", unres},
                                    {"radii", radii}};
                regularity["blowup"] = list;
            }
            timings["blowup"] = seconds_since(t0);
        }

        std::optional<DecayResult> central_decay;
        if (c.analysis.decay_check) {
            stage = "decay_check";
            t0 = std::chrono::steady_clock::now();
            json list = json::array();
            int bounded = 0;
            for (const BlowupClassification& b : blowups) {
                const DecayResult d = dyadic_decay_check(u, b.x0, b.plane, radii, c.analysis.alpha_probe);
                if (d.bounded) ++bounded;
                if (central && norm(b.x0 - fb.segments[central->first].vertices[central->second]) == 0.0) {
                    central_decay = d;
                }
                list.push_back(decay_json(d));
            }
            if (!central_decay && !blowups.empty()) {
                central_decay = dyadic_decay_check(u, blowups.front().x0, blowups.front().plane, radii,
                                                   c.analysis.alpha_probe);
            }
            report["decay_check"] = {{"alpha_probe", c.analysis.alpha_probe},
                                     {"checked", list.size()},
                                     {"bounded", bounded},
                                     {"radii", radii}};
            regularity["decay_check"] = list;
            write_decay_csv(join(dir, "decay_table.csv"), central_decay);
            timings["decay_check"] = seconds_since(t0);
        }

        if (c.analysis.expansion_fit) {
            stage = "expansion_fit";
            t0 = std::chrono::steady_clock::now();
            if (central) {
                const Point x0 = fb.segments[central->first].vertices[central->second];
                const Point nu = fb.segments[central->first].normals[central->second];
                const ExpansionFit e = fit_cubic_expansion(rec.v, x0, nu, radii, problem);
                report["expansion_fit"] = {{"status", "fitted"},
                                           {"gamma", e.gamma},
                                           {"alpha_est", e.alpha_est},
                                           {"remainder_at_smallest_radius", e.remainder_norms.back()}};
                regularity["expansion_fit"] = expansion_json(e);
            } else {
                report["expansion_fit"] = {{"status", "empty_gamma"}};
            }
            timings["expansion_fit"] = seconds_since(t0);
        }

        stage = "write";
        write_json(join(dir, "regularity_report.json"), regularity);
        write_json(join(dir, "report.json"), report);
        write_json(join(dir, "timings.json"), timings);
    } catch (const StencilMonotonicityError& e) {
        flush_failure(e.what());
        rethrow_staged(stage, e);
    } catch (const ValidationError& e) {
        flush_failure(e.what());
        rethrow_staged(stage, e);
    } catch (const NumericalError& e) {
        flush_failure(e.what());
        rethrow_staged(stage, e);
    }
    return report;
}

std::vector<ConvergenceRow> convergence_study(const ExperimentConfig& base, const std::vector<int>& n_list,
                                              const std::string& dir) {
    validate(base);
    if (n_list.size() < 3) throw ValidationError("convergence_study needs at least 3 grid sizes");
    for (std::size_t k = 0; k < n_list.size(); ++k) {
        if (n_list[k] % 2 == 0 || n_list[k] < 17) throw ValidationError("convergence_study: n must be odd and >= 17");
        if (k > 0 && n_list[k] <= n_list[k - 1]) throw ValidationError("convergence_study: n_list must increase");
    }
    const std::optional<ExactSolution> sol = exact_solution(base);
    if (!sol) throw ValidationError("convergence_study needs manufactured boundary data");
    const BellmanProblem problem = make_problem(base);
    const FluxLaw law = FluxLaw::for_problem(problem);

    std::vector<ConvergenceRow> rows;
    for (int n : n_list) {
        ExperimentConfig c = base;
        c.n = n;
        const SolveRecord rec = solve(c);
        const Grid2D& grid = rec.v.grid();
        ConvergenceRow row;
        row.n = n;
        row.h = grid.h();
        row.max_error = (rec.v - sample([&](Point x) { return exact_value(*sol, x); }, grid)).max_abs();
        row.exact = row.max_error <= 100.0 * base.tol;
        if (std::holds_alternative<GluedCubic>(*sol)) {
            const ScalarField2D u = phase_field(problem, rec.v);
            const FreeBoundary fb = extract_gamma(u, 10.0 * rec.residual_max);
            if (!fb.empty()) {
                SurveyOptions opt;
                opt.within = 0.5 * c.half_width;
                row.jump_error = jump_condition_survey(u, fb, law, opt).median_relative_error;
            }
        }
        rows.push_back(row);
    }
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double scale = std::log(rows[k - 1].h / rows[k].h);
        if (!rows[k].exact && !rows[k - 1].exact && rows[k].max_error > 0.0) {
            rows[k].order = std::log(rows[k - 1].max_error / rows[k].max_error) / scale;
        }
        if (rows[k].jump_error && rows[k - 1].jump_error && *rows[k].jump_error > 0.0 &&
            *rows[k - 1].jump_error > 0.0) {
            rows[k].jump_order = std::log(*rows[k - 1].jump_error / *rows[k].jump_error) / scale;
        }
    }
    if (!dir.empty()) {
        ensure_dir(dir);
        std::ofstream out(join(dir, "convergence.csv"));
        if (!out) throw ValidationError("cannot write convergence.csv");
        out << "n,h,max_error,order,jump_median_error,jump_order,flag\n" << std::setprecision(17);
        auto opt = [&](const std::optional<double>& v) {
            if (v) out << *v;
        };
        for (const ConvergenceRow& r : rows) {
            out << r.n << ',' << r.h << ',' << r.max_error << ',';
            opt(r.order);
            out << ',';
            opt(r.jump_error);
            out << ',';
            opt(r.jump_order);
            out << ',' << (r.exact ? "exact" : "") << '\n';
        }
    }
    return rows;
}

CustomPolynomial random_polynomial(std::uint64_t seed, int degree) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    CustomPolynomial p;
    for (int total = 0; total <= degree; ++total) {
        for (int px = total; px >= 0; --px) p.terms.push_back({coef(rng), px, total - px});
    }
    return p;
}

json verify_comparisons(std::uint64_t seed, int trials, const std::string& dir) {
    if (trials < 1) throw ValidationError("verify_comparisons needs at least one trial");
    json report;
    report["schema_version"] = kSchemaVersion;
    report["seed"] = seed;
    const double m = 2.0;
    const BellmanProblem problem = BellmanProblem::reduced(m);
    const FluxLaw law = FluxLaw::for_problem(problem);
    const Grid2D grid = Grid2D::make({0.0, 0.0}, 1.0, 129);
    const Window window = Window::centered(grid, {0.0, 0.0}, 0.25);

    const double C = parabolic_constant(problem.lambda(), problem.Lambda());
    const SubsolutionReport phi = subsolution_check(PhiParabolic{C}, problem, law, window);
    const SubsolutionReport phi0 = subsolution_check(PhiParabolic{0.0}, problem, law, window);
    const SubsolutionReport psi = subsolution_check(PsiTwoPhase{C, 1.0, law.omega(1.0)}, problem, law, window);
    report["phi_parabolic"] = {{"C", C},
                               {"passed", phi.passed},
                               {"operator_margin", phi.operator_margin},
                               {"C0_passed", phi0.passed},
                               {"C0_operator_margin", phi0.operator_margin}};
    report["psi_two_phase"] = {{"passed", psi.passed},
                               {"operator_margin", psi.operator_margin},
                               {"slope_margin", psi.slope_margin.value_or(0.0)},
                               {"crossings", psi.crossings_checked}};

    json ratios = json::array();
    for (double angle_deg : {0.0, 30.0, 60.0, 90.0}) {
        const double a = angle_deg * std::numbers::pi / 180.0;
        const Point nu{std::sin(a), std::cos(a)};
        const GProfile g = g_profile_solve(m, nu.y * nu.y, 0.0, 1e-4, {-1.0, 1.0});
        const double ratio = g_profile_slope(g, 0.01) / g_profile_slope(g, -0.01 - g.step);
        const double predicted = nu.x * nu.x + m * nu.y * nu.y;
        ratios.push_back({{"nu", point_json(nu)},
                          {"measured", ratio},
                          {"predicted", predicted},
                          {"relative_error", std::abs(ratio - predicted) / predicted}});
    }
    report["g_profile_slope_ratio"] = ratios;

    {
        const double delta = 0.1;
        const double eps = 0.2;
        const Point nu{0.0, 1.0};
        const GProfile g = g_profile_solve(m, 1.0, delta, eps, {-1.0, 1.0});
        double min_g2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k + 1 < g.g.size(); ++k) {
            min_g2 = std::min(min_g2, (g.g[k + 1] - 2.0 * g.g[k] + g.g[k - 1]) / (g.step * g.step));
        }
        const SubsolutionReport conv =
            subsolution_check(GProfileComparison{g, nu}, problem, law, window);
        report["g_profile_convexity"] = {{"delta", delta},
                                         {"eps", eps},
                                         {"min_second_difference", min_g2},
                                         {"operator_margin", conv.operator_margin},
                                         {"passed", min_g2 > 0.0 && conv.operator_margin > 0.0}};
    }

    // Maximum principle: solved phase fields against random dominating two-planes.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Grid2D mgrid = Grid2D::make({0.0, 0.0}, 1.0, 65);
    std::vector<std::pair<ScalarField2D, double>> fields;
    for (int k = 0; k < 4; ++k) {
        const CustomPolynomial poly = random_polynomial(seed + 1000 + static_cast<std::uint64_t>(k));
        const ScalarField2D trace = sample([&](Point x) { return exact_value(poly, x); }, mgrid);
        const SolveOutcome r = solve_policy_iteration(problem, trace);
        fields.emplace_back(phase_field(problem, r.v), r.residual_max);
    }
    int violations = 0;
    int dominated = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        const auto& [u, res] = fields[static_cast<std::size_t>(t) % fields.size()];
        const double angle = 2.0 * std::numbers::pi * unit(rng);
        const Point nu{std::cos(angle), std::sin(angle)};
        const double b = 0.25 + 2.0 * unit(rng);
        const int side = 8 + static_cast<int>(unit(rng) * 16);
        const int i0 = 1 + static_cast<int>(unit(rng) * (mgrid.n() - 3 - side));
        const int j0 = 1 + static_cast<int>(unit(rng) * (mgrid.n() - 3 - side));
        const Window region{mgrid, i0, i0 + side, j0, j0 + side};
        // Slide the plane along nu until it dominates u on the region's edge.
        TwoPlaneSolution p = make_two_plane(law, mgrid.node(i0 + side / 2, j0 + side / 2), nu, b);
        double shift = -std::numeric_limits<double>::infinity();
        for (int j = region.j0; j <= region.j1; ++j) {
            for (int i = region.i0; i <= region.i1; ++i) {
                if (!region.on_edge(i, j)) continue;
                const Point x = mgrid.node(i, j);
                const double value = u(i, j);
                const double s = dot(x - p.x0, nu);
                // Smallest s' with plane(s') >= value, then the required shift s' - s.
                const double need = value >= 0.0 ? value / p.a : value / p.b;
                shift = std::max(shift, need - s);
            }
        }
        // A relative nudge past the binding node so round-off cannot undo the domination.
        shift += 1e-12 * (1.0 + std::abs(shift));
        p.x0 = p.x0 - nu * shift;
        const MaximumPrincipleReport mp =
            maximum_principle_check(u, p, region, comparison_tolerance(res, mgrid.h()));
        if (mp.boundary_dominated) ++dominated;
        if (!mp.holds) ++violations;
        worst = std::max(worst, mp.max_violation);
    }
    report["maximum_principle"] = {{"trials", trials},
                                   {"boundary_dominated", dominated},
                                   {"violations", violations},
                                   {"max_violation", worst}};
    if (!dir.empty()) {
        ensure_dir(dir);
        write_json(join(dir, "comparison_report.json"), report);
    }
    return report;
}

}  // namespace bellman2d
