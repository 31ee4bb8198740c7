// Acceptance suite: one PASS/FAIL line per criterion. Oracle integrity (10)
// runs first and gates the rest. Exit status 0 iff every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "bellman2d/errors.hpp"
#include "bellman2d/experiment.hpp"

using namespace bellman2d;
using nlohmann::json;

namespace {

constexpr double kTol = 1e-9;
constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double deg(double d) { return d * std::numbers::pi / 180.0; }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

ScalarField2D trace_of(const ExactSolution& s, const Grid2D& g) {
    return sample([&](Point x) { return exact_value(s, x); }, g);
}

// Solved manufactured runs, keyed by (m, rotation in degrees, n).
struct Solved {
    BellmanProblem problem;
    FluxLaw law;
    SolveOutcome out;
    ScalarField2D u;
    FreeBoundary fb;
};

class Cache {
public:
    const Solved& glued(double m, double rot_deg, int n) {
        const auto key = std::make_tuple(m, rot_deg, n);
        auto it = runs_.find(key);
        if (it == runs_.end()) {
            const BellmanProblem p = BellmanProblem::reduced(m, deg(rot_deg));
            const Grid2D g = Grid2D::make({0, 0}, 1.0, n);
            SolveOutcome out = solve_policy_iteration(p, trace_of(GluedCubic{m, 1.0, deg(rot_deg)}, g));
            ScalarField2D u = phase_field(p, out.v);
            FreeBoundary fb = extract_gamma(u, 10.0 * out.residual_max);
            it = runs_.emplace(key, Solved{p, FluxLaw::for_problem(p), std::move(out), u, std::move(fb)}).first;
        }
        return it->second;
    }

private:
    std::map<std::tuple<double, double, int>, Solved> runs_;
};

const std::vector<std::pair<double, double>> kManufactured = {{1.5, 0}, {2, 0}, {4, 0}, {1.5, 15}, {2, 15}, {4, 15}};

// Ten vertices spread along the free boundary within `within` (max norm) of the centre.
std::vector<Point> spread_vertices(const FreeBoundary& fb, double within, int want) {
    std::vector<Point> all;
    for (const Polyline& line : fb.segments)
        for (Point x : line.vertices)
            if (std::max(std::abs(x.x), std::abs(x.y)) <= within) all.push_back(x);
    std::vector<Point> out;
    const int k = std::min<int>(want, static_cast<int>(all.size()));
    for (int i = 0; i < k; ++i) out.push_back(all[(i * all.size()) / k + all.size() / (2 * k)]);
    return out;
}

Outcome oracle_integrity() {
    double worst = 0.0;
    int count = 0;
    for (const CatalogEntry& e : manufactured_catalog()) {
        try {
            const OracleReport r = oracle_check(e.solution, e.problem);
            worst = std::max({worst, r.residual_max, r.value_defect, r.grad_defect, r.hess_defect});
            ++count;
        } catch (const NumericalError& err) {
            return {false, e.name + ": " + err.what()};
        }
    }
    return {worst <= 1e-12, std::to_string(count) + " entries, worst defect " + fmt("%.2e", worst)};
}

Outcome manufactured_convergence(const std::string& out) {
    ExperimentConfig c;
    c.m = 2.0;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<ConvergenceRow> rows = convergence_study(c, {65, 129, 257}, out + "/convergence");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = seconds <= 120.0;
    std::ostringstream s;
    for (const ConvergenceRow& r : rows) {
        s << "n=" << r.n << " err=" << fmt("%.2e", r.max_error);
        if (r.order) {
            s << " order=" << fmt("%.3f", *r.order);
            ok = ok && *r.order >= 1.9;
        }
        s << "; ";
    }
    s << "runtime " << fmt("%.1f", seconds) << " s";
    return {ok, s.str()};
}

Outcome flux_condition(Cache& cache) {
    bool ok = true;
    std::ostringstream s;
    for (const auto& [m, rot] : kManufactured) {
        const Solved& r = cache.glued(m, rot, 257);
        SurveyOptions opt;
        opt.within = 0.5;
        const JumpSurvey survey = jump_condition_survey(r.u, r.fb, r.law, opt);
        // Predicted ratio along the anisotropy axis: m.
        const double axis_ratio = r.law(1.0, r.problem.anisotropy_axis());
        const bool pass = survey.median_relative_error <= 0.05 && std::abs(axis_ratio - m) < 1e-12 &&
                          survey.measurements.size() >= 10;
        ok = ok && pass;
        s << "m=" << m << " rot=" << rot << " median=" << fmt("%.4f", survey.median_relative_error) << "; ";
    }
    return {ok, s.str()};
}

Outcome lipschitz_bound() {
    struct Case {
        std::string name;
        BellmanProblem problem;
        ExactSolution data;
    };
    std::vector<Case> cases;
    for (const CatalogEntry& e : manufactured_catalog()) cases.push_back({e.name, e.problem, e.solution});
    for (std::uint64_t k = 0; cases.size() < 20; ++k) {
        cases.push_back({"random_polynomial(" + std::to_string(kSeed + k) + ")", BellmanProblem::reduced(2.0),
                         random_polynomial(kSeed + k)});
    }
    // At n = 257 an absolute residual of 1e-9 sits at the round-off floor
    // for traces of size ~5, so the suite solves to 1e-8.
    PolicyIterationOptions opt;
    opt.tol = 1e-8;
    bool ok = true;
    double worst_drift = 0.0, worst_ratio = 0.0;
    std::string worst_name;
    for (const Case& c : cases) {
        double L[2];
        int idx = 0;
        for (int n : {129, 257}) {
            const Grid2D g = Grid2D::make({0, 0}, 1.0, n);
            const SolveOutcome r = solve_policy_iteration(c.problem, trace_of(c.data, g), opt);
            L[idx++] = lipschitz_seminorm(phase_field(c.problem, r.v), 0.5);
        }
        const Grid2D gb = Grid2D::make({0, 0}, 1.0, 257);
        double scale = 0.0;
        for (int q = 0; q < gb.n(); ++q)
            for (auto [i, j] : {std::pair{q, 0}, {q, gb.n() - 1}, {0, q}, {gb.n() - 1, q}})
                scale = std::max(scale, norm(exact_eval(c.data, gb.node(i, j), DerivativeOrder::Grad).grad));
        const double top = std::max(L[0], L[1]);
        const double drift = top > 0.0 ? std::abs(L[1] - L[0]) / top : 0.0;
        const double ratio = L[1] / scale;
        if (!(drift <= 0.10 && ratio <= 10.0 && std::isfinite(L[1]))) ok = false;
        if (drift > worst_drift) {
            worst_drift = drift;
            worst_name = c.name;
        }
        worst_ratio = std::max(worst_ratio, ratio);
    }
    return {ok, std::to_string(cases.size()) + " data; worst drift " + fmt("%.4f", worst_drift) + " (" + worst_name +
                    "), worst L/scale " + fmt("%.3f", worst_ratio)};
}

Outcome c21_optimality(Cache& cache) {
    bool ok = true;
    std::ostringstream s;
    const double c129 = c21_seminorm(cache.glued(2.0, 0, 129).out.v, 0.5);
    const double c257 = c21_seminorm(cache.glued(2.0, 0, 257).out.v, 0.5);
    const double drift = std::abs(c257 - c129) / c129;
    ok = std::isfinite(c257) && drift <= 0.10;
    s << "c21 " << fmt("%.4f", c129) << " -> " << fmt("%.4f", c257) << " drift " << fmt("%.4f", drift) << "; ";
    for (double m : {1.5, 2.0, 4.0}) {
        const Solved& r = cache.glued(m, 0, 257);
        const ThirdDerivativeJump j = third_derivative_jump(r.u, r.fb, r.problem.anisotropy_axis(), 0.5);
        const bool pass = j.count > 0 && std::abs(j.median_ratio - m) <= 0.05 * m;
        ok = ok && pass;
        s << "m=" << m << " v222 ratio " << fmt("%.4f", j.median_ratio) << "; ";
    }
    return {ok, s.str()};
}

Outcome blowup_dichotomy(Cache& cache) {
    bool ok = true;
    int two = 0, total = 0, monotone = 0;
    double worst_residual = 0.0;
    std::ostringstream per_run;
    for (const auto& [m, rot] : kManufactured) {
        const Solved& r = cache.glued(m, rot, 257);
        const std::vector<double> radii = dyadic_radii(0.5, r.u.grid().h());
        const std::vector<Point> xs = spread_vertices(r.fb, 0.125, 10);
        if (xs.size() < 10) ok = false;
        int run_monotone = 0;
        for (Point x0 : xs) {
            const BlowupClassification c = blowup_classify(r.u, x0, r.law, radii);
            ++total;
            if (c.verdict == BlowupVerdict::TwoPlane) ++two;
            if (residual_decreasing_in_r(c)) ++run_monotone;
            for (const BlowupFit& f : c.fits) worst_residual = std::max(worst_residual, f.residual);
        }
        monotone += run_monotone;
        per_run << " m=" << m << "/" << rot << ":" << run_monotone;
    }
    ok = ok && two == total && monotone == total;

    // One-phase run: no free boundary to blow up.
    const BellmanProblem p = BellmanProblem::reduced(2.0);
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 129);
    const SolveOutcome saddle = solve_policy_iteration(p, trace_of(QuadraticSaddle{2.0}, g));
    const FreeBoundary fs = extract_gamma(phase_field(p, saddle.v), 10.0 * saddle.residual_max);
    const bool saddle_ok = fs.empty() && fs.one_phase;

    // Synthetic violations: a two-plane breaking the flux law, and a cross.
    const FluxLaw law = FluxLaw::for_problem(p);
    const std::vector<double> radii = dyadic_radii(0.25, g.h());
    const TwoPlaneSolution wrong{{0, 0}, {0, 1}, 2.0 * law(1.0, {0, 1}), 1.0};
    const BlowupVerdict v1 = blowup_classify(sample([&](Point x) { return wrong(x); }, g), {0, 0}, law, radii).verdict;
    const BlowupVerdict v2 =
        blowup_classify(sample([](Point x) { return x.x * x.y; }, g), {0, 0}, law, radii).verdict;
    const bool synthetic_ok = v1 == BlowupVerdict::Unresolved && v2 == BlowupVerdict::Unresolved;

    ok = ok && saddle_ok && synthetic_ok;
    return {ok, std::to_string(two) + "/" + std::to_string(total) + " two_plane, " + std::to_string(monotone) + "/" +
                    std::to_string(total) + " residuals shrinking with r (4 radii to 8h;" + per_run.str() +
                    "), worst residual " + fmt("%.1e", worst_residual) + "; saddle " +
                    (saddle_ok ? "one_phase/empty" : "NOT empty") + "; synthetic " + to_string(v1) + ", " +
                    to_string(v2)};
}

Outcome decay(Cache& cache) {
    int bounded = 0, total = 0;
    std::size_t min_radii = 99;
    double worst = 0.0;
    for (const auto& [m, rot] : kManufactured) {
        const Solved& r = cache.glued(m, rot, 257);
        const std::vector<double> radii = dyadic_radii(0.5, r.u.grid().h());
        for (Point x0 : spread_vertices(r.fb, 0.125, 10)) {
            const BlowupClassification c = blowup_classify(r.u, x0, r.law, radii);
            const DecayResult d = dyadic_decay_check(r.u, x0, c.plane, radii, 0.5);
            ++total;
            if (d.bounded) ++bounded;
            min_radii = std::min(min_radii, d.radii.size());
            for (double q : d.ratio) worst = std::max(worst, q / d.scale);
        }
    }
    // Exact exponent 1.2 perturbation of a two-plane.
    const Grid2D g = Grid2D::make({0, 0}, 1.0, 257);
    const FluxLaw law = FluxLaw::bellman_reduced(2.0);
    const TwoPlaneSolution p = make_two_plane(law, {0, 0}, {0, 1}, 1.0);
    const ScalarField2D pert = sample([&](Point x) { return p(x) + 0.5 * std::pow(norm(x), 2.2); }, g);
    const std::vector<double> radii = dyadic_radii(0.5, g.h());
    const bool slow = dyadic_decay_check(pert, {0, 0}, p, radii, 0.5).bounded;
    const DecayResult fast = dyadic_decay_check(pert, {0, 0}, p, radii, 1.5);
    const bool ok = bounded == total && total > 0 && min_radii >= 4 && slow && !fast.bounded;
    return {ok, std::to_string(bounded) + "/" + std::to_string(total) + " bounded over " + std::to_string(min_radii) +
                    " radii, max ratio/scale " + fmt("%.3f", worst) + "; synthetic probe 0.5 " +
                    (slow ? "bounded" : "unbounded") + ", probe 1.5 " + (fast.bounded ? "bounded" : "unbounded") +
                    " (trend " + fmt("%.2f", fast.trend_exponent) + ")"};
}

Outcome smoothed_agreement() {
    struct Row {
        double m, eps, h, dist;
    };
    std::vector<Row> rows;
    for (double m : {1.5, 2.0, 4.0}) {
        for (int n : {65, 129}) {
            const Grid2D g = Grid2D::make({0, 0}, 1.0, n);
            const ScalarField2D t = trace_of(GluedCubic{m, 1.0, 0.0}, g);
            const ScalarField2D pol = solve_policy_iteration(BellmanProblem::reduced(m), t).v;
            for (double eps : {1e-1, 1e-2, 1e-3}) {
                const ScalarField2D sm = solve_smoothed(SmoothedNonlinearity(m, eps), t).v;
                rows.push_back({m, eps, g.h(), (sm - pol).max_abs()});
            }
        }
    }
    auto excess = [](const Row& r) { return std::max(0.0, r.dist - (r.m - 1.0) * r.eps - 10.0 * kTol) / (r.h * r.h); };
    // C fitted once on m = 2, then checked on every m; per-m fits report stability.
    double C = 0.0;
    std::map<double, double> per_m;
    for (const Row& r : rows) {
        if (r.m == 2.0) C = std::max(C, excess(r));
        per_m[r.m] = std::max(per_m[r.m], excess(r));
    }
    bool ok = true;
    double worst = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Row& r = rows[k];
        const double bound = (r.m - 1.0) * r.eps + 10.0 * kTol + C * r.h * r.h;
        ok = ok && r.dist <= bound;
        worst = std::max(worst, r.dist / bound);
        // Distances shrink as eps does.
        if (k % 3 != 0) ok = ok && r.dist < rows[k - 1].dist;
    }
    double spread = 0.0;
    for (const auto& [m, c] : per_m) spread = std::max(spread, c);
    ok = ok && spread <= std::max(2.0 * C, 1e-12);
    return {ok, "C=" + fmt("%.3g", C) + " (max per-m fit " + fmt("%.3g", spread) + "), worst distance/bound " +
                    fmt("%.2e", worst)};
}

Outcome comparison_suite(const json& r) {
    bool ok = r["phi_parabolic"]["passed"].get<bool>() && !r["phi_parabolic"]["C0_passed"].get<bool>() &&
              r["psi_two_phase"]["passed"].get<bool>() && r["g_profile_convexity"]["passed"].get<bool>();
    double worst = 0.0;
    for (const json& s : r["g_profile_slope_ratio"]) worst = std::max(worst, s["relative_error"].get<double>());
    ok = ok && worst <= 0.01;
    return {ok, "phi(C=" + fmt("%.1f", r["phi_parabolic"]["C"].get<double>()) + ") margin " +
                    fmt("%.3f", r["phi_parabolic"]["operator_margin"].get<double>()) + ", C=0 margin " +
                    fmt("%.3f", r["phi_parabolic"]["C0_operator_margin"].get<double>()) + "; slope ratio error " +
                    fmt("%.1e", worst) + "; convexity min g'' " +
                    fmt("%.4f", r["g_profile_convexity"]["min_second_difference"].get<double>())};
}

Outcome maximum_principle(const json& r) {
    const json& mp = r["maximum_principle"];
    const int trials = mp["trials"].get<int>();
    const bool ok = trials == 100 && mp["boundary_dominated"].get<int>() == trials && mp["violations"].get<int>() == 0;
    return {ok, std::to_string(trials) + " trials, " + std::to_string(mp["boundary_dominated"].get<int>()) +
                    " dominated, " + std::to_string(mp["violations"].get<int>()) + " violations, max excess " +
                    fmt("%.2e", mp["max_violation"].get<double>())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-10"};
    std::vector<int> only;
    std::string out = "acceptance_runs";
    app.add_option("--only", only, "Run only these criteria (10 always runs first)");
    app.add_option("--out", out, "Directory for run artifacts");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                                : std::set<int>(only.begin(), only.end());
    const std::map<int, std::string> names = {
        {1, "manufactured convergence"}, {2, "flux condition"},     {3, "lipschitz bound"},
        {4, "c21 optimality"},           {5, "blow-up dichotomy"}, {6, "decay"},
        {7, "smoothed agreement"},       {8, "comparison suite"},  {9, "maximum principle"},
        {10, "oracle integrity"}};

    Cache cache;
    std::optional<json> comparisons;
    auto comparison_report = [&]() -> const json& {
        if (!comparisons) comparisons = verify_comparisons(kSeed, 100, out + "/comparisons");
        return *comparisons;
    };
    const std::map<int, std::function<Outcome()>> run = {
        {1, [&] { return manufactured_convergence(out); }},
        {2, [&] { return flux_condition(cache); }},
        {3, [&] { return lipschitz_bound(); }},
        {4, [&] { return c21_optimality(cache); }},
        {5, [&] { return blowup_dichotomy(cache); }},
        {6, [&] { return decay(cache); }},
        {7, [&] { return smoothed_agreement(); }},
        {8, [&] { return comparison_suite(comparison_report()); }},
        {9, [&] { return maximum_principle(comparison_report()); }},
        {10, [&] { return oracle_integrity(); }}};

    json summary = json::object();
    bool all = true;
    auto report = [&](int id, const Outcome& o) {
        std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", names.at(id).c_str(), o.detail.c_str());
        std::fflush(stdout);
        summary[std::to_string(id)] = {{"name", names.at(id)}, {"pass", o.pass}, {"detail", o.detail}};
        all = all && o.pass;
    };
    auto guarded = [&](int id) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run.at(id)();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        o.detail += fmt(" [%.1f s]", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        report(id, o);
    };

    guarded(10);
    const bool oracles_ok = summary["10"]["pass"].get<bool>();
    for (int id = 1; id <= 9; ++id) {
        if (!selected.count(id)) continue;
        if (!oracles_ok) {
            report(id, {false, "skipped: oracle integrity failed"});
            continue;
        }
        guarded(id);
    }
    try {
        std::filesystem::create_directories(out);
        write_json(out + "/acceptance_report.json", summary);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "could not write acceptance_report.json: %s\n", e.what());
    }
    return all ? 0 : 1;
}
