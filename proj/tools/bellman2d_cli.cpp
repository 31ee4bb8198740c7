// Command-line driver: solve, analyze, verify comparisons, convergence, manufactured list.

#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>

#include "bellman2d/errors.hpp"
#include "bellman2d/experiment.hpp"
#include "bellman2d/manufactured.hpp"

using namespace bellman2d;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
    validate(c);
    return c;
}

std::string out_dir(const std::string& flag, const ExperimentConfig& c) { return flag.empty() ? c.output_dir : flag; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solver and verification lab for Min{L1 v, L2 v} = 0 in two dimensions"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::uint64_t seed = 20240611;

    auto* solve_cmd = app.add_subcommand("solve", "Solve and write v.csv, u.csv, policy.csv, solve_meta.json");
    solve_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
    solve_cmd->add_option("--out", out, "Output directory (default: config output_dir)");

    auto* analyze_cmd = app.add_subcommand("analyze", "Solve, then run every enabled analysis");
    analyze_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
    analyze_cmd->add_option("--out", out, "Output directory (default: config output_dir)");

    auto* verify_cmd = app.add_subcommand("verify", "Verification suites");
    verify_cmd->require_subcommand(1);
    int trials = 100;
    auto* comparisons_cmd = verify_cmd->add_subcommand("comparisons", "Comparison functions and maximum principle");
    comparisons_cmd->add_option("--seed", seed, "Seed for the randomized suite");
    comparisons_cmd->add_option("--trials", trials, "Randomized maximum-principle trials");
    comparisons_cmd->add_option("--out", out, "Output directory for comparison_report.json");

    auto* convergence_cmd = app.add_subcommand("convergence", "Grid refinement study against the closed form");
    std::vector<int> n_list;
    convergence_cmd->add_option("--config", config_path, "Base config (JSON); n_list may be given there");
    convergence_cmd->add_option("--n", n_list, "Grid sizes, e.g. --n 65 129 257");
    convergence_cmd->add_option("--out", out, "Output directory for convergence.csv");

    auto* manufactured_cmd = app.add_subcommand("manufactured", "Manufactured solutions");
    manufactured_cmd->require_subcommand(1);
    auto* list_cmd = manufactured_cmd->add_subcommand("list", "Print the catalog with oracle residuals");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*solve_cmd) {
            const ExperimentConfig c = config_or_default(config_path);
            const SolveRecord rec = solve(c);
            write_solve_outputs(out_dir(out, c), c, rec);
            std::cout << "solved n=" << c.n << " residual=" << rec.residual_max << " policy_updates="
                      << rec.policy_updates << " -> " << out_dir(out, c) << '\n';
        } else if (*analyze_cmd) {
            const ExperimentConfig c = config_or_default(config_path);
            run(c, out_dir(out, c));
            std::cout << "report written to " << out_dir(out, c) << "/report.json\n";
        } else if (*comparisons_cmd) {
            const nlohmann::json r = verify_comparisons(seed, trials, out.empty() ? "comparisons" : out);
            std::cout << r.dump(2) << '\n';
        } else if (*convergence_cmd) {
            const ExperimentConfig c = config_or_default(config_path);
            const std::vector<int> ns = n_list.empty() ? c.n_list : n_list;
            const auto rows = convergence_study(c, ns, out.empty() ? c.output_dir : out);
            std::cout << std::setprecision(6);
            for (const ConvergenceRow& r : rows) {
                std::cout << "n=" << r.n << " error=" << r.max_error;
                if (r.order) std::cout << " order=" << *r.order;
                if (r.exact) std::cout << " exact";
                std::cout << '\n';
            }
        } else if (*list_cmd) {
            std::cout << std::setprecision(3);
            for (const CatalogEntry& e : manufactured_catalog()) {
                const OracleReport r = oracle_check(e.solution, e.problem);
                std::cout << e.name << "  residual=" << r.residual_max << "  defects=(" << r.value_defect << ", "
                          << r.grad_defect << ", " << r.hess_defect << ")\n";
            }
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
