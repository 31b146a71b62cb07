// finrel: command-line front end.
//
//   finrel field solve <scenario>
//   finrel maxent|price|info|frames|simulate <scenario>
//   finrel reproduce section4

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "finrel/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"finrel: measure geometry, pricing and information on finite state spaces"};
    app.set_help_flag("-h,--help", "Show help");

    std::string command;
    std::vector<std::string> args;
    std::string out, base;
    std::uint64_t seed = 0;
    double tolerance = 0.0, dt = 0.0;
    std::size_t paths = 0;

    app.add_option("command", command, "field | maxent | price | info | frames | simulate | reproduce")->required();
    app.add_option("args", args, "Subcommand and/or scenario path");
    auto* out_opt = app.add_option("--out", out, "Directory for JSON/CSV outputs (default: $FINREL_OUT)");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed for simulate");
    auto* base_opt = app.add_option("--base", base, "Log base for entropies")->check(CLI::IsMember({"2", "e"}));
    auto* tol_opt = app.add_option("--tolerance", tolerance, "Price-level tolerance")->check(CLI::NonNegativeNumber);
    auto* paths_opt = app.add_option("--paths", paths, "Number of simulated paths")->check(CLI::PositiveNumber);
    auto* dt_opt = app.add_option("--dt", dt, "Time step for simulate")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return finrel::cli::kValidation;
    }

    finrel::cli::RunOptions opts;
    if (*out_opt) {
        opts.out_dir = out;
    } else if (const char* env = std::getenv("FINREL_OUT"); env && *env) {
        opts.out_dir = env;
    }
    if (*seed_opt) opts.seed = seed;
    if (*base_opt) opts.base = base == "e" ? finrel::LogBase::e : finrel::LogBase::two;
    if (*tol_opt) opts.tolerance = tolerance;
    if (*paths_opt) opts.paths = paths;
    if (*dt_opt) opts.dt = dt;

    return finrel::cli::run(command, args, opts, std::cout, std::cerr);
}
