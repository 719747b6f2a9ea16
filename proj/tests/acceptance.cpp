#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "kp/acceptance.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-10"};
    kp::acceptance::SuiteOptions opt;
    std::string out = "acceptance_out", only;
    app.add_option("--seed", opt.seed, "Seed for all random generators");
    app.add_option("--out", out, "Directory for CSV outputs");
    app.add_option("--only", only, "Comma separated criterion names or ids");
    app.add_option("--tol-scale", opt.tol_scale, "Multiplier applied to every numeric tolerance");
    CLI11_PARSE(app, argc, argv);
    try {
        const auto ids = kp::acceptance::select(only);
        const auto rep = kp::acceptance::run_suite(opt, ids, out, std::cout, std::cerr);
        std::cout << (rep.all_pass ? "ALL PASS" : "FAILURES PRESENT") << "\n";
        return rep.all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
