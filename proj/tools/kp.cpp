#include <algorithm>
#include <optional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kp/cli.hpp"

namespace {

kp::config::RunConfig load(const std::string& path) {
    if (path.empty()) throw kp::config_error("--config is required");
    return kp::config::parse_run_config(kp::config::load(path));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbed transition density toolkit"};
    app.require_subcommand(1);
    std::string config_path, out = "kp_out", only;
    std::uint64_t seed = 7;
    std::size_t n3g = 100000;
    double tol_scale = 1;
    bool discrete = false;
    std::optional<std::uint64_t> seed_flag;
    std::vector<CLI::Option*> out_flags;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) sub->add_option("--config", config_path, "JSON run configuration")->required();
        out_flags.push_back(sub->add_option("--out", out, "Output directory (default kp_out)"));
    };
    auto* series = app.add_subcommand("series", "Evaluate the perturbation series at sampled points");
    add_common(series, true);
    auto* certify = app.add_subcommand("certify", "Certify slice bounds");
    add_common(certify, true);
    certify->add_flag("--discrete", discrete, "Use the exact matrix path");
    auto* oracle = app.add_subcommand("oracle-check", "Compare the series against closed forms");
    add_common(oracle, true);
    auto* kato = app.add_subcommand("kato", "Kato modulus and Kato-class certificates");
    add_common(kato, true);
    kato->add_option("--seed", seed_flag, "Seed for the 5P constant sampler");
    auto* g3 = app.add_subcommand("3g", "Check the 3G inequality on random tuples");
    add_common(g3, false);
    g3->add_option("--seed", seed, "Seed");
    g3->add_option("-n,--samples", n3g, "Number of tuples");
    auto* weyl = app.add_subcommand("weyl", "Weyl half derivative and left inverse residuals");
    add_common(weyl, false);
    auto* repro = app.add_subcommand("reproduce", "Run the acceptance criteria");
    add_common(repro, false);
    repro->add_option("--seed", seed, "Seed");
    repro->add_option("--only", only, "Comma separated criterion names or ids");
    repro->add_option("--tol-scale", tol_scale, "Multiplier applied to every numeric tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kp::cli::bad_config;
    }

    const bool out_given = std::any_of(out_flags.begin(), out_flags.end(), [](CLI::Option* o) { return o->count() > 0; });
    kp::cli::Context ctx;
    ctx.out = out;
    try {
        auto configured = [&] {
            auto c = load(config_path);
            if (!out_given && !c.out.empty()) ctx.out = c.out;
            return c;
        };
        if (*series) return kp::cli::cmd_series(configured(), ctx);
        if (*certify) return kp::cli::cmd_certify(configured(), ctx, discrete);
        if (*oracle) return kp::cli::cmd_oracle_check(configured(), ctx);
        if (*kato) {
            const auto c = configured();
            return kp::cli::cmd_kato(c, ctx, seed_flag.value_or(c.seed));
        }
        if (*g3) return kp::cli::cmd_3g(ctx, seed, n3g);
        if (*weyl) return kp::cli::cmd_weyl(ctx);
        if (*repro) return kp::cli::cmd_reproduce(ctx, seed, only, tol_scale, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kp::cli::bad_config;
    }
    return kp::cli::bad_config;
}
