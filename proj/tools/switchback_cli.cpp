// Command-line surface for the switchback experiment toolkit.

#include "CLI11.hpp"
#include "switchback/cli_app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"switchback experiment design & analysis toolkit"};
    app.require_subcommand(1);

    switchback::cli::CommandIO io;
    std::uint64_t seed = 0;
    int threads = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* copt = sub->add_option("--config", io.config_path, "run configuration JSON");
        if (needs_config) copt->required();
        sub->add_option("--out", io.out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a historical-style event stream");
    add_common(gen, true);
    auto* des = app.add_subcommand("design", "draw a switchback design");
    add_common(des, true);
    auto* sim = app.add_subcommand("simulate", "simulate a full experiment stream");
    add_common(sim, true);
    auto* est = app.add_subcommand("estimate", "estimate the GATE from a stream and design");
    add_common(est, true);
    est->add_option("--stream", io.stream_path, "event stream CSV")->required();
    est->add_option("--design", io.design_path, "design JSON")->required();
    auto* dec = app.add_subcommand("decompose", "closed-form bias/MSE component sweep");
    add_common(dec, true);
    auto* mc = app.add_subcommand("mc", "Monte-Carlo bias/MSE of the configured estimator");
    add_common(mc, true);
    auto* fit = app.add_subcommand("fit-cec", "fit a cumulative effect curve");
    add_common(fit, false);
    fit->add_option("--input", io.input_path, "CEC CSV (dt_min,delta_cum)")->required();
    fit->add_option("--method", io.method,
                    "natural-cubic | polynomial:D | local:D[:SPAN]")
        ->capture_default_str();
    auto* sel = app.add_subcommand("select", "empirical-Bayes design selection");
    add_common(sel, true);

    CLI11_PARSE(app, argc, argv);

    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) io.seed_override = seed;
        if (sub->count("--threads")) io.threads_override = threads;
        return switchback::cli::dispatch(sub->get_name(), io);
    }
    return switchback::cli::kConfigError;
}
