// netroot: run cluster scenarios, show client mount tables, order rc.d dirs.
//
// Exit status: 0 on success, 1 when a run reports violations or failed
// expectations, 2 when inputs cannot be loaded.

#include "netroot/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace sc = netroot::scenario;

namespace {

int cmd_run(const std::string& path, bool strict, bool trace, std::optional<std::uint64_t> seed,
            const std::string& trace_out)
{
    sc::Scenario scenario = sc::load_scenario(path);
    sc::RunOptions options;
    options.strict = strict;
    options.seed = seed;
    if (trace)
        options.trace = [](const netroot::cluster::Event& e) { std::cout << e.render() << '\n'; };
    sc::RunReport report = sc::run(scenario, options);
    if (!trace_out.empty()) {
        std::ofstream out(trace_out, std::ios::binary);
        if (!out)
            throw sc::ScenarioError(trace_out + ": cannot write trace");
        out << report.trace;
    }
    std::cout << report.render();
    return report.exit_status;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Diskless cluster simulator"};
    app.require_subcommand(1);

    std::string scenario_path, client, rcdir, trace_out;
    bool strict = false, trace = false;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Execute a scenario and report violations");
    run->add_option("scenario", scenario_path, "Scenario file")->required();
    run->add_flag("--strict", strict, "Check read-only exports after every step");
    run->add_flag("--trace", trace, "Stream events to stdout");
    run->add_option("--seed", seed, "Override the scenario's interleaving seed");
    run->add_option("--trace-out", trace_out, "Write the event trace to a file");

    auto* mounts = app.add_subcommand("mounts", "Boot one client and print its mount table");
    mounts->add_option("scenario", scenario_path, "Scenario file")->required();
    mounts->add_option("client", client, "Client name")->required();

    auto* order = app.add_subcommand("order", "Print rc.d scripts in execution order");
    order->add_option("rcdir", rcdir, "rc.d directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(scenario_path, strict, trace, seed, trace_out);
        if (*mounts) {
            std::cout << sc::mounts_for(sc::load_scenario(scenario_path), client);
            return 0;
        }
        std::cout << sc::order_dir(rcdir);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "netroot: " << e.what() << '\n';
        return 2;
    }
}
