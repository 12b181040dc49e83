#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "grouprec/cli.hpp"
#include "grouprec/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Group-based private recommendation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string dataset;
    std::string format;
    std::string grouping;
    std::string output;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-d,--dataset", dataset, "Dataset path (overrides dataset.path)");
    app.add_option("--format", format, "movielens, generic or snapshot");
    app.add_option("-g,--grouping", grouping, "gender, age, occupation, random or explicit");
    app.add_option("-o,--output", output, "Output directory");
    app.add_option("-s,--set", overrides, "Override a config value, e.g. aggregation.theta_p=0.05");
    app.fallthrough();

    std::string command;
    for (const auto& name : grouprec::commands()) {
        app.add_subcommand(name)->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Unknown subcommands come back as extras or a missing-subcommand error.
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    grouprec::RunConfig config;
    try {
        if (!config_path.empty()) config = grouprec::load_config(config_path);
        std::vector<std::string> assignments;
        if (!dataset.empty()) assignments.push_back("dataset.path=" + dataset);
        if (!format.empty()) assignments.push_back("dataset.format=" + format);
        if (!grouping.empty()) assignments.push_back("grouping.strategy=" + grouping);
        if (!output.empty()) assignments.push_back("output_dir=" + output);
        assignments.insert(assignments.end(), overrides.begin(), overrides.end());
        grouprec::apply_overrides(config, assignments);
    } catch (const grouprec::Error& e) {
        const nlohmann::json record = {{"status", "error"}, {"kind", e.kind()}, {"message", e.what()}, {"exit_code", 2}};
        std::cerr << record.dump() << '\n';
        return 2;
    }
    return grouprec::dispatch(command, config, std::cerr);
}
