#pragma once

// Scenario files: fixture references, cluster settings and a directive
// script, executed against one Simulation.

#include "netroot/cluster.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace netroot::scenario {

// Load-time failure, prefixed with "<file>:<line>: " when a line is known.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Directive {
    int line = 0;
    std::string text;
    std::vector<std::string> words;
};

struct Scenario {
    std::filesystem::path base_dir;
    std::string source_name;
    cluster::ServerState server;
    cluster::SimulationConfig config;
    std::uint64_t seed = 1;
    std::vector<Directive> script;
};

// Parses a server seed file into `server`. Directives:
//   server <name>
//   dir <path> [mode]
//   file <path> <text, \n and \t escapes>
//   device <path> [mode] | socket <path> | symlink <path> <target>
//   chmod <path> <octal> | chown <path> <uid>
//   export <path> ro|rw [root-access]
//   kernel <name> <text>
//   per-host <directive using {host}>
void apply_server_seed(cluster::ServerState& server, std::string_view text,
                       const std::vector<std::string>& hosts, const std::string& source_name);

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir,
                        const std::string& source_name);
Scenario load_scenario(const std::filesystem::path& path);

struct Outcome {
    int line = 0;
    std::string directive;
    bool ok = true;
    std::string message;
};

struct RunOptions {
    bool strict = false;
    std::optional<std::uint64_t> seed;
    std::function<void(const cluster::Event&)> trace;
};

struct RunReport {
    std::vector<Outcome> outcomes;
    std::vector<std::string> violations;
    // Raw mount tables (real mfs ids) of every client at the end of the run.
    std::map<std::string, std::string> final_mounts;
    int exit_status = 0;
    std::string trace;

    std::string render() const;
};

RunReport run(const Scenario& scenario, const RunOptions& options = {});

// Boots `client` alone and returns its normalized mount table.
std::string mounts_for(const Scenario& scenario, const std::string& client);

// One script name per line, in rc order.
std::string order_dir(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace netroot::scenario
