#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cli/manifest.hpp"

namespace CLI {
class App;
}

namespace gridfm::cli {

struct Context {
    std::ostream& out;
    std::ostream& err;
    RunManifest manifest;
    /// The manifest is written beside this file once the command succeeds.
    std::optional<std::filesystem::path> primary_output;
    bool deterministic = true;
    int exit_code = 0;

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
};

struct Command {
    CLI::App* app = nullptr;
    std::function<void(Context&)> run;
};

std::vector<Command> register_commands(CLI::App& root);

/// Options holding file paths; the manifest stores them absolute.
const std::set<std::string>& path_options();

}  // namespace gridfm::cli
