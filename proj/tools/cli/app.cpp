#include "cli/app.hpp"

#include <chrono>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cli/commands.hpp"
#include "gridfm/errors.hpp"

namespace gridfm::cli {

namespace {

namespace fs = std::filesystem;

std::string absolute_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

/// Every option of the subcommand after parsing: flags as booleans, values
/// as the strings given (on the command line or in the config file) or
/// their defaults. Unset options without a default are null.
nlohmann::ordered_json resolved_config(const CLI::App& sub) {
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->get_expected_max() == 0) {
            config[name] = opt->count() > 0 && opt->as<bool>();
            continue;
        }
        std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
        if (values.empty() && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
        if (values.empty()) {
            config[name] = nullptr;
            continue;
        }
        if (path_options().contains(name)) {
            for (std::string& v : values) v = absolute_path(v);
        }
        std::string joined;
        for (std::size_t i = 0; i < values.size(); ++i) joined += (i > 0 ? "," : "") + values[i];
        config[name] = joined;
    }
    return config;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power-flow dataset toolkit: solve, generate, mask, evaluate, screen, benchmark", "gridfm"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.set_config("--config", "", "TOML or INI file of option values; command-line flags override it");
    app.require_subcommand(1, 1);
    app.option_defaults()->always_capture_default();
    const std::vector<Command> commands = register_commands(app);

    std::vector<const char*> argv{"gridfm"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const Command* chosen = nullptr;
    for (const Command& c : commands) {
        if (c.app->parsed()) chosen = &c;
    }
    if (chosen == nullptr) return kExitUsage;

    Context ctx{.out = out, .err = err};
    ctx.manifest.subcommand = chosen->app->get_name();
    ctx.manifest.config = resolved_config(*chosen->app);
    ctx.manifest.started = utc_timestamp(std::chrono::system_clock::now());
    try {
        chosen->run(ctx);
        if (ctx.exit_code == kExitOk && ctx.primary_output) {
            ctx.manifest.finished = utc_timestamp(std::chrono::system_clock::now());
            write_file_atomic(manifest_path(*ctx.primary_output), ctx.manifest.to_json().dump(2) + "\n");
        }
        return ctx.exit_code;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace gridfm::cli
