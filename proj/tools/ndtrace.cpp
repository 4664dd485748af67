#include "config.hpp"
#include "run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <typeinfo>

namespace {

// Exit codes.
constexpr int exit_ok = 0;
constexpr int exit_tolerance = 1;
constexpr int exit_input = 2;
constexpr int exit_numerical = 3;

std::string error_name(const ndtrace::Error& e) {
    using namespace ndtrace;
#define NDTRACE_NAME(T) \
    if (dynamic_cast<const T*>(&e)) return #T;
    NDTRACE_NAME(SpectralPointError)
    NDTRACE_NAME(InvalidPreset)
    NDTRACE_NAME(UnsupportedCoefficients)
    NDTRACE_NAME(ConfigError)
    NDTRACE_NAME(DivergentTail)
    NDTRACE_NAME(ContractionFailure)
    NDTRACE_NAME(SingularSystem)
    NDTRACE_NAME(IntegratorFailure)
    NDTRACE_NAME(NoValidAnchor)
    NDTRACE_NAME(NearSingular)
    NDTRACE_NAME(QuadratureFailure)
    NDTRACE_NAME(ZStepError)
    NDTRACE_NAME(NonIntegerWinding)
    NDTRACE_NAME(InputError)
    NDTRACE_NAME(NumericalError)
#undef NDTRACE_NAME
    return "Error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jost solutions, resolvent kernels and trace/determinant checks for order-N operators"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0;
    std::vector<std::string> commands = ndtrace::cli::command_names();
    commands.push_back("run");
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name, name == "run" ? "run every command listed in the config" : "");
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (default: outputs.dir of the config, else .)");
        sub->add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_input;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        const auto cfg = ndtrace::cli::load_config(config_path);
        std::vector<std::string> todo{name};
        if (name == "run") {
            if (cfg.commands.empty()) throw ndtrace::ConfigError("run: the config lists no commands");
            todo = cfg.commands;
        }
        const std::string out = out_dir.empty() ? cfg.out_dir : out_dir;
        const bool ok = ndtrace::cli::run_all(todo, cfg, out, threads);
        std::cout << (ok ? "pass" : "FAIL: identity tolerance exceeded") << " (" << out << "/summary.json)\n";
        return ok ? exit_ok : exit_tolerance;
    } catch (const ndtrace::InputError& e) {
        std::cerr << "error: " << error_name(e) << ": " << e.what() << '\n';
        return exit_input;
    } catch (const ndtrace::NumericalError& e) {
        std::cerr << "error: " << error_name(e) << ": " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }
}
