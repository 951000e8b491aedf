#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "davos/grammar.hpp"
#include "davos/requirement.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    using EnvOverrides = std::vector<std::pair<std::string, std::string>>;

    // Extra index settings passed straight through to pip; tests use them to
    // stay offline.
    struct IndexOptions
    {
        std::optional<std::string> index_url;
        std::vector<std::string> find_links;
        bool no_index = false;

        bool operator==(const IndexOptions&) const = default;
    };

    // Everything about running the installer that comes from configuration.
    struct InstallerSettings
    {
        // A path, a bare program name, or "<interpreter> -m pip". nullopt
        // means discover (see resolve_pip_executable).
        std::optional<std::string> pip_executable;
        std::string interpreter = "python3";
        IndexOptions index;
        bool noninteractive = false;
        bool suppress_stdout = false;
        bool confirm_install = false;
        std::optional<double> timeout_seconds;
        EnvOverrides env_overrides;
    };

    struct InstallCommand
    {
        // Program plus any fixed leading arguments, e.g. {"python3", "-m", "pip"}.
        std::vector<std::string> executable;
        std::vector<std::string> argv;
        std::optional<fs::path> target_dir;
        EnvOverrides env_overrides;

        [[nodiscard]] std::vector<std::string> full_argv() const;
        // Shell-quoted rendering for messages. Never executed by a shell.
        [[nodiscard]] std::string display() const;

        bool operator==(const InstallCommand&) const = default;
    };

    enum class install_status
    {
        ok,
        failed,
        declined,
    };

    [[nodiscard]] std::string_view to_string(install_status status) noexcept;

    struct InstallResult
    {
        install_status status = install_status::ok;
        std::string out;
        std::string err;
        int exit_code = 0;
        double duration = 0.0;
    };

    // Where installer output and prompts go. Unset members fall back to
    // silence and "no".
    struct Console
    {
        std::function<void(std::string_view)> out;
        std::function<void(std::string_view)> err;
        std::function<bool(std::string_view)> confirm;

        // Installer output to the given streams; prompts on stderr, answers
        // read from stdin.
        static Console standard(bool output_to_stderr);
        static Console silent();
    };

    // Splits "prog -m pip" style text into words; a plain path stays whole.
    [[nodiscard]] std::vector<std::string> split_executable(std::string_view spec);

    // Full path of `program` on PATH, or nullopt.
    [[nodiscard]] std::optional<fs::path> find_on_path(std::string_view program);

    // The configured executable if any; otherwise `pip` next to the
    // interpreter, then `pip` on PATH, then "<interpreter> -m pip".
    [[nodiscard]] std::vector<std::string> resolve_pip_executable(const InstallerSettings& settings);

    // ``install <requirement> <onion options> [--target <dir>] [--no-input]
    // [index options]``.
    [[nodiscard]] InstallCommand build_command(
        const Requirement& requirement,
        const OnionSpec* onion,
        const std::optional<fs::path>& target_dir,
        const InstallerSettings& settings
    );

    // Asks before installing when confirmation is on and prompts are
    // allowed. Returns true when the install may go ahead.
    [[nodiscard]] bool confirm_install(const InstallCommand& cmd, const InstallerSettings& settings, Console& console);

    // Runs the installer without a shell. Throws InstallerNotFound when the
    // program cannot be started and InstallTimeout when it overruns.
    [[nodiscard]] InstallResult execute(const InstallCommand& cmd, const InstallerSettings& settings, Console& console);

    struct ProcessResult
    {
        int exit_code = 0;
        std::string out;
        std::string err;
        double duration = 0.0;
    };

    struct ProcessOptions
    {
        EnvOverrides env;
        std::optional<double> timeout_seconds;
        bool inherit_stdin = false;
        std::function<void(std::string_view)> on_out;
        std::function<void(std::string_view)> on_err;
    };

    // Spawns `argv` directly and collects both streams.
    [[nodiscard]] ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});
}
