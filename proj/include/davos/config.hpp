#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "davos/installer.hpp"
#include "davos/projects.hpp"
#include "davos/session.hpp"
#include "davos/version.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    inline constexpr std::string_view noninteractive_env = "DAVOS_NONINTERACTIVE";

    // The three frontends the shim can report.
    inline constexpr std::string_view environment_values[] = {"IPython<7.0", "IPython>=7.0", "Colaboratory"};

    // None, a flag, or text: the value kinds an option can take.
    using OptionValue = std::variant<std::monostate, bool, std::string>;

    [[nodiscard]] std::string describe(const OptionValue& value);

    struct ConfigState
    {
        bool active = true;
        bool auto_rerun = false;
        bool confirm_install = false;
        bool noninteractive = false;
        bool suppress_stdout = false;
        std::optional<std::string> pip_executable;  // nullopt: discovered
        std::optional<Project> project;             // nullopt: install into the environment
        bool project_is_default = true;
        std::string environment = "IPython>=7.0";

        // Session context, set by whoever drives the engine.
        std::optional<fs::path> notebook_path;
        std::string interpreter = "python3";
        std::optional<std::string> python_version;  // overrides asking the interpreter
        std::vector<fs::path> site_dirs;
        IndexOptions index;
        std::optional<double> timeout_seconds;
        EnvOverrides env_overrides;

        [[nodiscard]] InstallerSettings installer_settings() const;

        bool operator==(const ConfigState&) const = default;
    };

    enum class python_status
    {
        ok,
        warning,
    };

    struct RequirePythonResult
    {
        python_status status = python_status::ok;
        std::string message;
    };

    /**
     * Mutable configuration for one session.
     *
     * Writable options: active, auto_rerun, confirm_install, noninteractive,
     * pip_executable, project, suppress_stdout. environment, all_projects and
     * smuggled are read-only.
     */
    class Config
    {
    public:

        Config(ProjectStore store, std::optional<fs::path> notebook_path);

        [[nodiscard]] const ConfigState& state() const noexcept
        {
            return m_state;
        }

        [[nodiscard]] ConfigState& context() noexcept
        {
            return m_state;
        }

        [[nodiscard]] const ProjectStore& store() const noexcept
        {
            return m_store;
        }

        // Warnings raised while binding the default project.
        [[nodiscard]] const std::vector<std::string>& warnings() const noexcept
        {
            return m_warnings;
        }

        void set_option(std::string_view name, const OptionValue& value);

        // All or nothing: the whole batch is validated before anything
        // changes.
        void configure(const std::vector<std::pair<std::string, OptionValue>>& pairs);

        // Throws PythonVersionMismatch on violation unless `warn`.
        [[nodiscard]] RequirePythonResult require_python(
            std::string_view spec,
            bool warn = false,
            std::string_view extra_msg = {},
            prerelease_policy prereleases = std::nullopt
        ) const;

        void use_default_project();

        [[nodiscard]] std::vector<Project> all_projects() const;

        [[nodiscard]] std::string snapshot(const SessionState* session = nullptr) const;

        // The interpreter's version, asked once and cached.
        [[nodiscard]] std::string python_version() const;

        // The executable that would be used, with discovery applied.
        [[nodiscard]] std::string effective_pip_executable() const;

    private:

        ProjectStore m_store;
        ConfigState m_state;
        std::vector<std::string> m_warnings;
        mutable std::optional<std::string> m_python_version;
    };

    // Checks one assignment against `state` and applies it to `state`.
    // Project assignment binds the project without creating its directory.
    void apply_option(ConfigState& state, const ProjectStore& store, std::string_view name, const OptionValue& value);

    // apply_option for a batch. noninteractive is applied first so the
    // confirm_install check sees the batch's final mode whatever the order.
    void apply_options(
        ConfigState& state,
        const ProjectStore& store,
        const std::vector<std::pair<std::string, OptionValue>>& pairs
    );

    // Asks the interpreter for sys.path entries that are directories.
    [[nodiscard]] std::vector<fs::path> discover_site_dirs(const std::string& interpreter);

    // platform.python_version() of the interpreter.
    [[nodiscard]] std::string query_python_version(const std::string& interpreter);
}
