#include "davos/config.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "davos/error.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        constexpr std::array<std::string_view, 7> writable_options = {
            "active",
            "auto_rerun",
            "confirm_install",
            "noninteractive",
            "pip_executable",
            "project",
            "suppress_stdout",
        };

        constexpr std::array<std::string_view, 3> read_only_options = {"all_projects", "environment", "smuggled"};

        template <std::size_t N>
        bool contains(const std::array<std::string_view, N>& names, std::string_view name)
        {
            return std::find(names.begin(), names.end(), name) != names.end();
        }

        bool expect_bool(std::string_view name, const OptionValue& value)
        {
            if (const auto* flag = std::get_if<bool>(&value))
            {
                return *flag;
            }
            throw error(errc::invalid_value, fmt::format("'{}' must be True or False, not {}", name, describe(value)));
        }

        std::string py_bool(bool value)
        {
            return value ? "True" : "False";
        }
    }

    std::string describe(const OptionValue& value)
    {
        if (std::holds_alternative<std::monostate>(value))
        {
            return "None";
        }
        if (const auto* flag = std::get_if<bool>(&value))
        {
            return py_bool(*flag);
        }
        return python_string_literal(std::get<std::string>(value));
    }

    InstallerSettings ConfigState::installer_settings() const
    {
        InstallerSettings settings;
        settings.pip_executable = pip_executable;
        settings.interpreter = interpreter;
        settings.index = index;
        settings.noninteractive = noninteractive;
        settings.suppress_stdout = suppress_stdout;
        settings.confirm_install = confirm_install && !noninteractive;
        settings.timeout_seconds = timeout_seconds;
        settings.env_overrides = env_overrides;
        return settings;
    }

    void apply_option(ConfigState& state, const ProjectStore& store, std::string_view name, const OptionValue& value)
    {
        if (contains(read_only_options, name))
        {
            throw error(errc::read_only_option, fmt::format("'{}' is a read-only attribute", name));
        }
        if (!contains(writable_options, name))
        {
            throw error(errc::unknown_option, fmt::format("Unknown option '{}'", name));
        }

        if (name == "active")
        {
            state.active = expect_bool(name, value);
        }
        else if (name == "auto_rerun")
        {
            state.auto_rerun = expect_bool(name, value);
        }
        else if (name == "suppress_stdout")
        {
            state.suppress_stdout = expect_bool(name, value);
        }
        else if (name == "noninteractive")
        {
            state.noninteractive = expect_bool(name, value);
            if (state.noninteractive)
            {
                state.confirm_install = false;
            }
        }
        else if (name == "confirm_install")
        {
            const bool confirm = expect_bool(name, value);
            if (confirm && state.noninteractive)
            {
                throw error(
                    errc::incompatible_options,
                    "confirm_install cannot be enabled while noninteractive mode is on"
                );
            }
            state.confirm_install = confirm;
        }
        else if (name == "pip_executable")
        {
            if (std::holds_alternative<std::monostate>(value))
            {
                state.pip_executable.reset();
                return;
            }
            const auto* text = std::get_if<std::string>(&value);
            if (text == nullptr || detail::trim(*text).empty())
            {
                throw error(errc::invalid_value, fmt::format("pip_executable must be a path, not {}", describe(value)));
            }
            const auto words = split_executable(*text);
            if (!find_on_path(words.front()))
            {
                throw error(errc::invalid_value, fmt::format("'{}' is not an executable file", words.front()));
            }
            state.pip_executable = *text;
        }
        else  // project
        {
            if (std::holds_alternative<std::monostate>(value))
            {
                state.project.reset();
            }
            else if (const auto* text = std::get_if<std::string>(&value))
            {
                state.project = store.make(*text);
            }
            else
            {
                throw error(errc::invalid_value, "project must be a name, a path or None");
            }
            state.project_is_default = false;
        }
    }

    void apply_options(
        ConfigState& state,
        const ProjectStore& store,
        const std::vector<std::pair<std::string, OptionValue>>& pairs
    )
    {
        for (const auto& [name, value] : pairs)
        {
            if (name == "noninteractive")
            {
                apply_option(state, store, name, value);
            }
        }
        for (const auto& [name, value] : pairs)
        {
            if (name != "noninteractive")
            {
                apply_option(state, store, name, value);
            }
        }
    }

    Config::Config(ProjectStore store, std::optional<fs::path> notebook_path)
        : m_store(std::move(store))
    {
        m_state.notebook_path = std::move(notebook_path);
        use_default_project();
    }

    void Config::set_option(std::string_view name, const OptionValue& value)
    {
        configure({{std::string(name), value}});
    }

    void Config::configure(const std::vector<std::pair<std::string, OptionValue>>& pairs)
    {
        ConfigState next = m_state;
        apply_options(next, m_store, pairs);
        const bool project_assigned = std::any_of(
            pairs.begin(),
            pairs.end(),
            [](const auto& pair) { return pair.first == "project"; }
        );
        if (project_assigned && next.project)
        {
            m_store.ensure_created(*next.project);
        }
        m_state = std::move(next);
    }

    RequirePythonResult Config::require_python(
        std::string_view spec,
        bool warn,
        std::string_view extra_msg,
        prerelease_policy prereleases
    ) const
    {
        const auto current = Version::parse(python_version());
        const auto check = check_python(current, spec, prereleases);
        if (check.ok)
        {
            return {};
        }
        auto message = fmt::format(
            "The running Python version ({}) does not satisfy the requirement '{}'",
            check.current,
            check.spec
        );
        if (!extra_msg.empty())
        {
            message += fmt::format(". {}", extra_msg);
        }
        if (!warn)
        {
            throw error(errc::python_version_mismatch, message);
        }
        return {python_status::warning, message};
    }

    void Config::use_default_project()
    {
        std::vector<std::string> warnings;
        m_state.project = m_store.project_for_notebook(m_state.notebook_path, &warnings);
        m_state.project_is_default = true;
        m_warnings = std::move(warnings);
    }

    std::vector<Project> Config::all_projects() const
    {
        return m_store.list_all();
    }

    std::string Config::python_version() const
    {
        if (m_state.python_version)
        {
            return *m_state.python_version;
        }
        if (!m_python_version)
        {
            m_python_version = query_python_version(m_state.interpreter);
        }
        return *m_python_version;
    }

    std::string Config::effective_pip_executable() const
    {
        return detail::join(resolve_pip_executable(m_state.installer_settings()), " ");
    }

    std::string Config::snapshot(const SessionState* session) const
    {
        std::string project = "None";
        if (m_state.project)
        {
            project = fmt::format(
                "{} ({}{})",
                python_string_literal(m_state.project->name),
                to_string(m_state.project->kind),
                m_state.project_is_default ? ", default" : ""
            );
        }

        std::string out = "davos config\n";
        auto line = [&out](std::string_view name, std::string_view value)
        { out += fmt::format("    {:<16} : {}\n", name, value); };
        line("active", py_bool(m_state.active));
        line("auto_rerun", py_bool(m_state.auto_rerun));
        line("confirm_install", py_bool(m_state.confirm_install));
        line("environment", m_state.environment);
        line("noninteractive", py_bool(m_state.noninteractive));
        line("pip_executable", effective_pip_executable());
        line("project", project);
        line("suppress_stdout", py_bool(m_state.suppress_stdout));

        const auto projects = all_projects();
        line("all_projects", fmt::format("{} project{}", projects.size(), projects.size() == 1 ? "" : "s"));
        for (const auto& p : projects)
        {
            out += fmt::format("        {} ({})\n", p.name, to_string(p.kind));
        }
        if (session == nullptr || session->smuggled.empty())
        {
            line("smuggled", "{}");
        }
        else
        {
            line("smuggled", "");
            for (const auto& [name, args] : session->smuggled)
            {
                out += fmt::format("        {}: {}\n", name, args ? python_string_literal(*args) : "None");
            }
        }
        return out;
    }

    std::vector<fs::path> discover_site_dirs(const std::string& interpreter)
    {
        const auto result = run_process(
            {interpreter, "-c", "import os, sys\nfor p in sys.path[1:]:\n    if p and os.path.isdir(p): print(p)"}
        );
        if (result.exit_code != 0)
        {
            throw error(errc::io_error, fmt::format("'{}' could not report its search path", interpreter));
        }
        std::vector<fs::path> dirs;
        for (auto line : detail::split_any(result.out, "\n"))
        {
            line = detail::trim(line);
            if (!line.empty())
            {
                dirs.emplace_back(line);
            }
        }
        return dirs;
    }

    std::string query_python_version(const std::string& interpreter)
    {
        const auto result = run_process({interpreter, "-c", "import platform; print(platform.python_version())"});
        const auto text = detail::trim(result.out);
        if (result.exit_code != 0 || text.empty())
        {
            throw error(errc::io_error, fmt::format("'{}' did not report its version", interpreter));
        }
        return std::string(text);
    }
}
