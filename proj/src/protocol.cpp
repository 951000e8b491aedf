#include "davos/protocol.hpp"

#include <fmt/format.h>

namespace davos::protocol
{
    namespace
    {
        json optional_text(const std::optional<std::string>& value)
        {
            return value ? json(*value) : json(nullptr);
        }

        json optional_path(const std::optional<fs::path>& value)
        {
            return value ? json(value->string()) : json(nullptr);
        }

        json names_json(const std::vector<ImportedName>& names)
        {
            json out = json::array();
            for (const auto& n : names)
            {
                out.push_back({{"name", n.name}, {"alias", optional_text(n.alias)}});
            }
            return out;
        }

        [[noreturn]] void bad(std::string_view what)
        {
            throw error(errc::invalid_value, fmt::format("Invalid protocol document: {}", what));
        }

        bool get_bool(const json& value, std::string_view key)
        {
            if (!value.is_boolean())
            {
                bad(fmt::format("'{}' must be a boolean", key));
            }
            return value.get<bool>();
        }

        std::string get_string(const json& value, std::string_view key)
        {
            if (!value.is_string())
            {
                bad(fmt::format("'{}' must be a string", key));
            }
            return value.get<std::string>();
        }

        std::vector<std::string> get_strings(const json& value, std::string_view key)
        {
            if (!value.is_array())
            {
                bad(fmt::format("'{}' must be a list of strings", key));
            }
            std::vector<std::string> out;
            for (const auto& item : value)
            {
                out.push_back(get_string(item, key));
            }
            return out;
        }

        OptionValue option_value(const json& value)
        {
            if (value.is_null())
            {
                return std::monostate{};
            }
            if (value.is_boolean())
            {
                return value.get<bool>();
            }
            if (value.is_string())
            {
                return value.get<std::string>();
            }
            bad("option values must be null, a boolean or a string");
        }
    }

    json document(json body)
    {
        json out = {{"v", protocol_version}};
        for (auto& [key, value] : body.items())
        {
            out[key] = std::move(value);
        }
        return out;
    }

    json to_json(const Requirement& req)
    {
        json constraint;
        if (const auto* spec = req.specifier())
        {
            json clauses = json::array();
            for (const auto& clause : spec->clauses())
            {
                clauses.push_back({{"op", to_string(clause.op())}, {"version", clause.version_text()}});
            }
            constraint = {{"kind", "specifier"}, {"text", spec->str()}, {"clauses", clauses}};
        }
        else if (const auto* vcs = req.vcs())
        {
            constraint = {
                {"kind", "vcs"},
                {"vcs", vcs->vcs},
                {"scheme", vcs->scheme},
                {"repo_url", vcs->repo_url},
                {"ref", optional_text(vcs->ref)},
                {"subdirectory", optional_text(vcs->subdirectory)},
                {"egg_name", optional_text(vcs->egg_name)},
            };
        }
        else
        {
            constraint = {{"kind", "none"}};
        }
        return {
            {"dist_name", req.dist_name},
            {"extras", req.extras},
            {"constraint", constraint},
            {"text", req.str()},
        };
    }

    json to_json(const OnionSpec& onion)
    {
        json flags = json::array();
        for (const auto& flag : onion.flags)
        {
            flags.push_back({{"name", flag.name}, {"value", optional_text(flag.value)}});
        }
        return {
            {"installer", "pip"},
            {"requirement", to_json(onion.requirement)},
            {"flags", flags},
            {"raw_args", onion.raw_args},
            {"force_install", onion.force_install()},
            {"no_input", onion.no_input()},
        };
    }

    json to_json(const SmuggleStatement& stmt)
    {
        return {
            {"form", to_string(stmt.form)},
            {"root_name", stmt.root_name},
            {"from_attrs", names_json(stmt.from_attrs)},
            {"alias", optional_text(stmt.alias)},
            {"names", names_json(stmt.names)},
            {"onion", stmt.onion ? to_json(*stmt.onion) : json(nullptr)},
            {"line_no", stmt.line_no},
            {"indent", stmt.indent},
            {"call", render_call(stmt)},
        };
    }

    json to_json(const InstalledDist& dist)
    {
        return {
            {"dist_name", dist.dist_name},
            {"display_name", dist.display_name},
            {"version", dist.version_text},
            {"location", dist.location.string()},
            {"top_level_modules", dist.top_level_modules},
            {"metadata_dir", dist.metadata_dir.string()},
        };
    }

    json to_json(const InstallCommand& cmd)
    {
        json env = json::object();
        for (const auto& [key, value] : cmd.env_overrides)
        {
            env[key] = value;
        }
        return {
            {"executable", cmd.executable},
            {"argv", cmd.argv},
            {"target_dir", optional_path(cmd.target_dir)},
            {"env_overrides", env},
            {"display", cmd.display()},
        };
    }

    json to_json(const SmugglePlan& plan)
    {
        json reason = nullptr;
        if (plan.refusal)
        {
            reason = {{"code", to_string(*plan.refusal)}, {"message", plan.reason}};
        }
        return {
            {"action", to_string(plan.action)},
            {"module", plan.module},
            {"dist_name", plan.dist_name},
            {"command", plan.command ? to_json(*plan.command) : json(nullptr)},
            {"search_path_prepend", optional_path(plan.search_path_prepend)},
            {"load_target",
             {{"module", plan.load_target.module},
              {"attrs", names_json(plan.load_target.attrs)},
              {"alias", optional_text(plan.load_target.alias)}}},
            {"reload_needed", plan.reload_needed},
            {"noninteractive", plan.noninteractive},
            {"remove_existing", plan.remove_existing},
            {"local", plan.local ? to_json(*plan.local) : json(nullptr)},
            {"loaded_version", optional_text(plan.loaded_version)},
            {"reason", reason},
            {"diagnostics", plan.diagnostics},
        };
    }

    json to_json(const PlanOutcome& outcome)
    {
        json install = nullptr;
        if (outcome.install)
        {
            install = {
                {"status", to_string(outcome.install->status)},
                {"exit_code", outcome.install->exit_code},
                {"duration", outcome.install->duration},
            };
        }
        return {
            {"status", to_string(outcome.status)},
            {"plan", to_json(outcome.plan)},
            {"dist", outcome.dist ? to_json(*outcome.dist) : json(nullptr)},
            {"install", install},
        };
    }

    json to_json(const Project& project)
    {
        return {
            {"name", project.name},
            {"dir", project.dir.string()},
            {"kind", to_string(project.kind)},
            {"exists", project.exists()},
        };
    }

    json to_json(const SessionState& state)
    {
        json loaded = json::object();
        for (const auto& [module, version] : state.loaded)
        {
            loaded[module] = optional_text(version);
        }
        json smuggled = json::array();
        for (const auto& [name, args] : state.smuggled)
        {
            smuggled.push_back({{"name", name}, {"args", optional_text(args)}});
        }
        return {{"loaded", loaded}, {"importable", state.importable}, {"smuggled", smuggled}};
    }

    json to_json(const ConfigState& config)
    {
        json env = json::object();
        for (const auto& [key, value] : config.env_overrides)
        {
            env[key] = value;
        }
        json site_dirs = json::array();
        for (const auto& dir : config.site_dirs)
        {
            site_dirs.push_back(dir.string());
        }
        return {
            {"active", config.active},
            {"auto_rerun", config.auto_rerun},
            {"confirm_install", config.confirm_install},
            {"noninteractive", config.noninteractive},
            {"suppress_stdout", config.suppress_stdout},
            {"pip_executable", optional_text(config.pip_executable)},
            {"project", config.project ? to_json(*config.project) : json(nullptr)},
            {"project_is_default", config.project_is_default},
            {"environment", config.environment},
            {"notebook_path", optional_path(config.notebook_path)},
            {"interpreter", config.interpreter},
            {"python_version", optional_text(config.python_version)},
            {"site_dirs", site_dirs},
            {"index_url", optional_text(config.index.index_url)},
            {"find_links", config.index.find_links},
            {"no_index", config.index.no_index},
            {"timeout", config.timeout_seconds ? json(*config.timeout_seconds) : json(nullptr)},
            {"env", env},
        };
    }

    json to_json(const CellInventory& cell)
    {
        json statements = json::array();
        for (const auto& stmt : cell.statements)
        {
            statements.push_back(to_json(stmt));
        }
        return {{"cell_index", cell.cell_index}, {"statements", statements}};
    }

    json error_document(errc code, std::string_view message, std::optional<std::size_t> line)
    {
        json err = {{"code", to_string(code)}, {"message", message}};
        if (line)
        {
            err["line"] = *line;
        }
        return document({{"error", err}});
    }

    SessionState session_from_json(const json& doc)
    {
        if (!doc.is_object())
        {
            bad("state must be an object");
        }
        SessionState state;
        for (const auto& [key, value] : doc.items())
        {
            if (key == "v")
            {
                continue;
            }
            if (key == "loaded")
            {
                if (!value.is_object())
                {
                    bad("'loaded' must map module names to versions");
                }
                for (const auto& [module, version] : value.items())
                {
                    if (version.is_null())
                    {
                        state.loaded[module] = std::nullopt;
                    }
                    else
                    {
                        state.loaded[module] = get_string(version, "loaded");
                    }
                }
            }
            else if (key == "importable")
            {
                state.importable = get_strings(value, key);
            }
            else if (key == "smuggled")
            {
                if (!value.is_array())
                {
                    bad("'smuggled' must be a list");
                }
                for (const auto& entry : value)
                {
                    if (!entry.is_object() || !entry.contains("name"))
                    {
                        bad("'smuggled' entries need a name");
                    }
                    std::optional<std::string> args;
                    if (entry.contains("args") && !entry["args"].is_null())
                    {
                        args = get_string(entry["args"], "args");
                    }
                    state.smuggled.emplace_back(get_string(entry["name"], "name"), std::move(args));
                }
            }
            else
            {
                throw error(errc::unknown_option, fmt::format("Unknown state key '{}'", key));
            }
        }
        return state;
    }

    void apply_config_json(const json& doc, const ProjectStore& store, ConfigState& state)
    {
        if (!doc.is_object())
        {
            bad("config must be an object");
        }
        ConfigState next = state;
        std::vector<std::pair<std::string, OptionValue>> options;
        for (const auto& [key, value] : doc.items())
        {
            if (key == "v")
            {
                continue;
            }
            if (key == "active" || key == "auto_rerun" || key == "confirm_install" || key == "noninteractive"
                || key == "suppress_stdout" || key == "pip_executable" || key == "project")
            {
                options.emplace_back(key, option_value(value));
            }
            else if (key == "environment")
            {
                const auto env = get_string(value, key);
                if (std::find(std::begin(environment_values), std::end(environment_values), env)
                    == std::end(environment_values))
                {
                    bad(fmt::format("unknown environment '{}'", env));
                }
                next.environment = env;
            }
            else if (key == "notebook_path")
            {
                next.notebook_path = value.is_null() ? std::nullopt : std::optional<fs::path>(get_string(value, key));
            }
            else if (key == "interpreter")
            {
                next.interpreter = get_string(value, key);
            }
            else if (key == "python_version")
            {
                next.python_version = value.is_null() ? std::nullopt : std::optional(get_string(value, key));
            }
            else if (key == "site_dirs")
            {
                next.site_dirs.clear();
                for (const auto& dir : get_strings(value, key))
                {
                    next.site_dirs.emplace_back(dir);
                }
            }
            else if (key == "index_url")
            {
                next.index.index_url = value.is_null() ? std::nullopt : std::optional(get_string(value, key));
            }
            else if (key == "find_links")
            {
                next.index.find_links = get_strings(value, key);
            }
            else if (key == "no_index")
            {
                next.index.no_index = get_bool(value, key);
            }
            else if (key == "timeout")
            {
                if (value.is_null())
                {
                    next.timeout_seconds.reset();
                }
                else if (value.is_number() && value.get<double>() > 0)
                {
                    next.timeout_seconds = value.get<double>();
                }
                else
                {
                    bad("'timeout' must be a positive number or null");
                }
            }
            else if (key == "env")
            {
                if (!value.is_object())
                {
                    bad("'env' must map names to strings");
                }
                next.env_overrides.clear();
                for (const auto& [name, text] : value.items())
                {
                    next.env_overrides.emplace_back(name, get_string(text, "env"));
                }
            }
            else
            {
                throw error(errc::unknown_option, fmt::format("Unknown config key '{}'", key));
            }
        }

        apply_options(next, store, options);
        state = std::move(next);
    }
}
