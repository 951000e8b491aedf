#include "davos/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "davos/config.hpp"
#include "davos/engine.hpp"
#include "davos/error.hpp"
#include "davos/grammar.hpp"
#include "davos/notebook.hpp"
#include "davos/projects.hpp"
#include "davos/protocol.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        using protocol::json;

        struct GlobalOptions
        {
            std::string project_root;
            std::vector<std::string> site_dirs;
            std::string interpreter;
            std::string index_url;
            std::vector<std::string> find_links;
            bool no_index = false;
            bool noninteractive = false;
            double timeout = 0;

            // Mirrors of the writable options.
            std::string active;
            std::string auto_rerun;
            std::string confirm_install;
            std::string suppress_stdout;
            std::string pip_executable;
            std::string project;
            bool no_project = false;
        };

        struct Streams
        {
            std::istream& in;
            std::ostream& out;
            std::ostream& err;
        };

        std::string read_stream(std::istream& in)
        {
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        std::string read_input(const std::string& path, std::istream& in)
        {
            if (path == "-")
            {
                return read_stream(in);
            }
            std::ifstream file(path, std::ios::binary);
            if (!file)
            {
                throw error(errc::io_error, fmt::format("Cannot read {}", path));
            }
            return read_stream(file);
        }

        // A JSON argument: inline text starting with '{', '-' for stdin, or
        // a file path.
        json read_json_arg(const std::string& arg, std::istream& in)
        {
            const auto trimmed = detail::trim(arg);
            const std::string text = !trimmed.empty() && trimmed.front() == '{' ? std::string(trimmed)
                                                                                : read_input(arg, in);
            try
            {
                return json::parse(text);
            }
            catch (const nlohmann::json::exception& e)
            {
                throw error(errc::invalid_value, fmt::format("Invalid JSON in {}: {}", arg, e.what()));
            }
        }

        bool env_flag(std::string_view name)
        {
            const char* value = std::getenv(std::string(name).c_str());
            if (value == nullptr)
            {
                return false;
            }
            const auto text = detail::to_lower(detail::trim(value));
            return !text.empty() && text != "0" && text != "false" && text != "no";
        }

        OptionValue parse_bool_text(const std::string& name, const std::string& text)
        {
            const auto lower = detail::to_lower(text);
            if (lower == "true" || lower == "1" || lower == "yes")
            {
                return true;
            }
            if (lower == "false" || lower == "0" || lower == "no")
            {
                return false;
            }
            throw error(errc::invalid_value, fmt::format("--{} expects true or false, not '{}'", name, text));
        }

        ProjectStore make_store(const GlobalOptions& g)
        {
            return g.project_root.empty() ? ProjectStore::from_environment() : ProjectStore(g.project_root);
        }

        bool noninteractive(const GlobalOptions& g)
        {
            return g.noninteractive || env_flag(noninteractive_env);
        }

        // Environment, then the config document, then command-line flags.
        Config build_config(const GlobalOptions& g, const ProjectStore& store, const std::optional<json>& doc)
        {
            std::optional<fs::path> notebook;
            if (doc && doc->is_object() && doc->contains("notebook_path") && (*doc)["notebook_path"].is_string())
            {
                notebook = fs::path((*doc)["notebook_path"].get<std::string>());
            }
            Config config(store, notebook);
            auto& state = config.context();
            if (env_flag(noninteractive_env))
            {
                apply_option(state, store, "noninteractive", true);
            }
            if (doc)
            {
                protocol::apply_config_json(*doc, store, state);
            }

            std::vector<std::pair<std::string, OptionValue>> flags;
            if (g.noninteractive)
            {
                flags.emplace_back("noninteractive", true);
            }
            for (const auto& [name, text] : {
                     std::pair<std::string, std::string>{"active", g.active},
                     {"auto_rerun", g.auto_rerun},
                     {"confirm_install", g.confirm_install},
                     {"suppress_stdout", g.suppress_stdout},
                 })
            {
                if (!text.empty())
                {
                    flags.emplace_back(name, parse_bool_text(name, text));
                }
            }
            if (!g.pip_executable.empty())
            {
                flags.emplace_back("pip_executable", g.pip_executable);
            }
            if (g.no_project)
            {
                flags.emplace_back("project", std::monostate{});
            }
            else if (!g.project.empty())
            {
                flags.emplace_back("project", g.project);
            }
            apply_options(state, store, flags);

            if (!g.interpreter.empty())
            {
                state.interpreter = g.interpreter;
            }
            for (const auto& dir : g.site_dirs)
            {
                state.site_dirs.emplace_back(dir);
            }
            if (!g.index_url.empty())
            {
                state.index.index_url = g.index_url;
            }
            state.index.find_links.insert(state.index.find_links.end(), g.find_links.begin(), g.find_links.end());
            state.index.no_index = state.index.no_index || g.no_index;
            if (g.timeout > 0)
            {
                state.timeout_seconds = g.timeout;
            }
            if (state.site_dirs.empty())
            {
                state.site_dirs = discover_site_dirs(state.interpreter);
            }
            return config;
        }

        SmuggleStatement parse_statement(const std::string& text)
        {
            if (text.find('\n') != std::string::npos)
            {
                throw error(errc::malformed_smuggle, "--statement must be a single line");
            }
            auto stmt = parse_line(text, 1);
            if (!stmt)
            {
                throw error(errc::malformed_smuggle, fmt::format("Not a smuggle statement: {}", text));
            }
            return *stmt;
        }

        void emit(const Streams& io, const json& doc)
        {
            io.out << doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        }

        json statements_json(const std::vector<SmuggleStatement>& statements)
        {
            json out = json::array();
            for (const auto& stmt : statements)
            {
                out.push_back(protocol::to_json(stmt));
            }
            return out;
        }

        json inventory_json(const std::vector<CellInventory>& inventory)
        {
            json out = json::array();
            for (const auto& cell : inventory)
            {
                out.push_back(protocol::to_json(cell));
            }
            return out;
        }

        bool looks_like_notebook_path(const std::string& path)
        {
            return path.size() > 6 && path.ends_with(".ipynb");
        }

        // -------- subcommands --------

        int cmd_parse(const Streams& io, const std::string& path)
        {
            const auto text = read_input(path, io.in);
            if (looks_like_notebook_path(path))
            {
                const auto result = transform_notebook(NotebookDoc::parse(text));
                std::vector<SmuggleStatement> all;
                for (const auto& cell : result.inventory)
                {
                    all.insert(all.end(), cell.statements.begin(), cell.statements.end());
                }
                emit(io, protocol::document({{"statements", statements_json(all)}, {"cells", inventory_json(result.inventory)}}));
                return 0;
            }
            const auto result = transform_source(text);
            emit(io, protocol::document({{"statements", statements_json(result.statements)}}));
            return 0;
        }

        int cmd_transform(const Streams& io, const std::string& path, const std::string& output)
        {
            const auto doc = NotebookDoc::parse(read_input(path, io.in));
            const auto result = transform_notebook(doc);
            const auto rendered = result.doc.render();
            json body = {
                {"changed", rendered != doc.render()},
                {"cells", inventory_json(result.inventory)},
            };
            if (!output.empty())
            {
                save_notebook(result.doc, output);
                body["output"] = output;
            }
            else
            {
                body["notebook"] = rendered;
            }
            emit(io, protocol::document(std::move(body)));
            return 0;
        }

        int cmd_plan(
            const Streams& io,
            const GlobalOptions& g,
            const std::string& statement,
            const std::string& state_arg,
            const std::string& config_arg
        )
        {
            const auto stmt = parse_statement(statement);
            const auto store = make_store(g);
            const auto session = state_arg.empty() ? SessionState{}
                                                   : protocol::session_from_json(read_json_arg(state_arg, io.in));
            const auto config = build_config(
                g,
                store,
                config_arg.empty() ? std::nullopt : std::optional(read_json_arg(config_arg, io.in))
            );

            json plans = json::array();
            for (const auto& single : stmt.expand())
            {
                const OnionSpec* onion = single.onion ? &*single.onion : nullptr;
                const auto catalog = scan(search_scope_for(config.state(), onion));
                plans.push_back(protocol::to_json(plan(single, catalog, session, config.state())));
            }
            emit(io, protocol::document({{"plans", plans}, {"warnings", config.warnings()}}));
            return 0;
        }

        int cmd_run(
            const Streams& io,
            const GlobalOptions& g,
            const std::string& statement,
            const std::string& state_arg,
            const std::string& config_arg
        )
        {
            const auto stmt = parse_statement(statement);
            const auto store = make_store(g);
            auto session = state_arg.empty() ? SessionState{}
                                             : protocol::session_from_json(read_json_arg(state_arg, io.in));
            const auto config = build_config(
                g,
                store,
                config_arg.empty() ? std::nullopt : std::optional(read_json_arg(config_arg, io.in))
            );
            for (const auto& warning : config.warnings())
            {
                io.err << "warning: " << warning << '\n';
            }

            Console console;
            console.out = [&io](std::string_view text) { io.err << text << std::flush; };
            console.err = console.out;
            console.confirm = [&io](std::string_view prompt)
            {
                io.err << prompt << " [y/n] " << std::flush;
                std::string answer;
                if (!std::getline(io.in, answer))
                {
                    return false;
                }
                answer = detail::to_lower(detail::trim(answer));
                return answer == "y" || answer == "yes";
            };

            json outcomes = json::array();
            for (const auto& single : stmt.expand())
            {
                outcomes.push_back(protocol::to_json(run(single, store, config.state(), session, console)));
            }
            emit(
                io,
                protocol::document(
                    {{"outcomes", outcomes}, {"state", protocol::to_json(session)}, {"warnings", config.warnings()}}
                )
            );
            return 0;
        }

        Project existing_project(const ProjectStore& store, const std::string& name)
        {
            auto project = store.get_project(name, false);
            if (!project)
            {
                throw error(errc::project_not_found, fmt::format("No project named '{}'", name));
            }
            return *project;
        }

        json projects_json(const std::vector<Project>& projects)
        {
            json out = json::array();
            for (const auto& p : projects)
            {
                out.push_back(protocol::to_json(p));
            }
            return out;
        }

        int cmd_projects_list(const Streams& io, const GlobalOptions& g)
        {
            std::vector<Diagnostic> diagnostics;
            const auto projects = make_store(g).list_all(&diagnostics);
            for (const auto& d : diagnostics)
            {
                io.err << "warning: " << d.path.string() << ": " << d.message << '\n';
            }
            emit(io, protocol::document({{"projects", projects_json(projects)}}));
            return 0;
        }

        int cmd_projects_prune(const Streams& io, const GlobalOptions& g, bool yes)
        {
            const auto report = make_store(g).prune(
                yes,
                !noninteractive(g),
                [&io](const Project& project)
                {
                    io.err << fmt::format("Delete project '{}' (notebook no longer exists)? [y/n] ", project.name)
                           << std::flush;
                    std::string answer;
                    if (!std::getline(io.in, answer))
                    {
                        return false;
                    }
                    answer = detail::to_lower(detail::trim(answer));
                    return answer == "y" || answer == "yes";
                }
            );
            emit(io, protocol::document({{"deleted", projects_json(report.deleted)}, {"kept", projects_json(report.kept)}}));
            return 0;
        }

        int cmd_projects_remove(const Streams& io, const GlobalOptions& g, const std::string& name)
        {
            const auto store = make_store(g);
            const auto project = existing_project(store, name);
            store.remove(project);
            emit(io, protocol::document({{"removed", protocol::to_json(project)}}));
            return 0;
        }

        int cmd_projects_rename(const Streams& io, const GlobalOptions& g, const std::string& from, const std::string& to)
        {
            const auto store = make_store(g);
            const auto renamed = store.rename(existing_project(store, from), to);
            emit(io, protocol::document({{"project", protocol::to_json(renamed)}}));
            return 0;
        }

        int cmd_projects_clean_empty(const Streams& io, const GlobalOptions& g, const std::string& name)
        {
            const auto store = make_store(g);
            const auto project = store.make(name);
            const bool removed = store.clean_if_empty(project);
            emit(io, protocol::document({{"project", protocol::to_json(project)}, {"removed", removed}}));
            return 0;
        }

        int cmd_projects_packages(const Streams& io, const GlobalOptions& g, const std::string& name)
        {
            const auto store = make_store(g);
            const auto project = existing_project(store, name);
            json packages = json::array();
            for (const auto& [dist, version] : store.installed_packages(project))
            {
                packages.push_back({{"name", dist}, {"version", version}});
            }
            emit(io, protocol::document({{"project", protocol::to_json(project)}, {"packages", packages}}));
            return 0;
        }

        int cmd_check_python(
            const Streams& io,
            const GlobalOptions& g,
            const std::string& spec,
            const std::string& current_arg,
            const std::string& prereleases_arg,
            bool warn,
            const std::string& extra_msg
        )
        {
            prerelease_policy prereleases;
            if (!prereleases_arg.empty())
            {
                prereleases = std::get<bool>(parse_bool_text("prereleases", prereleases_arg));
            }
            const auto current = current_arg.empty()
                                     ? query_python_version(g.interpreter.empty() ? "python3" : g.interpreter)
                                     : current_arg;
            const auto check = check_python(Version::parse(current), spec, prereleases);
            std::string message;
            if (!check.ok)
            {
                message = fmt::format(
                    "The running Python version ({}) does not satisfy the requirement '{}'",
                    check.current,
                    check.spec
                );
                if (!extra_msg.empty())
                {
                    message += ". " + extra_msg;
                }
                if (!warn)
                {
                    throw error(errc::python_version_mismatch, message);
                }
                io.err << "warning: " << message << '\n';
            }
            emit(
                io,
                protocol::document({
                    {"ok", check.ok},
                    {"status", check.ok ? "ok" : "warning"},
                    {"spec", check.spec},
                    {"current", check.current},
                    {"message", message},
                })
            );
            return 0;
        }

        int cmd_config_show(
            const Streams& io,
            const GlobalOptions& g,
            const std::string& config_arg,
            const std::vector<std::string>& sets,
            bool text
        )
        {
            const auto store = make_store(g);
            auto config = build_config(
                g,
                store,
                config_arg.empty() ? std::nullopt : std::optional(read_json_arg(config_arg, io.in))
            );
            std::vector<std::pair<std::string, OptionValue>> pairs;
            for (const auto& item : sets)
            {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                {
                    throw error(errc::usage, fmt::format("--set expects name=value, got '{}'", item));
                }
                const auto name = item.substr(0, eq);
                const auto value = item.substr(eq + 1);
                const auto lower = detail::to_lower(value);
                if (lower == "none" || lower == "null")
                {
                    pairs.emplace_back(name, std::monostate{});
                }
                else if (lower == "true" || lower == "false")
                {
                    pairs.emplace_back(name, lower == "true");
                }
                else
                {
                    pairs.emplace_back(name, value);
                }
            }
            // Validated as a batch; nothing changes unless every pair is
            // acceptable.
            ConfigState next = config.state();
            apply_options(next, store, pairs);
            config.context() = std::move(next);

            if (text)
            {
                io.out << config.snapshot();
                return 0;
            }
            emit(
                io,
                protocol::document({
                    {"config", protocol::to_json(config.state())},
                    {"pip_executable_resolved", config.effective_pip_executable()},
                    {"all_projects", projects_json(config.all_projects())},
                    {"warnings", config.warnings()},
                })
            );
            return 0;
        }
    }

    int cli_main(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
    {
        const Streams io{in, out, err};
        CLI::App app{"Parse smuggle statements, plan and run installs, and manage projects.", "davos"};
        app.require_subcommand(1);
        app.fallthrough();

        GlobalOptions g;
        app.add_option("--project-root", g.project_root, "Project store root (default $DAVOS_PROJECT_ROOT or ~/.davos)");
        app.add_option("--site-dir", g.site_dirs, "Environment package directory; repeatable");
        app.add_option("--interpreter", g.interpreter, "Python interpreter (default python3)");
        app.add_option("--index-url", g.index_url, "Passed to pip as --index-url");
        app.add_option("--find-links", g.find_links, "Passed to pip as --find-links; repeatable");
        app.add_flag("--no-index", g.no_index, "Passed to pip as --no-index");
        app.add_flag("--noninteractive", g.noninteractive, "Disable all prompts (also $DAVOS_NONINTERACTIVE=1)");
        app.add_option("--timeout", g.timeout, "Installer timeout in seconds");
        app.add_option("--active", g.active, "true|false");
        app.add_option("--auto-rerun", g.auto_rerun, "true|false");
        app.add_option("--confirm-install", g.confirm_install, "true|false");
        app.add_option("--suppress-stdout", g.suppress_stdout, "true|false");
        app.add_option("--pip-executable", g.pip_executable, "pip executable or '<python> -m pip'");
        app.add_option("--project", g.project, "Use the named project");
        app.add_flag("--no-project", g.no_project, "Install into the environment instead of a project");

        std::string path;
        auto* parse_cmd = app.add_subcommand("parse", "Report the smuggle statements in a source file or notebook");
        parse_cmd->add_option("file", path, "Source file, notebook (.ipynb) or - for stdin")->required();

        std::string output;
        auto* transform_cmd = app.add_subcommand("transform", "Rewrite a notebook's smuggle statements into calls");
        transform_cmd->add_option("notebook", path, "Notebook file")->required();
        transform_cmd->add_option("-o,--output", output, "Write the transformed notebook here");

        std::string statement;
        std::string state_arg;
        std::string config_arg;
        auto* plan_cmd = app.add_subcommand("plan", "Decide what a smuggle statement needs (no side effects)");
        plan_cmd->add_option("--statement", statement, "One smuggle statement")->required();
        plan_cmd->add_option("--state", state_arg, "Session state JSON (file, - or inline)");
        plan_cmd->add_option("--config", config_arg, "Config JSON (file, - or inline)");

        auto* run_cmd = app.add_subcommand("run", "Plan, install if needed, and verify a smuggle statement");
        run_cmd->add_option("--statement", statement, "One smuggle statement")->required();
        run_cmd->add_option("--state", state_arg, "Session state JSON (file, - or inline)");
        run_cmd->add_option("--config", config_arg, "Config JSON (file, - or inline)");

        auto* projects_cmd = app.add_subcommand("projects", "Manage projects");
        projects_cmd->require_subcommand(1);
        auto* list_cmd = projects_cmd->add_subcommand("list", "List all projects");
        bool yes = false;
        auto* prune_cmd = projects_cmd->add_subcommand("prune", "Delete projects whose notebooks no longer exist");
        prune_cmd->add_flag("-y,--yes", yes, "Delete without asking");
        std::string name;
        std::string new_name;
        auto* remove_cmd = projects_cmd->add_subcommand("remove", "Delete a project");
        remove_cmd->add_option("name", name)->required();
        auto* rename_cmd = projects_cmd->add_subcommand("rename", "Rename a project");
        rename_cmd->add_option("old", name)->required();
        rename_cmd->add_option("new", new_name)->required();
        auto* clean_cmd = projects_cmd->add_subcommand("clean-empty", "Delete a project if nothing is installed in it");
        clean_cmd->add_option("name", name)->required();
        auto* packages_cmd = projects_cmd->add_subcommand("packages", "List a project's installed packages");
        packages_cmd->add_option("name", name)->required();

        std::string spec;
        std::string current;
        std::string prereleases;
        bool warn = false;
        std::string extra_msg;
        auto* python_cmd = app.add_subcommand("check-python", "Check a Python version against a specifier");
        python_cmd->add_option("--spec", spec, "Version or specifier set; ';' separates clauses")->required();
        python_cmd->add_option("--current", current, "Version to check (default: the interpreter's)");
        python_cmd->add_option("--prereleases", prereleases, "true|false (default: derived from --spec)");
        python_cmd->add_flag("--warn", warn, "Report a violation as a warning and exit 0");
        python_cmd->add_option("--extra-msg", extra_msg, "Appended to the violation message");

        std::vector<std::string> sets;
        bool as_text = false;
        auto* config_cmd = app.add_subcommand("config", "Inspect configuration");
        config_cmd->require_subcommand(1);
        auto* show_cmd = config_cmd->add_subcommand("show", "Show the effective configuration");
        show_cmd->add_option("--config", config_arg, "Config JSON (file, - or inline)");
        show_cmd->add_option("--set", sets, "name=value; applied together, all or nothing");
        show_cmd->add_flag("--text", as_text, "Human-readable listing instead of JSON");

        try
        {
            std::vector<std::string> reversed(args.rbegin(), args.rend());
            app.parse(reversed);
        }
        catch (const CLI::ParseError& e)
        {
            const int code = app.exit(e, out, err);
            if (code == 0)
            {
                return 0;
            }
            emit(io, protocol::error_document(errc::usage, e.what()));
            return 2;
        }

        try
        {
            if (*parse_cmd)
            {
                return cmd_parse(io, path);
            }
            if (*transform_cmd)
            {
                return cmd_transform(io, path, output);
            }
            if (*plan_cmd)
            {
                return cmd_plan(io, g, statement, state_arg, config_arg);
            }
            if (*run_cmd)
            {
                return cmd_run(io, g, statement, state_arg, config_arg);
            }
            if (*list_cmd)
            {
                return cmd_projects_list(io, g);
            }
            if (*prune_cmd)
            {
                return cmd_projects_prune(io, g, yes);
            }
            if (*remove_cmd)
            {
                return cmd_projects_remove(io, g, name);
            }
            if (*rename_cmd)
            {
                return cmd_projects_rename(io, g, name, new_name);
            }
            if (*clean_cmd)
            {
                return cmd_projects_clean_empty(io, g, name);
            }
            if (*packages_cmd)
            {
                return cmd_projects_packages(io, g, name);
            }
            if (*python_cmd)
            {
                return cmd_check_python(io, g, spec, current, prereleases, warn, extra_msg);
            }
            if (*show_cmd)
            {
                return cmd_config_show(io, g, config_arg, sets, as_text);
            }
        }
        catch (const install_error& e)
        {
            auto doc = protocol::error_document(e.code(), e.what(), e.line());
            doc["error"]["exit_code"] = e.exit_code();
            doc["error"]["stdout"] = e.captured_stdout();
            doc["error"]["stderr"] = e.captured_stderr();
            err << e.what() << '\n';
            emit(io, doc);
            return 1;
        }
        catch (const error& e)
        {
            err << "error: " << e.what() << '\n';
            emit(io, protocol::error_document(e.code(), e.what(), e.line()));
            return e.code() == errc::usage ? 2 : 1;
        }
        catch (const std::exception& e)
        {
            err << "error: " << e.what() << '\n';
            emit(io, protocol::error_document(errc::io_error, e.what()));
            return 1;
        }
        return 2;
    }

    int cli_main(int argc, char** argv)
    {
        std::vector<std::string> args(argv + 1, argv + argc);
        return cli_main(args, std::cin, std::cout, std::cerr);
    }
}
