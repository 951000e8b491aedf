// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Everything runs offline against generated wheels.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "davos/config.hpp"
#include "davos/engine.hpp"
#include "davos/error.hpp"
#include "davos/grammar.hpp"
#include "davos/installer.hpp"
#include "davos/metadata.hpp"
#include "davos/projects.hpp"
#include "davos/version.hpp"

#include "fixtures.hpp"
#include "generators.hpp"
#include "version_oracle.hpp"

using namespace davos;
using nlohmann::json;

namespace
{
    // Collects failed expectations; the first few end up in the report.
    struct Checks
    {
        std::vector<std::string> failures;
        std::string summary;

        void expect(bool ok, const std::string& what)
        {
            if (!ok)
            {
                failures.push_back(what);
            }
        }
    };

    struct Criterion
    {
        std::string name;
        double budget_seconds = 0;  // 0: no time limit
        std::function<void(Checks&)> body;
    };

    std::optional<std::string> opt_string(const json& value)
    {
        return value.is_null() ? std::nullopt : std::optional(value.get<std::string>());
    }

    std::vector<ImportedName> imported(const json& pairs)
    {
        std::vector<ImportedName> out;
        for (const auto& pair : pairs)
        {
            out.push_back({pair[0].get<std::string>(), opt_string(pair[1])});
        }
        return out;
    }

    // Empty when the parse of `entry["line"]` is what the corpus expects.
    std::string corpus_mismatch(const json& entry)
    {
        const auto line = entry["line"].get<std::string>();
        std::optional<SmuggleStatement> stmt;
        try
        {
            stmt = parse_line(line, 1);
        }
        catch (const error& e)
        {
            if (entry.contains("error") && to_string(e.code()) == entry["error"].get<std::string>())
            {
                return {};
            }
            return fmt::format("{}: unexpected {}", line, to_string(e.code()));
        }
        if (entry.contains("error"))
        {
            return fmt::format("{}: accepted, expected {}", line, entry["error"].get<std::string>());
        }
        if (entry.contains("none"))
        {
            return stmt ? fmt::format("{}: parsed as a statement", line) : std::string();
        }
        if (!stmt)
        {
            return fmt::format("{}: not recognised", line);
        }
        const auto& expect = entry["expect"];
        bool ok = to_string(stmt->form) == expect["form"].get<std::string>()
               && stmt->root_name == expect["root"].get<std::string>()
               && stmt->alias == opt_string(expect.value("alias", json()))
               && stmt->from_attrs == imported(expect.value("attrs", json::array()))
               && stmt->names == imported(expect.value("names", json::array()))
               && stmt->indent == expect.value("indent", std::string());
        const auto& onion = expect["onion"];
        if (onion.is_null())
        {
            ok = ok && !stmt->onion;
        }
        else if (!stmt->onion)
        {
            ok = false;
        }
        else
        {
            const auto& req = stmt->onion->requirement;
            ok = ok && req.dist_name == onion["dist"].get<std::string>();
            if (onion.contains("spec"))
            {
                ok = ok
                  && (onion["spec"].is_null() ? !req.has_specifier()
                                              : req.has_specifier() && req.specifier()->str() == onion["spec"].get<std::string>());
            }
            if (onion.contains("vcs_ref"))
            {
                ok = ok && req.has_vcs() && req.vcs()->ref == opt_string(onion["vcs_ref"]);
            }
            if (onion.contains("extras"))
            {
                ok = ok && req.extras == onion["extras"].get<std::vector<std::string>>();
            }
            std::vector<OnionFlag> flags;
            for (const auto& f : onion.value("flags", json::array()))
            {
                flags.push_back({f[0].get<std::string>(), opt_string(f[1])});
            }
            ok = ok && stmt->onion->flags == flags && stmt->onion->force_install() == onion.value("force", false)
              && stmt->onion->no_input() == onion.value("no_input", false);
        }
        return ok ? std::string() : fmt::format("{}: parsed differently", line);
    }

    void grammar_suite(Checks& c)
    {
        const auto corpus = json::parse(fixtures::read_file(fixtures::fixtures_dir() / "grammar_corpus.json"));
        c.expect(corpus.size() >= 40, "corpus has fewer than 40 lines");

        std::set<std::string> forms;
        std::size_t rejections = 0;
        std::vector<std::string> sources;
        for (const auto& entry : corpus)
        {
            const auto mismatch = corpus_mismatch(entry);
            c.expect(mismatch.empty(), mismatch);
            if (entry.contains("error"))
            {
                ++rejections;
            }
            if (entry.contains("expect") && mismatch.empty())
            {
                forms.insert(entry["expect"]["form"].get<std::string>());
                const auto line = entry["line"].get<std::string>();
                const bool indented = line.front() == ' ' || line.front() == '\t';
                sources.push_back(transform_source(indented ? "if True:\n" + line + "\n" : line + "\n").source);
            }
        }
        c.expect(forms.size() == 5, fmt::format("only {} of 5 forms covered", forms.size()));

        const auto valid = fixtures::python_syntax_ok(sources);
        c.expect(
            std::all_of(valid.begin(), valid.end(), [](bool b) { return b; }),
            "a transformed line is not valid Python"
        );

        std::size_t lines = 0;
        for (const auto& [path, text] : fixtures::stdlib_sources(1000))
        {
            const auto out = transform_source(text);
            c.expect(out.source == text && out.statements.empty(), path.string() + " changed by transform");
            lines += static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
        }
        c.expect(lines >= 1000, "fewer than 1000 lines of ordinary code");
        c.summary = fmt::format(
            "{} corpus lines ({} rejections), {} forms, {} transforms valid, {} plain lines identical",
            corpus.size(),
            rejections,
            forms.size(),
            sources.size(),
            lines
        );
    }

    void version_suite(Checks& c)
    {
        gen::Rng rng(440);
        std::size_t disagreements = 0;
        constexpr int pairs = 10000;
        for (int i = 0; i < pairs; ++i)
        {
            const auto candidate = gen::version(rng);
            std::vector<oracle::Clause> clauses;
            const int n = 1 + static_cast<int>(rng() % 3);
            std::string text;
            for (int k = 0; k < n; ++k)
            {
                clauses.push_back(gen::clause(rng));
                text += (text.empty() ? "" : ",") + gen::render(clauses.back());
            }
            const int policy = static_cast<int>(rng() % 3) - 1;
            auto set = SpecifierSet::parse(text);
            if (policy >= 0)
            {
                set.set_prereleases(policy == 1);
            }
            const bool ours = set.contains(Version::parse(candidate));
            const bool theirs = oracle::matches(*oracle::parse(candidate), clauses, policy);
            if (ours != theirs)
            {
                ++disagreements;
                c.expect(false, fmt::format("{} in '{}' (policy {}): {} vs oracle {}", candidate, text, policy, ours, theirs));
            }
        }
        c.summary = fmt::format("{} pairs, {} disagreements", pairs, disagreements);
    }

    fs::path wheel_dir(const fs::path& root)
    {
        return root / "wheels";
    }

    void pip_into(const fs::path& target, const fs::path& wheels, const std::string& requirement)
    {
        const auto result = run_process({fixtures::python(), "-m", "pip", "install", "--quiet", "--disable-pip-version-check",
                                         "--no-index", "--find-links", wheels.string(), "--target", target.string(),
                                         "--upgrade", requirement});
        if (result.exit_code != 0)
        {
            throw std::runtime_error("seeding the environment failed: " + result.err);
        }
    }

    ConfigState sandbox_config(const fs::path& env, const fs::path& wheels)
    {
        ConfigState config;
        config.site_dirs = {env};
        config.pip_executable = fixtures::python() + " -m pip";
        config.index.no_index = true;
        config.index.find_links = {wheels.string()};
        config.noninteractive = true;
        config.suppress_stdout = true;
        return config;
    }

    void numpy_scenario(Checks& c)
    {
        fixtures::TempDir dir("davos-numpy");
        const auto env = dir / "env";
        fs::create_directories(env);
        fixtures::build_wheels(wheel_dir(dir.path()), {{"numpy", "1.24.3"}, {"numpy", "1.25.0"}});
        pip_into(env, wheel_dir(dir.path()), "numpy==1.24.3");

        ProjectStore store(dir / "davos");
        auto config = sandbox_config(env, wheel_dir(dir.path()));
        const auto notebook = dir / "analysis.ipynb";
        fixtures::write_file(notebook, "{}");
        config.project = store.project_for_notebook(notebook);
        const auto stmt = *parse_line("smuggle numpy as np  # pip: numpy==1.24.3", 1);
        SessionState session;
        auto console = Console::silent();

        // (a) the environment already satisfies the pin
        const auto a = run(stmt, store, config, session, console);
        c.expect(a.plan.action == plan_action::load && a.status == outcome_status::loaded, "(a) did not LOAD");
        c.expect(!config.project->exists(), "(a) created the project directory");

        // (b) the environment moves on to 1.25.0. pip --target leaves the
        // old dist-info behind on upgrade, so start from an empty directory.
        fs::remove_all(env);
        fs::create_directories(env);
        pip_into(env, wheel_dir(dir.path()), "numpy==1.25.0");
        const auto env_scan = scan({{env}});
        c.expect(env_scan.find("numpy") && env_scan.find("numpy")->version_text == "1.25.0", "(b) environment upgrade failed");
        const auto env_digest = fixtures::tree_digest(env);
        const auto b = run(stmt, store, config, session, console);
        c.expect(b.plan.action == plan_action::install_then_load && b.status == outcome_status::installed, "(b) did not INSTALL_THEN_LOAD");
        const auto packages = store.installed_packages(*config.project);
        c.expect(
            packages == std::vector<std::pair<std::string, std::string>>{{"numpy", "1.24.3"}},
            "(b) project does not hold exactly numpy 1.24.3"
        );
        c.expect(fixtures::tree_digest(env) == env_digest, "(b) environment changed");
        const auto resolved = resolve_import_name("numpy", scan(search_scope_for(config, &*stmt.onion)));
        c.expect(
            resolved && resolved->version_text == "1.24.3" && resolved->location == config.project->dir,
            "(b) project copy does not shadow the environment"
        );

        // (c) same statement again
        const auto again = run(stmt, store, config, session, console);
        c.expect(again.plan.action == plan_action::load && !again.install, "(c) rerun was not a LOAD");
        c.expect(fixtures::tree_digest(env) == env_digest, "(c) environment changed");
        c.summary = fmt::format(
            "(a) {}, (b) {} into project, (c) {}",
            to_string(a.plan.action),
            to_string(b.plan.action),
            to_string(again.plan.action)
        );
    }

    void isolation_fuzz(Checks& c)
    {
        fixtures::TempDir dir("davos-fuzz");
        const auto env = dir / "env";
        fs::create_directories(env);
        fixtures::build_wheels(
            wheel_dir(dir.path()),
            {{"alpha", "1.0"}, {"alpha", "2.0"}, {"beta", "0.5"}, {"gamma", "3.1"}}
        );
        pip_into(env, wheel_dir(dir.path()), "alpha==1.0");
        pip_into(env, wheel_dir(dir.path()), "beta==0.5");

        const std::vector<std::string> lines = {
            "smuggle alpha",
            "smuggle alpha  # pip: alpha==1.0",
            "smuggle alpha  # pip: alpha==2.0",
            "smuggle alpha  # pip: alpha>=1.5",
            "smuggle alpha  # pip: alpha==1.0 --force-reinstall",
            "smuggle alpha  # pip: alpha<2 -I",
            "from beta smuggle something  # pip: beta==0.5",
            "smuggle beta as b  # pip: beta --upgrade",
            "smuggle gamma  # pip: gamma==3.1",
            "smuggle gamma",
            "smuggle gamma  # pip: gamma==9.9",
            "smuggle missing_pkg",
            "smuggle json",
            "smuggle alpha, beta",
            "smuggle alpha  # pip: alpha --target /tmp/elsewhere",
        };
        ProjectStore store(dir / "davos");
        const auto env_digest = fixtures::tree_digest(env);
        std::mt19937_64 rng(50);
        std::size_t statements = 0;
        std::size_t installs = 0;
        std::size_t errors = 0;
        for (int sequence = 0; sequence < 50; ++sequence)
        {
            auto config = sandbox_config(env, wheel_dir(dir.path()));
            config.project = store.make(fmt::format("fuzz-{}", rng() % 4));
            SessionState session;
            auto console = Console::silent();
            const int length = 1 + static_cast<int>(rng() % 4);
            for (int i = 0; i < length; ++i)
            {
                const auto source = lines[rng() % lines.size()] + "\n";
                ++statements;
                try
                {
                    for (const auto& stmt : transform_source(source).statements)
                    {
                        const auto outcome = run(stmt, store, config, session, console);
                        installs += outcome.status == outcome_status::installed ? 1 : 0;
                    }
                }
                catch (const error&)
                {
                    ++errors;
                }
            }
            const bool same = fixtures::tree_digest(env) == env_digest;
            c.expect(same, fmt::format("sequence {} changed the environment", sequence));
        }
        c.summary = fmt::format("50 sequences, {} statements, {} installs, {} refused or failed", statements, installs, errors);
    }

    void projects_suite(Checks& c)
    {
        gen::Rng rng(1000);
        std::set<std::string> names;
        std::set<std::string> encoded;
        while (names.size() < 1000)
        {
            const auto name = gen::project_name(rng);
            if (!names.insert(name).second)
            {
                continue;
            }
            const auto enc = encode_project_name(name);
            encoded.insert(enc);
            c.expect(decode_project_name(enc) == name, "decode(encode(name)) != name for " + name);
            c.expect(enc.find('/') == std::string::npos && enc != "." && enc != "..", "unsafe encoding " + enc);
        }
        c.expect(encoded.size() == names.size(), "two names share an encoding");

        fixtures::TempDir dir("davos-projects");
        const auto root = dir / "root";
        ProjectStore store(root);
        const auto live_nb = dir / "kept.ipynb";
        fixtures::write_file(live_nb, "{}");
        std::vector<Project> abstract;
        for (int i = 0; i < 3; ++i)
        {
            abstract.push_back(store.make((dir / fmt::format("gone-{}.ipynb", i)).string()));
            store.ensure_created(abstract.back());
        }
        const auto live = store.make(live_nb.string());
        const auto agnostic = store.make("team-shared");
        store.ensure_created(live);
        store.ensure_created(agnostic);
        fixtures::write_dist(agnostic.dir, {.name = "tiny", .version = "1.0"});

        const auto refused = fixtures::cli_process(
            {"--project-root", root.string(), "projects", "prune"},
            {{"DAVOS_NONINTERACTIVE", "1"}}
        );
        const auto refused_doc = json::parse(refused.out);
        c.expect(
            refused.code == 1 && refused_doc["error"]["code"] == "NoninteractiveRequiresYes",
            "non-interactive prune without --yes did not fail with NoninteractiveRequiresYes"
        );
        c.expect(std::all_of(abstract.begin(), abstract.end(), [](const Project& p) { return p.exists(); }), "refused prune deleted something");

        const auto pruned = fixtures::cli_process(
            {"--project-root", root.string(), "projects", "prune", "--yes"},
            {{"DAVOS_NONINTERACTIVE", "1"}}
        );
        const auto pruned_doc = json::parse(pruned.out);
        std::set<std::string> deleted;
        for (const auto& p : pruned_doc["deleted"])
        {
            c.expect(p["kind"] == "ABSTRACT", "prune deleted a non-abstract project");
            deleted.insert(p["name"].get<std::string>());
        }
        std::set<std::string> expected;
        for (const auto& p : abstract)
        {
            expected.insert(p.name);
            c.expect(!p.exists(), "abstract project survived prune");
        }
        c.expect(pruned.code == 0 && deleted == expected, "prune did not delete exactly the abstract projects");
        c.expect(live.exists() && agnostic.exists(), "prune deleted a live project");

        const auto keep = fixtures::cli_process({"--project-root", root.string(), "projects", "clean-empty", agnostic.name});
        const auto drop = fixtures::cli_process({"--project-root", root.string(), "projects", "clean-empty", live.name});
        c.expect(keep.code == 0 && json::parse(keep.out)["removed"] == false && agnostic.exists(), "clean-empty removed a non-empty project");
        c.expect(drop.code == 0 && json::parse(drop.out)["removed"] == true && !live.exists(), "clean-empty kept an empty project");

        c.summary = fmt::format("{} names round-trip, prune removed {} of {} projects, clean-empty ok", names.size(), deleted.size(), 5);
    }

    void config_suite(Checks& c)
    {
        fixtures::TempDir dir("davos-config");
        const auto notebook = dir / "nb.ipynb";
        fixtures::write_file(notebook, "{}");
        auto fresh = [&] { return Config(ProjectStore(dir / "root"), notebook); };

        // The documented defaults.
        auto config = fresh();
        const auto& s = config.state();
        c.expect(s.active, "active should default to True");
        c.expect(!s.auto_rerun, "auto_rerun should default to False");
        c.expect(!s.confirm_install, "confirm_install should default to False");
        c.expect(!s.noninteractive, "noninteractive should default to False");
        c.expect(!s.suppress_stdout, "suppress_stdout should default to False");
        c.expect(!s.pip_executable, "pip_executable should default to discovery");
        c.expect(
            s.project && s.project->kind == project_kind::notebook_specific && s.project->name == notebook.string(),
            "project should default to the notebook-specific project"
        );
        ConfigState no_pip;
        no_pip.interpreter = "/nonexistent/python9";
        no_pip.site_dirs = {};
        const auto fallback = resolve_pip_executable(no_pip.installer_settings());
        c.expect(
            (fallback.size() >= 3 && fallback[fallback.size() - 2] == "-m" && fallback.back() == "pip")
                || fallback.size() == 1,
            "pip_executable fallback is neither a pip program nor '<python> -m pip'"
        );

        // The incompatible pair, in either order.
        for (const auto& batch : std::vector<std::vector<std::pair<std::string, OptionValue>>>{
                 {{"confirm_install", true}, {"noninteractive", true}},
                 {{"noninteractive", true}, {"confirm_install", true}},
             })
        {
            auto target = fresh();
            const auto before = target.state();
            bool rejected = false;
            try
            {
                target.configure(batch);
            }
            catch (const error& e)
            {
                rejected = e.code() == errc::incompatible_options;
            }
            c.expect(rejected && target.state() == before, "incompatible pair was not rejected cleanly");
        }

        // Atomicity: one bad entry leaves the state untouched.
        const std::vector<std::pair<std::string, OptionValue>> good = {
            {"active", false}, {"auto_rerun", true}, {"suppress_stdout", true}, {"noninteractive", true},
            {"project", std::string("other")}, {"pip_executable", std::string("/bin/sh")},
        };
        const std::vector<std::pair<std::string, OptionValue>> bad = {
            {"environment", std::string("Colaboratory")}, {"active", std::string("yes")},
            {"nonsense", true}, {"pip_executable", std::string("/missing/pip")}, {"project", false},
        };
        std::mt19937 rng(246);
        int batches = 0;
        for (; batches < 200; ++batches)
        {
            auto target = fresh();
            const auto before = target.state();
            const auto disk = fixtures::tree_digest(dir.path());
            std::vector<std::pair<std::string, OptionValue>> batch;
            for (const auto& pair : good)
            {
                if (rng() % 2)
                {
                    batch.push_back(pair);
                }
            }
            batch.insert(batch.begin() + static_cast<long>(rng() % (batch.size() + 1)), bad[rng() % bad.size()]);
            bool threw = false;
            try
            {
                target.configure(batch);
            }
            catch (const error&)
            {
                threw = true;
            }
            c.expect(threw && target.state() == before, "a batch with a bad entry changed the state");
            c.expect(fixtures::tree_digest(dir.path()) == disk, "a rejected batch touched the disk");
        }
        c.summary = fmt::format("defaults match, incompatible pair rejected, {} bad batches left state unchanged", batches);
    }

    void check_python_suite(Checks& c)
    {
        auto call = [](std::vector<std::string> args)
        {
            std::vector<std::string> full = {"check-python"};
            full.insert(full.end(), args.begin(), args.end());
            return fixtures::cli_process(full);
        };
        const auto accept = call({"--spec", ">=3.9;<3.12", "--current", "3.10.5"});
        c.expect(accept.code == 0, "3.10.5 rejected by >=3.9;<3.12");
        for (const char* v : {"3.8.0", "3.12.0"})
        {
            const auto reject = call({"--spec", ">=3.9;<3.12", "--current", v});
            c.expect(
                reject.code == 1 && json::parse(reject.out)["error"]["code"] == "PythonVersionMismatch",
                std::string(v) + " not rejected by >=3.9;<3.12"
            );
        }
        c.expect(call({"--spec", "3.10.5", "--current", "3.10.5"}).code == 0, "bare 3.10.5 rejected 3.10.5");
        c.expect(call({"--spec", "3.10.5", "--current", "3.10.6"}).code == 1, "bare 3.10.5 accepted 3.10.6");
        c.expect(call({"--spec", "3.10.5", "--current", "3.10.5.0"}).code == 0, "bare 3.10.5 rejected 3.10.5.0");
        const auto warn = call({"--spec", ">=3.12", "--current", "3.10.5", "--warn"});
        c.expect(
            warn.code == 0 && json::parse(warn.out)["status"] == "warning" && !warn.err.empty(),
            "warn mode did not return a warning with exit 0"
        );
        c.summary = "range, bare version and warn mode behave as required";
    }
}

int main()
{
    const std::vector<Criterion> criteria = {
        {"grammar suite", 5.0, grammar_suite},
        {"version engine vs oracle", 10.0, version_suite},
        {"NumPy scenario with stand-in wheels", 30.0, numpy_scenario},
        {"isolation invariant (50 random sequences)", 0, isolation_fuzz},
        {"projects", 0, projects_suite},
        {"config", 0, config_suite},
        {"check-python", 0, check_python_suite},
    };

    int failed = 0;
    for (const auto& criterion : criteria)
    {
        Checks checks;
        const auto start = std::chrono::steady_clock::now();
        try
        {
            criterion.body(checks);
        }
        catch (const std::exception& e)
        {
            checks.failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criterion.budget_seconds > 0 && seconds >= criterion.budget_seconds)
        {
            checks.failures.push_back(fmt::format("took {:.2f} s, limit {:.0f} s", seconds, criterion.budget_seconds));
        }
        const bool ok = checks.failures.empty();
        failed += ok ? 0 : 1;
        const auto timing = criterion.budget_seconds > 0 ? fmt::format("{:.2f} s < {:.0f} s", seconds, criterion.budget_seconds)
                                                         : fmt::format("{:.2f} s", seconds);
        fmt::print("{} {}: {} [{}]\n", ok ? "PASS" : "FAIL", criterion.name, ok ? checks.summary : checks.failures.front(), timing);
        for (std::size_t i = 1; i < std::min<std::size_t>(checks.failures.size(), 5); ++i)
        {
            fmt::print("     {}\n", checks.failures[i]);
        }
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
