#include "davos/engine.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "davos/requirement.hpp"

namespace davos
{
    namespace
    {
        bool same_dir(const fs::path& a, const fs::path& b)
        {
            return fs::absolute(a).lexically_normal() == fs::absolute(b).lexically_normal();
        }

        // Where an install for this statement would land, if anywhere
        // other than the environment.
        std::optional<fs::path> install_dir_for(const ConfigState& config, const OnionSpec* onion)
        {
            if (config.project)
            {
                return config.project->dir;
            }
            if (onion != nullptr)
            {
                if (auto target = onion->target_dir())
                {
                    return fs::absolute(*target).lexically_normal();
                }
            }
            return std::nullopt;
        }

        bool constrained_by_specifier(const Requirement& req)
        {
            const auto* spec = req.specifier();
            return spec != nullptr && !spec->empty();
        }

        std::optional<InstalledDist> locate(
            const std::string& module,
            const Requirement& req,
            bool has_onion,
            const Catalog& catalog,
            std::vector<std::string>* diagnostics
        )
        {
            if (has_onion)
            {
                if (const auto* dist = catalog.find(req.dist_name))
                {
                    return *dist;
                }
                // A name implied by a repository URL is only a guess, so
                // look the module up instead.
                if (!req.has_vcs())
                {
                    return std::nullopt;
                }
            }
            auto resolution = resolve_import(module, catalog);
            if (resolution.diagnostic && diagnostics != nullptr)
            {
                diagnostics->push_back(*resolution.diagnostic);
            }
            return resolution.dist;
        }

        bool version_satisfies(const InstalledDist& dist, const Requirement& req)
        {
            if (!constrained_by_specifier(req))
            {
                return true;
            }
            // Unparseable metadata versions never satisfy a constraint.
            return dist.version && matches(*dist.version, *req.specifier());
        }

        bool same_version(const std::string& loaded, const InstalledDist& dist)
        {
            const auto parsed = Version::try_parse(loaded);
            if (parsed && dist.version)
            {
                return *parsed == *dist.version;
            }
            return loaded == dist.version_text;
        }

        SmugglePlan refuse(SmugglePlan p, errc code, std::string reason)
        {
            p.action = plan_action::refused;
            p.refusal = code;
            p.reason = std::move(reason);
            p.command.reset();
            return p;
        }
    }

    std::string_view to_string(plan_action action) noexcept
    {
        switch (action)
        {
            case plan_action::load:
                return "LOAD";
            case plan_action::install_then_load:
                return "INSTALL_THEN_LOAD";
            case plan_action::restart_required:
                return "RESTART_REQUIRED";
            case plan_action::refused:
                return "REFUSED";
        }
        return "";
    }

    std::string_view to_string(outcome_status status) noexcept
    {
        switch (status)
        {
            case outcome_status::loaded:
                return "LOADED";
            case outcome_status::installed:
                return "INSTALLED";
            case outcome_status::declined:
                return "DECLINED";
        }
        return "";
    }

    SearchScope search_scope_for(const ConfigState& config, const OnionSpec* onion)
    {
        return SearchScope::make(install_dir_for(config, onion), config.site_dirs);
    }

    std::map<std::string, std::string> read_receipts(const fs::path& dir)
    {
        std::map<std::string, std::string> receipts;
        std::ifstream in(dir / receipt_file_name);
        std::string line;
        while (std::getline(in, line))
        {
            const auto tab = line.find('\t');
            if (tab == std::string::npos || tab == 0)
            {
                continue;
            }
            receipts[line.substr(0, tab)] = line.substr(tab + 1);
        }
        return receipts;
    }

    void write_receipt(const fs::path& dir, const std::string& dist_name, const std::optional<std::string>& ref)
    {
        auto receipts = read_receipts(dir);
        if (ref)
        {
            receipts[dist_name] = *ref;
        }
        else if (receipts.erase(dist_name) == 0)
        {
            return;
        }

        const auto path = dir / receipt_file_name;
        std::error_code ec;
        if (receipts.empty())
        {
            fs::remove(path, ec);
            return;
        }
        const auto temp = dir / (std::string(receipt_file_name) + ".tmp");
        {
            std::ofstream out(temp, std::ios::trunc);
            for (const auto& [name, value] : receipts)
            {
                out << name << '\t' << value << '\n';
            }
            if (!out)
            {
                throw error(errc::io_error, fmt::format("Cannot write {}", temp.string()));
            }
        }
        fs::rename(temp, path, ec);
        if (ec)
        {
            throw error(errc::io_error, fmt::format("Cannot write {}: {}", path.string(), ec.message()));
        }
    }

    SmugglePlan
    plan(const SmuggleStatement& stmt, const Catalog& catalog, const SessionState& session, const ConfigState& config)
    {
        SmugglePlan p;
        p.module = stmt.top_level_module();
        p.dist_name = normalize_dist_name(p.module);
        p.load_target = {stmt.root_name, stmt.from_attrs, stmt.alias};
        p.noninteractive = config.noninteractive;

        if (stmt.form == smuggle_form::multi)
        {
            return refuse(std::move(p), errc::malformed_smuggle, "multi-name statements are planned one name at a time");
        }

        std::optional<OnionSpec> onion;
        if (stmt.onion)
        {
            try
            {
                onion = validate_onion_flags(*stmt.onion, config.project.has_value());
            }
            catch (const error& e)
            {
                return refuse(std::move(p), e.code(), e.what());
            }
        }
        const OnionSpec* onion_ptr = onion ? &*onion : nullptr;
        const Requirement req = onion ? onion->requirement : Requirement{p.dist_name, {}, {}};
        p.dist_name = req.dist_name;
        p.noninteractive = p.noninteractive || (onion && onion->no_input());

        const auto install_dir = install_dir_for(config, onion_ptr);
        p.search_path_prepend = install_dir;

        if (auto it = session.loaded.find(p.module); it != session.loaded.end())
        {
            p.loaded_version = it->second;
        }
        const bool loaded = session.loaded.contains(p.module);
        const bool force = onion && onion->force_install();

        auto local = locate(p.module, req, onion.has_value(), catalog, &p.diagnostics);
        p.local = local;

        bool satisfied = false;
        if (!force)
        {
            if (local)
            {
                if (const auto* vcs = req.vcs())
                {
                    // Installed metadata does not record the commit, so only
                    // our own receipt proves the pinned ref is present.
                    satisfied = install_dir && same_dir(local->location, *install_dir)
                                && read_receipts(*install_dir)[local->dist_name] == vcs->str();
                }
                else
                {
                    satisfied = version_satisfies(*local, req);
                }
            }
            else if (!constrained_by_specifier(req) && !req.has_vcs())
            {
                // Importable without metadata: fine as long as no version is
                // demanded.
                const auto& importable = session.importable;
                satisfied = is_stdlib_module(p.module) || loaded
                            || std::find(importable.begin(), importable.end(), p.module) != importable.end();
            }
        }

        if (satisfied)
        {
            p.action = plan_action::load;
            p.reload_needed = local && p.loaded_version && !same_version(*p.loaded_version, *local);
            return p;
        }

        p.action = plan_action::install_then_load;
        auto settings = config.installer_settings();
        settings.noninteractive = p.noninteractive;
        p.command = build_command(req, onion_ptr, config.project ? std::optional(config.project->dir) : std::nullopt, settings);
        p.remove_existing = local && install_dir && same_dir(local->location, *install_dir);

        if (loaded)
        {
            if (force || req.has_vcs())
            {
                p.reload_needed = true;
            }
            else if (constrained_by_specifier(req))
            {
                const auto version = p.loaded_version ? Version::try_parse(*p.loaded_version) : std::nullopt;
                p.reload_needed = !version || !matches(*version, *req.specifier());
            }
        }
        return p;
    }

    std::string smuggled_name(const SmuggleStatement& stmt)
    {
        if (stmt.onion)
        {
            return stmt.onion->requirement.dist_name;
        }
        return normalize_dist_name(stmt.top_level_module());
    }

    void record(const SmuggleStatement& stmt, SessionState& session)
    {
        for (const auto& single : stmt.expand())
        {
            const auto name = smuggled_name(single);
            std::optional<std::string> args;
            if (single.onion)
            {
                args = single.onion->raw_args;
            }
            auto it = std::find_if(
                session.smuggled.begin(),
                session.smuggled.end(),
                [&](const auto& entry) { return entry.first == name; }
            );
            if (it == session.smuggled.end())
            {
                session.smuggled.emplace_back(name, std::move(args));
            }
            else
            {
                it->second = std::move(args);
            }
        }
    }

    PlanOutcome run(
        const SmuggleStatement& stmt,
        const ProjectStore& store,
        const ConfigState& config,
        SessionState& session,
        Console& console
    )
    {
        const OnionSpec* raw_onion = stmt.onion ? &*stmt.onion : nullptr;
        const auto scope = search_scope_for(config, raw_onion);

        PlanOutcome outcome;
        outcome.plan = plan(stmt, scan(scope), session, config);
        if (outcome.plan.action == plan_action::refused)
        {
            throw error(outcome.plan.refusal.value_or(errc::usage), outcome.plan.reason, stmt.line_no);
        }
        if (outcome.plan.action == plan_action::load)
        {
            outcome.dist = outcome.plan.local;
            record(stmt, session);
            return outcome;
        }

        auto settings = config.installer_settings();
        settings.noninteractive = outcome.plan.noninteractive;
        if (settings.noninteractive)
        {
            settings.confirm_install = false;
        }
        // Ask before touching the disk so that declining changes nothing.
        if (!confirm_install(*outcome.plan.command, settings, console))
        {
            outcome.status = outcome_status::declined;
            return outcome;
        }
        settings.confirm_install = false;

        std::optional<ProjectLock> lock;
        bool created_project = false;
        if (config.project)
        {
            created_project = !config.project->exists();
            store.ensure_created(*config.project);
            lock.emplace(store.lock(*config.project));
            // Another process may have installed it while we waited.
            outcome.plan = plan(stmt, scan(scope), session, config);
            if (outcome.plan.action == plan_action::load)
            {
                outcome.dist = outcome.plan.local;
                record(stmt, session);
                return outcome;
            }
        }

        if (outcome.plan.remove_existing && outcome.plan.local)
        {
            remove_distribution(*outcome.plan.local);
        }

        auto result = execute(*outcome.plan.command, settings, console);
        if (result.status != install_status::ok)
        {
            if (created_project)
            {
                lock.reset();
                store.clean_if_empty(*config.project);
            }
            throw install_error(
                fmt::format(
                    "Installing '{}' failed (exit code {}): {}",
                    outcome.plan.dist_name,
                    result.exit_code,
                    outcome.plan.command->display()
                ),
                result.exit_code,
                result.out,
                result.err
            );
        }
        outcome.install = std::move(result);

        std::optional<OnionSpec> onion;
        if (stmt.onion)
        {
            onion = validate_onion_flags(*stmt.onion, config.project.has_value());
        }
        const Requirement req = onion ? onion->requirement : Requirement{outcome.plan.dist_name, {}, {}};

        const auto catalog = scan(scope);
        auto dist = locate(outcome.plan.module, req, onion.has_value(), catalog, nullptr);
        if (!dist || !version_satisfies(*dist, req))
        {
            throw error(
                errc::post_install_mismatch,
                dist ? fmt::format(
                    "After installing, '{}' is at version {}, which does not satisfy '{}'",
                    dist->dist_name,
                    dist->version_text,
                    req.str()
                )
                     : fmt::format("After installing, no distribution provides '{}'", outcome.plan.module),
                stmt.line_no
            );
        }

        if (const auto install_dir = install_dir_for(config, onion ? &*onion : nullptr);
            install_dir && same_dir(dist->location, *install_dir))
        {
            std::optional<std::string> ref;
            if (const auto* vcs = req.vcs())
            {
                ref = vcs->str();
            }
            write_receipt(*install_dir, dist->dist_name, ref);
        }

        outcome.status = outcome_status::installed;
        outcome.dist = std::move(dist);
        record(stmt, session);
        return outcome;
    }
}
