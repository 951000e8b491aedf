#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "davos/config.hpp"
#include "davos/error.hpp"
#include "davos/grammar.hpp"
#include "davos/installer.hpp"
#include "davos/metadata.hpp"
#include "davos/projects.hpp"
#include "davos/session.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    inline constexpr std::string_view receipt_file_name = ".davos-receipts";

    enum class plan_action
    {
        load,
        install_then_load,
        restart_required,  // never produced by plan(); the shim escalates to it
        refused,
    };

    [[nodiscard]] std::string_view to_string(plan_action action) noexcept;

    struct LoadTarget
    {
        std::string module;
        std::vector<ImportedName> attrs;
        std::optional<std::string> alias;

        bool operator==(const LoadTarget&) const = default;
    };

    struct SmugglePlan
    {
        plan_action action = plan_action::load;
        std::string module;     // top-level module
        std::string dist_name;  // distribution the statement is about
        std::optional<InstallCommand> command;
        std::optional<fs::path> search_path_prepend;
        LoadTarget load_target;
        bool reload_needed = false;
        // Prompts are off for this statement (config or --no-input).
        bool noninteractive = false;
        // The install target already holds an unsatisfying copy, which is
        // removed before installing.
        bool remove_existing = false;
        // The distribution found locally, if any.
        std::optional<InstalledDist> local;
        std::optional<std::string> loaded_version;
        std::optional<errc> refusal;
        std::string reason;
        std::vector<std::string> diagnostics;
    };

    // The directories a statement is checked against: the project directory
    // (or, without a project, an onion --target directory), then the
    // environment's directories.
    [[nodiscard]] SearchScope search_scope_for(const ConfigState& config, const OnionSpec* onion);

    // Decides what a single (non-MULTI) statement needs. Touches nothing on
    // disk except reading receipts.
    [[nodiscard]] SmugglePlan
    plan(const SmuggleStatement& stmt, const Catalog& catalog, const SessionState& session, const ConfigState& config);

    // Distribution name a statement is recorded under.
    [[nodiscard]] std::string smuggled_name(const SmuggleStatement& stmt);

    // Adds the statement to the smuggled cache: first-insert order, latest
    // arguments.
    void record(const SmuggleStatement& stmt, SessionState& session);

    enum class outcome_status
    {
        loaded,
        installed,
        declined,
    };

    [[nodiscard]] std::string_view to_string(outcome_status status) noexcept;

    struct PlanOutcome
    {
        SmugglePlan plan;
        outcome_status status = outcome_status::loaded;
        std::optional<InstalledDist> dist;
        std::optional<InstallResult> install;
    };

    // plan, then install if needed, then re-scan and verify. Throws
    // InstallFailed, PostInstallMismatch, or the refusal's error.
    [[nodiscard]] PlanOutcome run(
        const SmuggleStatement& stmt,
        const ProjectStore& store,
        const ConfigState& config,
        SessionState& session,
        Console& console
    );

    // dist name -> VCS reference installed by this engine in `dir`.
    [[nodiscard]] std::map<std::string, std::string> read_receipts(const fs::path& dir);
    void write_receipt(const fs::path& dir, const std::string& dist_name, const std::optional<std::string>& ref);
}
