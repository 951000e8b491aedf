#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "davos/config.hpp"
#include "davos/engine.hpp"
#include "davos/grammar.hpp"
#include "davos/notebook.hpp"
#include "davos/projects.hpp"
#include "davos/session.hpp"

// JSON documents exchanged with the CLI. Every top-level document carries
// "v": protocol_version; the shapes are pinned by schemas/*.json.
namespace davos::protocol
{
    using json = nlohmann::ordered_json;

    inline constexpr int protocol_version = 1;

    // {"v": 1} with `body`'s members appended.
    [[nodiscard]] json document(json body);

    [[nodiscard]] json to_json(const Requirement& req);
    [[nodiscard]] json to_json(const OnionSpec& onion);
    [[nodiscard]] json to_json(const SmuggleStatement& stmt);
    [[nodiscard]] json to_json(const InstalledDist& dist);
    [[nodiscard]] json to_json(const InstallCommand& cmd);
    [[nodiscard]] json to_json(const SmugglePlan& plan);
    [[nodiscard]] json to_json(const PlanOutcome& outcome);
    [[nodiscard]] json to_json(const Project& project);
    [[nodiscard]] json to_json(const SessionState& state);
    [[nodiscard]] json to_json(const ConfigState& config);
    [[nodiscard]] json to_json(const CellInventory& cell);

    [[nodiscard]] json error_document(errc code, std::string_view message, std::optional<std::size_t> line = std::nullopt);

    // Throws InvalidValue on malformed input.
    [[nodiscard]] SessionState session_from_json(const json& doc);

    // Applies a config document on top of `state`. "project" absent keeps
    // the current project, null disables projects, a string names one (its
    // directory is not created).
    void apply_config_json(const json& doc, const ProjectStore& store, ConfigState& state);
}
