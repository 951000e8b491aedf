#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace davos
{
    // What the running interpreter already has, as reported by the caller.
    struct SessionState
    {
        // Imported top-level module -> version text (nullopt when unknown).
        std::map<std::string, std::optional<std::string>> loaded;
        // Modules the interpreter can import even without package metadata.
        std::vector<std::string> importable;
        // dist name -> raw onion arguments, in first-execution order.
        std::vector<std::pair<std::string, std::optional<std::string>>> smuggled;

        bool operator==(const SessionState&) const = default;
    };
}
