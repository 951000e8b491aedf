#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "davos/version.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    struct InstalledDist
    {
        std::string dist_name;     // normalized
        std::string display_name;  // as written in the metadata
        std::string version_text;
        // nullopt when the metadata version does not parse.
        std::optional<Version> version;
        fs::path location;
        std::vector<std::string> top_level_modules;
        fs::path metadata_dir;
        // Position of `location` in the scope that produced this entry.
        std::size_t scope_index = 0;

        bool operator==(const InstalledDist& other) const
        {
            return dist_name == other.dist_name && version_text == other.version_text && location == other.location
                   && top_level_modules == other.top_level_modules && metadata_dir == other.metadata_dir;
        }
    };

    // Ordered package directories: the project directory (when enabled)
    // first, then the environment's directories.
    struct SearchScope
    {
        std::vector<fs::path> dirs;

        static SearchScope make(const std::optional<fs::path>& project_dir, const std::vector<fs::path>& env_dirs);
    };

    struct Diagnostic
    {
        fs::path path;
        std::string message;
    };

    // Snapshot of the distributions visible in a scope, keyed by normalized
    // distribution name. When a name occurs in several directories the
    // earliest directory wins.
    class Catalog
    {
    public:

        [[nodiscard]] const InstalledDist* find(std::string_view dist_name) const;

        [[nodiscard]] const std::map<std::string, InstalledDist>& dists() const noexcept
        {
            return m_dists;
        }

        [[nodiscard]] const std::vector<Diagnostic>& diagnostics() const noexcept
        {
            return m_diagnostics;
        }

        [[nodiscard]] bool empty() const noexcept
        {
            return m_dists.empty();
        }

        bool operator==(const Catalog& other) const
        {
            return m_dists == other.m_dists;
        }

    private:

        friend Catalog scan(const SearchScope& scope);

        std::map<std::string, InstalledDist> m_dists;
        std::vector<Diagnostic> m_diagnostics;
    };

    // Missing directories are skipped; unreadable or incomplete metadata is
    // skipped with a diagnostic.
    [[nodiscard]] Catalog scan(const SearchScope& scope);

    // Reads one ``*.dist-info`` or ``*.egg-info`` entry.
    [[nodiscard]] std::optional<InstalledDist>
    read_distribution(const fs::path& metadata_dir, const fs::path& location, std::string* problem = nullptr);

    struct Resolution
    {
        std::optional<InstalledDist> dist;
        std::optional<std::string> diagnostic;
    };

    // Finds the distribution providing a top-level module. Only the first
    // dotted segment of `module_name` is used.
    [[nodiscard]] Resolution resolve_import(std::string_view module_name, const Catalog& catalog);

    [[nodiscard]] std::optional<InstalledDist> resolve_import_name(std::string_view module_name, const Catalog& catalog);

    // Paths recorded in the distribution's RECORD, relative to its location.
    [[nodiscard]] std::vector<fs::path> recorded_files(const InstalledDist& dist);

    // Deletes a distribution's files and metadata from its location. Never
    // touches anything outside `dist.location`.
    void remove_distribution(const InstalledDist& dist);

    // True when the first dotted segment names a standard-library module.
    [[nodiscard]] bool is_stdlib_module(std::string_view module_name);
}
