#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "davos/metadata.hpp"

namespace davos
{
    namespace fs = std::filesystem;

    inline constexpr std::string_view fallback_project_name = "davos-fallback";
    inline constexpr std::string_view project_root_env = "DAVOS_PROJECT_ROOT";

    enum class project_kind
    {
        notebook_specific,
        notebook_agnostic,
        abstract,  // notebook-specific, but the notebook no longer exists
        fallback,
    };

    [[nodiscard]] std::string_view to_string(project_kind kind) noexcept;

    // Percent-encodes every byte outside the RFC 3986 unreserved set. A
    // leading '.' is encoded too so no name maps to ".", ".." or a hidden
    // directory.
    [[nodiscard]] std::string encode_project_name(std::string_view name);

    // nullopt unless `encoded` is exactly what encode_project_name produces
    // for some name.
    [[nodiscard]] std::optional<std::string> decode_project_name(std::string_view encoded);

    // True for absolute paths to ``.ipynb`` files.
    [[nodiscard]] bool is_notebook_path(std::string_view name);

    // Kind of a project name, checking the notebook's existence now.
    [[nodiscard]] project_kind classify_project(std::string_view name);

    struct Project
    {
        std::string name;
        fs::path dir;
        project_kind kind = project_kind::notebook_agnostic;

        [[nodiscard]] bool exists() const;

        bool operator==(const Project& other) const
        {
            return name == other.name && dir == other.dir;
        }
    };

    struct PruneReport
    {
        std::vector<Project> deleted;
        std::vector<Project> kept;
    };

    // Exclusive advisory lock on one project, held for the object's lifetime.
    class ProjectLock
    {
    public:

        explicit ProjectLock(const fs::path& lock_file);
        ~ProjectLock();

        ProjectLock(ProjectLock&& other) noexcept;
        ProjectLock& operator=(ProjectLock&& other) noexcept;
        ProjectLock(const ProjectLock&) = delete;
        ProjectLock& operator=(const ProjectLock&) = delete;

    private:

        int m_fd = -1;
    };

    /**
     * The directory tree holding every project:
     *
     *     <root>/projects/<encoded-name>/   one package tree per project
     *     <root>/locks/<encoded-name>.lock  advisory locks
     *
     * Nothing here writes outside `root`.
     */
    class ProjectStore
    {
    public:

        explicit ProjectStore(fs::path root);

        // $DAVOS_PROJECT_ROOT, else ~/.davos.
        static ProjectStore from_environment();

        [[nodiscard]] const fs::path& root() const noexcept
        {
            return m_root;
        }

        [[nodiscard]] fs::path projects_dir() const
        {
            return m_root / "projects";
        }

        // Describes the project for `name` without touching the disk.
        [[nodiscard]] Project make(std::string_view name) const;

        // The notebook's own project, or the shared fallback project (with a
        // warning) when the notebook is unknown. The directory is created
        // lazily by the first install.
        [[nodiscard]] Project project_for_notebook(
            const std::optional<fs::path>& notebook,
            std::vector<std::string>* warnings = nullptr
        ) const;

        [[nodiscard]] std::optional<Project> get_project(std::string_view name, bool create) const;

        [[nodiscard]] std::vector<Project> list_all(std::vector<Diagnostic>* diagnostics = nullptr) const;

        // Deletes abstract projects: all of them with `yes`, else those the
        // user confirms. Non-interactive use requires `yes`.
        PruneReport
        prune(bool yes, bool interactive, const std::function<bool(const Project&)>& confirm = {}) const;

        void remove(const Project& project) const;
        [[nodiscard]] Project rename(const Project& project, std::string_view new_name) const;
        [[nodiscard]] std::vector<std::pair<std::string, std::string>> installed_packages(const Project& project) const;
        // Deletes the project directory if no distribution is installed in it.
        bool clean_if_empty(const Project& project) const;

        void ensure_created(const Project& project) const;
        [[nodiscard]] ProjectLock lock(const Project& project) const;

    private:

        void check_writable() const;

        fs::path m_root;
    };
}
