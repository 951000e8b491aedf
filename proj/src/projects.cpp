#include "davos/projects.hpp"

#include <algorithm>
#include <cstdlib>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fmt/format.h>

#include "davos/error.hpp"

namespace davos
{
    namespace
    {
        constexpr std::size_t max_dir_name = 255;

        bool is_unreserved(char c) noexcept
        {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-'
                   || c == '.' || c == '_' || c == '~';
        }

        int hex_value(char c) noexcept
        {
            if (c >= '0' && c <= '9')
            {
                return c - '0';
            }
            if (c >= 'A' && c <= 'F')
            {
                return c - 'A' + 10;
            }
            return -1;
        }

        fs::path lock_path(const fs::path& root, const Project& project)
        {
            return root / "locks" / (project.dir.filename().string() + ".lock");
        }
    }

    std::string_view to_string(project_kind kind) noexcept
    {
        switch (kind)
        {
            case project_kind::notebook_specific:
                return "NOTEBOOK_SPECIFIC";
            case project_kind::notebook_agnostic:
                return "NOTEBOOK_AGNOSTIC";
            case project_kind::abstract:
                return "ABSTRACT";
            case project_kind::fallback:
                return "FALLBACK";
        }
        return "";
    }

    std::string encode_project_name(std::string_view name)
    {
        static constexpr char hex[] = "0123456789ABCDEF";
        std::string out;
        out.reserve(name.size() * 3);
        for (std::size_t i = 0; i < name.size(); ++i)
        {
            const char c = name[i];
            if (is_unreserved(c) && !(i == 0 && c == '.'))
            {
                out += c;
            }
            else
            {
                const auto byte = static_cast<unsigned char>(c);
                out += '%';
                out += hex[byte >> 4];
                out += hex[byte & 0xF];
            }
        }
        return out;
    }

    std::optional<std::string> decode_project_name(std::string_view encoded)
    {
        std::string out;
        out.reserve(encoded.size());
        for (std::size_t i = 0; i < encoded.size(); ++i)
        {
            if (encoded[i] != '%')
            {
                out += encoded[i];
                continue;
            }
            if (i + 2 >= encoded.size())
            {
                return std::nullopt;
            }
            const int hi = hex_value(encoded[i + 1]);
            const int lo = hex_value(encoded[i + 2]);
            if (hi < 0 || lo < 0)
            {
                return std::nullopt;
            }
            out += static_cast<char>((hi << 4) | lo);
            i += 2;
        }
        if (out.empty() || encode_project_name(out) != encoded)
        {
            return std::nullopt;
        }
        return out;
    }

    bool is_notebook_path(std::string_view name)
    {
        return name.size() > 7 && name.front() == '/' && name.ends_with(".ipynb");
    }

    project_kind classify_project(std::string_view name)
    {
        if (name == fallback_project_name)
        {
            return project_kind::fallback;
        }
        if (is_notebook_path(name))
        {
            std::error_code ec;
            return fs::exists(fs::path(name), ec) ? project_kind::notebook_specific : project_kind::abstract;
        }
        return project_kind::notebook_agnostic;
    }

    bool Project::exists() const
    {
        std::error_code ec;
        return fs::is_directory(dir, ec);
    }

    ProjectLock::ProjectLock(const fs::path& lock_file)
    {
        m_fd = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (m_fd < 0)
        {
            throw error(errc::io_error, fmt::format("Cannot open lock file {}", lock_file.string()));
        }
        while (::flock(m_fd, LOCK_EX) != 0)
        {
            if (errno != EINTR)
            {
                ::close(m_fd);
                m_fd = -1;
                throw error(errc::io_error, fmt::format("Cannot lock {}", lock_file.string()));
            }
        }
    }

    ProjectLock::~ProjectLock()
    {
        if (m_fd >= 0)
        {
            ::flock(m_fd, LOCK_UN);
            ::close(m_fd);
        }
    }

    ProjectLock::ProjectLock(ProjectLock&& other) noexcept
        : m_fd(std::exchange(other.m_fd, -1))
    {
    }

    ProjectLock& ProjectLock::operator=(ProjectLock&& other) noexcept
    {
        if (this != &other)
        {
            if (m_fd >= 0)
            {
                ::flock(m_fd, LOCK_UN);
                ::close(m_fd);
            }
            m_fd = std::exchange(other.m_fd, -1);
        }
        return *this;
    }

    ProjectStore::ProjectStore(fs::path root)
        : m_root(fs::absolute(std::move(root)).lexically_normal())
    {
    }

    ProjectStore ProjectStore::from_environment()
    {
        if (const char* root = std::getenv(project_root_env.data()); root != nullptr && *root != '\0')
        {
            return ProjectStore(root);
        }
        const char* home = std::getenv("HOME");
        return ProjectStore(fs::path(home != nullptr ? home : ".") / ".davos");
    }

    Project ProjectStore::make(std::string_view name) const
    {
        if (name.empty())
        {
            throw error(errc::empty_name, "Project names must not be empty");
        }
        auto encoded = encode_project_name(name);
        if (encoded.size() > max_dir_name)
        {
            throw error(
                errc::project_name_too_long,
                fmt::format("Project name is too long to store on disk ({} bytes encoded)", encoded.size())
            );
        }
        return Project{std::string(name), projects_dir() / encoded, classify_project(name)};
    }

    void ProjectStore::check_writable() const
    {
        // The nearest existing ancestor decides whether the tree can be made.
        fs::path probe = projects_dir();
        std::error_code ec;
        while (!fs::exists(probe, ec) && probe.has_parent_path() && probe != probe.parent_path())
        {
            probe = probe.parent_path();
        }
        if (!fs::is_directory(probe, ec) || ::access(probe.c_str(), W_OK | X_OK) != 0)
        {
            throw error(
                errc::project_root_unwritable,
                fmt::format("Project root {} is not writable", m_root.string())
            );
        }
    }

    Project
    ProjectStore::project_for_notebook(const std::optional<fs::path>& notebook, std::vector<std::string>* warnings) const
    {
        check_writable();
        if (!notebook || notebook->empty())
        {
            if (warnings != nullptr)
            {
                warnings->push_back(fmt::format(
                    "Could not determine the notebook's path; using the shared '{}' project",
                    fallback_project_name
                ));
            }
            return make(fallback_project_name);
        }
        std::error_code ec;
        fs::path path = fs::absolute(*notebook, ec);
        // Symlinks resolve to the real file, so links to one notebook share
        // a project.
        auto canonical = fs::weakly_canonical(path, ec);
        if (!ec)
        {
            path = canonical;
        }
        return make(path.lexically_normal().string());
    }

    std::optional<Project> ProjectStore::get_project(std::string_view name, bool create) const
    {
        Project project = make(name);
        if (project.exists())
        {
            return project;
        }
        if (!create)
        {
            return std::nullopt;
        }
        ensure_created(project);
        return project;
    }

    std::vector<Project> ProjectStore::list_all(std::vector<Diagnostic>* diagnostics) const
    {
        std::vector<Project> out;
        std::error_code ec;
        const auto dir = projects_dir();
        if (!fs::is_directory(dir, ec))
        {
            return out;
        }
        for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
        {
            if (!it->is_directory(ec))
            {
                continue;
            }
            const auto encoded = it->path().filename().string();
            auto name = decode_project_name(encoded);
            if (!name)
            {
                if (diagnostics != nullptr)
                {
                    diagnostics->push_back({it->path(), "directory name is not a project name encoding; ignored"});
                }
                continue;
            }
            out.push_back(Project{*name, it->path(), classify_project(*name)});
        }
        std::sort(out.begin(), out.end(), [](const Project& a, const Project& b) { return a.name < b.name; });
        return out;
    }

    PruneReport
    ProjectStore::prune(bool yes, bool interactive, const std::function<bool(const Project&)>& confirm) const
    {
        if (!yes && !interactive)
        {
            throw error(
                errc::noninteractive_requires_yes,
                "Pruning projects in non-interactive mode requires explicit confirmation (yes=true / --yes)"
            );
        }
        PruneReport report;
        for (const auto& project : list_all())
        {
            if (project.kind != project_kind::abstract)
            {
                continue;
            }
            if (yes || (confirm && confirm(project)))
            {
                remove(project);
                report.deleted.push_back(project);
            }
            else
            {
                report.kept.push_back(project);
            }
        }
        return report;
    }

    void ProjectStore::remove(const Project& project) const
    {
        if (!project.exists())
        {
            return;
        }
        {
            auto held = lock(project);
            std::error_code ec;
            fs::remove_all(project.dir, ec);
            if (ec)
            {
                throw error(errc::io_error, fmt::format("Cannot remove {}: {}", project.dir.string(), ec.message()));
            }
        }
        std::error_code ec;
        fs::remove(lock_path(m_root, project), ec);
    }

    Project ProjectStore::rename(const Project& project, std::string_view new_name) const
    {
        Project target = make(new_name);
        if (target.exists())
        {
            throw error(errc::project_exists, fmt::format("A project named '{}' already exists", new_name));
        }
        if (project.exists())
        {
            auto held = lock(project);
            std::error_code ec;
            fs::rename(project.dir, target.dir, ec);
            if (ec)
            {
                throw error(errc::io_error, fmt::format("Cannot rename project: {}", ec.message()));
            }
        }
        return target;
    }

    std::vector<std::pair<std::string, std::string>> ProjectStore::installed_packages(const Project& project) const
    {
        std::vector<std::pair<std::string, std::string>> out;
        const auto catalog = scan(SearchScope{{project.dir}});
        for (const auto& [name, dist] : catalog.dists())
        {
            out.emplace_back(name, dist.version_text);
        }
        return out;
    }

    bool ProjectStore::clean_if_empty(const Project& project) const
    {
        if (!project.exists() || !scan(SearchScope{{project.dir}}).empty())
        {
            return false;
        }
        remove(project);
        return true;
    }

    void ProjectStore::ensure_created(const Project& project) const
    {
        check_writable();
        std::error_code ec;
        fs::create_directories(project.dir, ec);
        if (ec)
        {
            throw error(
                errc::project_root_unwritable,
                fmt::format("Cannot create project directory {}: {}", project.dir.string(), ec.message())
            );
        }
    }

    ProjectLock ProjectStore::lock(const Project& project) const
    {
        std::error_code ec;
        fs::create_directories(m_root / "locks", ec);
        return ProjectLock(lock_path(m_root, project));
    }
}
