#include "davos/metadata.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "davos/requirement.hpp"
#include "strings.hpp"

namespace davos
{
    namespace
    {
        std::optional<std::string> read_file(const fs::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                return std::nullopt;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        // Header block of a METADATA / PKG-INFO file.
        std::map<std::string, std::string> parse_headers(std::string_view text)
        {
            std::map<std::string, std::string> headers;
            std::string last;
            std::size_t start = 0;
            while (start <= text.size())
            {
                auto end = text.find('\n', start);
                if (end == std::string_view::npos)
                {
                    end = text.size();
                }
                std::string_view line = text.substr(start, end - start);
                if (line.ends_with('\r'))
                {
                    line.remove_suffix(1);
                }
                start = end + 1;
                if (detail::trim(line).empty())
                {
                    break;
                }
                if (detail::is_space(line.front()))
                {
                    if (!last.empty())
                    {
                        headers[last] += " " + std::string(detail::trim(line));
                    }
                    continue;
                }
                const auto colon = line.find(':');
                if (colon == std::string_view::npos)
                {
                    continue;
                }
                last = detail::to_lower(detail::trim(line.substr(0, colon)));
                // First occurrence wins; later duplicates are multi-use
                // fields we do not need.
                headers.emplace(last, std::string(detail::trim(line.substr(colon + 1))));
            }
            return headers;
        }

        bool is_identifier(std::string_view s)
        {
            if (s.empty() || detail::is_digit(s.front()))
            {
                return false;
            }
            return std::all_of(
                s.begin(),
                s.end(),
                [](char c) { return detail::is_alnum(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80; }
            );
        }

        std::string first_csv_field(std::string_view line)
        {
            if (line.starts_with('"'))
            {
                std::string out;
                for (std::size_t i = 1; i < line.size(); ++i)
                {
                    if (line[i] == '"')
                    {
                        if (i + 1 < line.size() && line[i + 1] == '"')
                        {
                            out += '"';
                            ++i;
                            continue;
                        }
                        break;
                    }
                    out += line[i];
                }
                return out;
            }
            return std::string(line.substr(0, line.find(',')));
        }

        std::vector<std::string> record_paths(const fs::path& metadata_dir)
        {
            std::vector<std::string> paths;
            const auto text = read_file(metadata_dir / "RECORD");
            if (!text)
            {
                return paths;
            }
            std::istringstream in(*text);
            std::string line;
            while (std::getline(in, line))
            {
                if (line.ends_with('\r'))
                {
                    line.pop_back();
                }
                if (!line.empty())
                {
                    paths.push_back(first_csv_field(line));
                }
            }
            return paths;
        }

        std::vector<std::string> modules_from_record(const fs::path& metadata_dir)
        {
            std::set<std::string> modules;
            for (const auto& path : record_paths(metadata_dir))
            {
                if (path.empty() || path.starts_with("/") || path.starts_with(".."))
                {
                    continue;
                }
                const auto slash = path.find('/');
                if (slash != std::string::npos)
                {
                    const auto head = std::string_view(path).substr(0, slash);
                    if (head.ends_with(".dist-info") || head.ends_with(".egg-info") || head.ends_with(".data")
                        || head == "__pycache__" || head == "bin")
                    {
                        continue;
                    }
                    if (is_identifier(head))
                    {
                        modules.emplace(head);
                    }
                    continue;
                }
                std::string_view file = path;
                if (file.ends_with(".py"))
                {
                    file.remove_suffix(3);
                }
                else if (file.ends_with(".so") || file.ends_with(".pyd"))
                {
                    file = file.substr(0, file.find('.'));
                }
                else
                {
                    continue;
                }
                if (is_identifier(file))
                {
                    modules.emplace(file);
                }
            }
            return {modules.begin(), modules.end()};
        }

        std::vector<std::string> modules_from_top_level(const std::string& text)
        {
            std::set<std::string> modules;
            std::istringstream in(text);
            std::string line;
            while (std::getline(in, line))
            {
                auto name = detail::trim(line);
                name = name.substr(0, name.find('/'));
                if (is_identifier(name))
                {
                    modules.emplace(name);
                }
            }
            return {modules.begin(), modules.end()};
        }

        bool is_metadata_entry(const fs::path& path)
        {
            const auto ext = path.extension();
            return ext == ".dist-info" || ext == ".egg-info";
        }

        // Lexical containment check; `path` must be absolute.
        bool is_within(const fs::path& path, const fs::path& root)
        {
            const auto p = path.lexically_normal();
            const auto r = root.lexically_normal();
            auto rel = p.lexically_relative(r);
            return !rel.empty() && *rel.begin() != ".." && rel != ".";
        }
    }

    SearchScope SearchScope::make(const std::optional<fs::path>& project_dir, const std::vector<fs::path>& env_dirs)
    {
        SearchScope scope;
        if (project_dir)
        {
            scope.dirs.push_back(*project_dir);
        }
        for (const auto& dir : env_dirs)
        {
            if (std::find(scope.dirs.begin(), scope.dirs.end(), dir) == scope.dirs.end())
            {
                scope.dirs.push_back(dir);
            }
        }
        return scope;
    }

    const InstalledDist* Catalog::find(std::string_view dist_name) const
    {
        const auto it = m_dists.find(normalize_dist_name(dist_name));
        return it == m_dists.end() ? nullptr : &it->second;
    }

    std::optional<InstalledDist>
    read_distribution(const fs::path& metadata_dir, const fs::path& location, std::string* problem)
    {
        auto report = [&](std::string message) -> std::optional<InstalledDist>
        {
            if (problem != nullptr)
            {
                *problem = std::move(message);
            }
            return std::nullopt;
        };

        std::error_code ec;
        const bool is_dir = fs::is_directory(metadata_dir, ec);
        std::optional<std::string> text;
        if (metadata_dir.extension() == ".dist-info")
        {
            text = read_file(metadata_dir / "METADATA");
        }
        else
        {
            text = is_dir ? read_file(metadata_dir / "PKG-INFO") : read_file(metadata_dir);
        }
        if (!text)
        {
            return report("metadata file missing or unreadable");
        }

        const auto headers = parse_headers(*text);
        InstalledDist dist;
        dist.location = location;
        dist.metadata_dir = metadata_dir;

        if (auto it = headers.find("name"); it != headers.end() && !it->second.empty())
        {
            dist.display_name = it->second;
        }
        else
        {
            const auto stem = metadata_dir.stem().string();
            dist.display_name = stem.substr(0, stem.find('-'));
        }
        dist.dist_name = normalize_dist_name(dist.display_name);

        const auto version = headers.find("version");
        if (version == headers.end() || version->second.empty())
        {
            return report("metadata has no Version field");
        }
        dist.version_text = version->second;
        dist.version = Version::try_parse(dist.version_text);

        if (is_dir)
        {
            if (auto top = read_file(metadata_dir / "top_level.txt"))
            {
                dist.top_level_modules = modules_from_top_level(*top);
            }
            if (dist.top_level_modules.empty())
            {
                dist.top_level_modules = modules_from_record(metadata_dir);
            }
        }
        if (dist.top_level_modules.empty())
        {
            dist.top_level_modules.push_back(dist_to_module_name(dist.dist_name));
        }
        return dist;
    }

    Catalog scan(const SearchScope& scope)
    {
        Catalog catalog;
        for (std::size_t index = 0; index < scope.dirs.size(); ++index)
        {
            const auto& dir = scope.dirs[index];
            std::error_code ec;
            if (!fs::is_directory(dir, ec))
            {
                continue;
            }
            std::vector<fs::path> entries;
            for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
            {
                if (is_metadata_entry(it->path()))
                {
                    entries.push_back(it->path());
                }
            }
            if (ec)
            {
                catalog.m_diagnostics.push_back({dir, fmt::format("cannot list directory: {}", ec.message())});
                continue;
            }
            std::sort(entries.begin(), entries.end());

            for (const auto& entry : entries)
            {
                std::string problem;
                auto dist = read_distribution(entry, dir, &problem);
                if (!dist)
                {
                    catalog.m_diagnostics.push_back({entry, problem});
                    continue;
                }
                dist->scope_index = index;
                auto [it, inserted] = catalog.m_dists.try_emplace(dist->dist_name, *dist);
                if (!inserted && it->second.scope_index == index)
                {
                    catalog.m_diagnostics.push_back(
                        {entry,
                         fmt::format(
                             "duplicate metadata for '{}' in one directory; using {}",
                             dist->dist_name,
                             it->second.metadata_dir.filename().string()
                         )}
                    );
                }
            }
        }
        return catalog;
    }

    Resolution resolve_import(std::string_view module_name, const Catalog& catalog)
    {
        const std::string top(module_name.substr(0, module_name.find('.')));
        std::vector<const InstalledDist*> claimants;
        for (const auto& [name, dist] : catalog.dists())
        {
            if (std::find(dist.top_level_modules.begin(), dist.top_level_modules.end(), top)
                != dist.top_level_modules.end())
            {
                claimants.push_back(&dist);
            }
        }

        Resolution result;
        if (claimants.empty())
        {
            if (const auto* dist = catalog.find(top))
            {
                result.dist = *dist;
            }
            return result;
        }

        // Map iteration is by name, so the first minimum is also the
        // lexicographically smallest name.
        const auto* best = *std::min_element(
            claimants.begin(),
            claimants.end(),
            [](const InstalledDist* a, const InstalledDist* b) { return a->scope_index < b->scope_index; }
        );
        const auto ties = std::count_if(
            claimants.begin(),
            claimants.end(),
            [&](const InstalledDist* d) { return d->scope_index == best->scope_index; }
        );
        if (ties > 1)
        {
            result.diagnostic = fmt::format(
                "{} distributions in {} provide module '{}'; using '{}'",
                ties,
                best->location.string(),
                top,
                best->dist_name
            );
        }
        result.dist = *best;
        return result;
    }

    std::optional<InstalledDist> resolve_import_name(std::string_view module_name, const Catalog& catalog)
    {
        return resolve_import(module_name, catalog).dist;
    }

    std::vector<fs::path> recorded_files(const InstalledDist& dist)
    {
        std::vector<fs::path> out;
        for (const auto& path : record_paths(dist.metadata_dir))
        {
            out.emplace_back(path);
        }
        return out;
    }

    void remove_distribution(const InstalledDist& dist)
    {
        const fs::path root = fs::absolute(dist.location);
        std::set<fs::path> parents;
        std::error_code ec;

        auto files = recorded_files(dist);
        if (files.empty())
        {
            for (const auto& module : dist.top_level_modules)
            {
                files.emplace_back(module);
                files.emplace_back(module + ".py");
            }
        }
        for (const auto& rel : files)
        {
            const auto target = (root / rel).lexically_normal();
            if (!is_within(target, root))
            {
                continue;
            }
            fs::remove_all(target, ec);
            for (auto parent = target.parent_path(); is_within(parent, root); parent = parent.parent_path())
            {
                parents.insert(parent);
            }
        }
        const auto meta = fs::absolute(dist.metadata_dir).lexically_normal();
        if (is_within(meta, root))
        {
            fs::remove_all(meta, ec);
        }
        // Deepest first so nested empty directories collapse.
        for (auto it = parents.rbegin(); it != parents.rend(); ++it)
        {
            const auto pycache = *it / "__pycache__";
            if (fs::is_directory(pycache, ec))
            {
                fs::remove_all(pycache, ec);
            }
            if (fs::is_directory(*it, ec) && fs::is_empty(*it, ec))
            {
                fs::remove(*it, ec);
            }
        }
    }
}
