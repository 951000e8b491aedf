#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fixtures
{
    namespace fs = std::filesystem;

    // A fresh directory under $TMPDIR, removed with everything in it on
    // destruction.
    class TempDir
    {
    public:

        explicit TempDir(const std::string& tag = "davos-test");
        ~TempDir();

        TempDir(const TempDir&) = delete;
        TempDir& operator=(const TempDir&) = delete;

        [[nodiscard]] const fs::path& path() const noexcept
        {
            return m_path;
        }

        [[nodiscard]] fs::path operator/(const std::string& child) const
        {
            return m_path / child;
        }

    private:

        fs::path m_path;
    };

    [[nodiscard]] std::string read_file(const fs::path& path);
    void write_file(const fs::path& path, const std::string& text);

    // SHA-256 over every entry below `root`: relative path, entry type,
    // permissions and file bytes, in sorted order. A missing root hashes to
    // a fixed value.
    [[nodiscard]] std::string tree_digest(const fs::path& root);

    // Lays out an installed distribution by hand: a module package and a
    // .dist-info directory with METADATA, top_level.txt and RECORD.
    struct DistLayout
    {
        std::string name;
        std::string version;
        std::vector<std::string> top_levels;  // default: name with '-' -> '_'
        bool write_top_level = true;
        bool write_record = true;
        bool omit_version = false;
    };

    fs::path write_dist(const fs::path& site, const DistLayout& layout);

    // Source tree directory holding make_wheel.py and the corpora.
    [[nodiscard]] fs::path fixtures_dir();
    [[nodiscard]] fs::path golden_dir();
    [[nodiscard]] fs::path schema_dir();
    [[nodiscard]] fs::path davos_binary();
    [[nodiscard]] std::string python();

    // Builds stand-in wheels into `outdir` with make_wheel.py.
    void build_wheels(const fs::path& outdir, const std::vector<std::pair<std::string, std::string>>& specs);

    // One python3 run: true for every source that ast.parse accepts.
    [[nodiscard]] std::vector<bool> python_syntax_ok(const std::vector<std::string>& sources);

    // Checks each (schema name, document) pair against schemas/ with the
    // Python jsonschema package. One entry per pair: empty when valid.
    [[nodiscard]] std::vector<std::string> schema_errors(
        const std::vector<std::pair<std::string, nlohmann::ordered_json>>& docs
    );

    // Several stdlib modules' source, for corpora of ordinary code.
    [[nodiscard]] std::vector<std::pair<fs::path, std::string>> stdlib_sources(std::size_t min_lines);

    // Sets (or with nullopt, unsets) an environment variable for the
    // object's lifetime.
    class ScopedEnv
    {
    public:

        ScopedEnv(std::string name, std::optional<std::string> value);
        ~ScopedEnv();

        ScopedEnv(const ScopedEnv&) = delete;
        ScopedEnv& operator=(const ScopedEnv&) = delete;

    private:

        std::string m_name;
        std::optional<std::string> m_old;
    };

    struct CliRun
    {
        int code = 0;
        std::string out;
        std::string err;
    };

    // cli_main in-process.
    [[nodiscard]] CliRun cli(const std::vector<std::string>& args, const std::string& input = {});

    // The davos executable as a child process.
    [[nodiscard]] CliRun cli_process(
        const std::vector<std::string>& args,
        const std::vector<std::pair<std::string, std::string>>& env = {}
    );
}
