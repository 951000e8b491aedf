#include "fixtures.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "davos/cli.hpp"
#include "davos/installer.hpp"

namespace fixtures
{
    TempDir::TempDir(const std::string& tag)
    {
        const char* base = std::getenv("TMPDIR");
        std::string pattern = fmt::format("{}/{}-XXXXXX", base != nullptr ? base : "/tmp", tag);
        if (::mkdtemp(pattern.data()) == nullptr)
        {
            throw std::runtime_error("mkdtemp failed for " + pattern);
        }
        m_path = fs::path(pattern);
    }

    TempDir::~TempDir()
    {
        std::error_code ec;
        fs::remove_all(m_path, ec);
    }

    std::string read_file(const fs::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw std::runtime_error("cannot read " + path.string());
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write_file(const fs::path& path, const std::string& text)
    {
        if (path.has_parent_path())
        {
            fs::create_directories(path.parent_path());
        }
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out)
        {
            throw std::runtime_error("cannot write " + path.string());
        }
    }

    std::string tree_digest(const fs::path& root)
    {
        std::vector<fs::path> entries;
        if (fs::exists(root))
        {
            for (const auto& entry : fs::recursive_directory_iterator(root))
            {
                entries.push_back(entry.path());
            }
        }
        std::sort(entries.begin(), entries.end());

        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
        auto feed = [ctx](const std::string& bytes) { EVP_DigestUpdate(ctx, bytes.data(), bytes.size()); };
        feed(fs::exists(root) ? "present" : "absent");
        for (const auto& path : entries)
        {
            const auto status = fs::symlink_status(path);
            feed(fs::relative(path, root).string());
            feed(fmt::format("|{}:{:o}|", static_cast<int>(status.type()), static_cast<unsigned>(status.permissions())));
            if (fs::is_regular_file(status))
            {
                feed(read_file(path));
            }
            else if (fs::is_symlink(status))
            {
                feed(fs::read_symlink(path).string());
            }
        }
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int size = 0;
        EVP_DigestFinal_ex(ctx, digest, &size);
        EVP_MD_CTX_free(ctx);

        std::string hex;
        for (unsigned int i = 0; i < size; ++i)
        {
            hex += fmt::format("{:02x}", digest[i]);
        }
        return hex;
    }

    fs::path write_dist(const fs::path& site, const DistLayout& layout)
    {
        std::string module = layout.name;
        std::replace(module.begin(), module.end(), '-', '_');
        const auto tops = layout.top_levels.empty() ? std::vector<std::string>{module} : layout.top_levels;

        const auto info = site / fmt::format("{}-{}.dist-info", module, layout.version);
        std::string metadata = fmt::format("Metadata-Version: 2.1\nName: {}\n", layout.name);
        if (!layout.omit_version)
        {
            metadata += fmt::format("Version: {}\n", layout.version);
        }
        write_file(info / "METADATA", metadata);

        std::string record;
        for (const auto& top : tops)
        {
            write_file(site / top / "__init__.py", fmt::format("__version__ = \"{}\"\n", layout.version));
            record += fmt::format("{}/__init__.py,,\n", top);
        }
        if (layout.write_top_level)
        {
            std::string listing;
            for (const auto& top : tops)
            {
                listing += top + "\n";
            }
            write_file(info / "top_level.txt", listing);
        }
        if (layout.write_record)
        {
            record += fmt::format("{}/METADATA,,\n", info.filename().string());
            record += fmt::format("{}/RECORD,,\n", info.filename().string());
            write_file(info / "RECORD", record);
        }
        return info;
    }

    fs::path fixtures_dir()
    {
        return fs::path(DAVOS_TEST_FIXTURES);
    }

    fs::path golden_dir()
    {
        return fs::path(DAVOS_GOLDEN);
    }

    fs::path schema_dir()
    {
        return fs::path(DAVOS_SCHEMAS);
    }

    fs::path davos_binary()
    {
        return fs::path(DAVOS_BINARY);
    }

    std::string python()
    {
        return DAVOS_PYTHON;
    }

    void build_wheels(const fs::path& outdir, const std::vector<std::pair<std::string, std::string>>& specs)
    {
        std::vector<std::string> argv = {python(), (fixtures_dir() / "make_wheel.py").string(), outdir.string()};
        for (const auto& [name, version] : specs)
        {
            argv.push_back(name);
            argv.push_back(version);
        }
        const auto result = davos::run_process(argv);
        if (result.exit_code != 0)
        {
            throw std::runtime_error("make_wheel.py failed: " + result.err);
        }
    }

    std::vector<bool> python_syntax_ok(const std::vector<std::string>& sources)
    {
        TempDir dir("davos-ast");
        write_file(dir / "sources.json", nlohmann::json(sources).dump());
        const auto result = davos::run_process(
            {python(), (fixtures_dir() / "ast_check.py").string(), (dir / "sources.json").string()}
        );
        if (result.exit_code != 0)
        {
            throw std::runtime_error("ast_check.py failed: " + result.err);
        }
        return nlohmann::json::parse(result.out).get<std::vector<bool>>();
    }

    std::vector<std::string> schema_errors(const std::vector<std::pair<std::string, nlohmann::ordered_json>>& docs)
    {
        nlohmann::ordered_json items = nlohmann::ordered_json::array();
        for (const auto& [schema, doc] : docs)
        {
            items.push_back({{"schema", schema}, {"doc", doc}});
        }
        TempDir dir("davos-schema");
        write_file(dir / "items.json", items.dump());
        const auto result = davos::run_process(
            {"/bin/sh",
             "-c",
             "exec \"$0\" \"$1\" \"$2\" < \"$3\"",
             python(),
             (fixtures_dir() / "validate_schema.py").string(),
             schema_dir().string(),
             (dir / "items.json").string()}
        );
        if (result.exit_code != 0)
        {
            throw std::runtime_error("validate_schema.py failed: " + result.err);
        }
        std::vector<std::string> errors;
        for (const auto& entry : nlohmann::json::parse(result.out))
        {
            errors.push_back(entry.is_null() ? std::string() : entry.get<std::string>());
        }
        return errors;
    }

    std::vector<std::pair<fs::path, std::string>> stdlib_sources(std::size_t min_lines)
    {
        const auto where = davos::run_process({python(), "-c", "import sysconfig; print(sysconfig.get_paths()['stdlib'])"});
        std::string dir = where.out;
        while (!dir.empty() && (dir.back() == '\n' || dir.back() == '\r'))
        {
            dir.pop_back();
        }
        const fs::path stdlib(dir);
        std::vector<std::pair<fs::path, std::string>> out;
        std::size_t lines = 0;
        for (const char* name : {"textwrap.py", "argparse.py", "json/decoder.py", "json/encoder.py", "fnmatch.py", "shlex.py", "dataclasses.py"})
        {
            const auto path = stdlib / name;
            if (!fs::exists(path))
            {
                continue;
            }
            auto text = read_file(path);
            lines += static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
            out.emplace_back(path, std::move(text));
            if (lines >= min_lines)
            {
                break;
            }
        }
        return out;
    }

    ScopedEnv::ScopedEnv(std::string name, std::optional<std::string> value)
        : m_name(std::move(name))
    {
        if (const char* old = std::getenv(m_name.c_str()))
        {
            m_old = old;
        }
        if (value)
        {
            ::setenv(m_name.c_str(), value->c_str(), 1);
        }
        else
        {
            ::unsetenv(m_name.c_str());
        }
    }

    ScopedEnv::~ScopedEnv()
    {
        if (m_old)
        {
            ::setenv(m_name.c_str(), m_old->c_str(), 1);
        }
        else
        {
            ::unsetenv(m_name.c_str());
        }
    }

    CliRun cli(const std::vector<std::string>& args, const std::string& input)
    {
        std::istringstream in(input);
        std::ostringstream out;
        std::ostringstream err;
        CliRun run;
        run.code = davos::cli_main(args, in, out, err);
        run.out = out.str();
        run.err = err.str();
        return run;
    }

    CliRun cli_process(const std::vector<std::string>& args, const std::vector<std::pair<std::string, std::string>>& env)
    {
        std::vector<std::string> argv = {davos_binary().string()};
        argv.insert(argv.end(), args.begin(), args.end());
        davos::ProcessOptions options;
        options.env = env;
        const auto result = davos::run_process(argv, options);
        return {result.exit_code, result.out, result.err};
    }
}
