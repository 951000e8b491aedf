#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>

#include <catch2/catch_amalgamated.hpp>

#include "davos/error.hpp"
#include "davos/projects.hpp"

#include "fixtures.hpp"
#include "generators.hpp"

using namespace davos;
using fixtures::TempDir;

namespace
{
    // Reference decoder for checking the encoding from the outside.
    std::string percent_decode(const std::string& text)
    {
        std::string out;
        for (std::size_t i = 0; i < text.size(); ++i)
        {
            if (text[i] == '%' && i + 2 < text.size())
            {
                out += static_cast<char>(std::stoi(text.substr(i + 1, 2), nullptr, 16));
                i += 2;
            }
            else
            {
                out += text[i];
            }
        }
        return out;
    }

    bool filesystem_safe(const std::string& encoded)
    {
        if (encoded.empty() || encoded.front() == '.' || encoded.size() > 255)
        {
            return false;
        }
        return encoded.find_first_not_of(
                   "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-._~%"
               )
               == std::string::npos;
    }

    errc error_code_of(const std::function<void()>& fn)
    {
        try
        {
            fn();
        }
        catch (const error& e)
        {
            return e.code();
        }
        FAIL("no error raised");
        return errc::usage;
    }

    TEST_CASE("project names encode reversibly", "[projects]")
    {
        CHECK(encode_project_name("/home/u/analysis.ipynb") == "%2Fhome%2Fu%2Fanalysis.ipynb");
        CHECK(encode_project_name("shared-env") == "shared-env");
        CHECK(encode_project_name(".hidden") == "%2Ehidden");
        CHECK(encode_project_name("..") == "%2E.");
        CHECK(encode_project_name("a b") == "a%20b");

        CHECK(decode_project_name("%2Fhome%2Fu%2Fanalysis.ipynb") == std::optional<std::string>("/home/u/analysis.ipynb"));
        CHECK_FALSE(decode_project_name("%2fhome").has_value());  // lowercase hex is not canonical
        CHECK_FALSE(decode_project_name("a b").has_value());
        CHECK_FALSE(decode_project_name("%41").has_value());      // 'A' should not be encoded
        CHECK_FALSE(decode_project_name("%zz").has_value());
        CHECK_FALSE(decode_project_name("").has_value());
        CHECK_FALSE(decode_project_name(".x").has_value());
    }

    TEST_CASE("encode/decode is a bijection on random names", "[projects][property]")
    {
        gen::Rng rng(42);
        std::set<std::string> names;
        std::set<std::string> encoded;
        for (int i = 0; i < 1000; ++i)
        {
            const auto name = gen::project_name(rng);
            const auto enc = encode_project_name(name);
            INFO(name << " -> " << enc);
            REQUIRE(decode_project_name(enc) == std::optional<std::string>(name));
            REQUIRE(percent_decode(enc) == name);
            REQUIRE(filesystem_safe(enc));
            if (names.insert(name).second)
            {
                REQUIRE(encoded.insert(enc).second);
            }
        }
    }

    TEST_CASE("project kinds", "[projects]")
    {
        TempDir dir;
        const auto nb = dir / "analysis.ipynb";
        fixtures::write_file(nb, "{}");
        CHECK(classify_project(nb.string()) == project_kind::notebook_specific);
        CHECK(classify_project((dir / "gone.ipynb").string()) == project_kind::abstract);
        CHECK(classify_project("shared-env") == project_kind::notebook_agnostic);
        CHECK(classify_project("relative/path.ipynb") == project_kind::notebook_agnostic);
        CHECK(classify_project("davos-fallback") == project_kind::fallback);
        CHECK(is_notebook_path("/a/b.ipynb"));
        CHECK_FALSE(is_notebook_path("/a/b.py"));
    }

    TEST_CASE("project_for_notebook", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir / "root");
        const auto nb = dir / "work" / "analysis.ipynb";
        fixtures::write_file(nb, "{}");

        std::vector<std::string> warnings;
        const auto p = store.project_for_notebook(nb, &warnings);
        CHECK(p.name == nb.string());
        CHECK(p.kind == project_kind::notebook_specific);
        CHECK(p.dir == store.projects_dir() / encode_project_name(nb.string()));
        CHECK(warnings.empty());
        CHECK(store.project_for_notebook(nb) == p);
        CHECK_FALSE(p.exists());  // created lazily

        // Symlinks resolve to the same project.
        fs::create_symlink(nb, dir / "link.ipynb");
        CHECK(store.project_for_notebook(dir / "link.ipynb") == p);

        const auto fallback = store.project_for_notebook(std::nullopt, &warnings);
        CHECK(fallback.name == "davos-fallback");
        CHECK(fallback.kind == project_kind::fallback);
        CHECK(warnings.size() == 1);
    }

    TEST_CASE("an unwritable root is reported", "[projects]")
    {
        TempDir dir;
        fixtures::write_file(dir / "file", "x");
        const ProjectStore store(dir / "file" / "root");
        CHECK(error_code_of([&] { (void) store.project_for_notebook(std::nullopt); }) == errc::project_root_unwritable);
    }

    TEST_CASE("get_project", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir.path());
        CHECK_FALSE(store.get_project("missing", false).has_value());
        const auto shared = store.get_project("shared-env", true);
        REQUIRE(shared.has_value());
        CHECK(shared->kind == project_kind::notebook_agnostic);
        CHECK(shared->exists());
        CHECK(store.get_project("shared-env", false) == shared);
        CHECK(error_code_of([&] { (void) store.get_project("", true); }) == errc::empty_name);
        CHECK(error_code_of([&] { (void) store.get_project("", false); }) == errc::empty_name);
        CHECK(error_code_of([&] { (void) store.make(std::string(100, '/')); }) == errc::project_name_too_long);
    }

    TEST_CASE("list_all computes kinds fresh", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir / "root");
        CHECK(store.list_all().empty());

        const auto live = dir / "live.ipynb";
        const auto dead = dir / "dead.ipynb";
        fixtures::write_file(live, "{}");
        fixtures::write_file(dead, "{}");
        store.ensure_created(store.project_for_notebook(live));
        store.ensure_created(store.project_for_notebook(dead));
        store.ensure_created(store.make("shared"));
        fs::remove(dead);
        fs::create_directories(store.projects_dir() / "not canonical");

        std::vector<Diagnostic> diagnostics;
        const auto all = store.list_all(&diagnostics);
        REQUIRE(all.size() == 3);
        std::map<std::string, project_kind> kinds;
        for (const auto& p : all)
        {
            kinds[p.name] = p.kind;
        }
        CHECK(kinds[live.string()] == project_kind::notebook_specific);
        CHECK(kinds[dead.string()] == project_kind::abstract);
        CHECK(kinds["shared"] == project_kind::notebook_agnostic);
        CHECK(diagnostics.size() == 1);
    }

    TEST_CASE("prune deletes exactly the abstract projects", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir / "root");
        const auto live = dir / "live.ipynb";
        fixtures::write_file(live, "{}");
        store.ensure_created(store.project_for_notebook(live));
        store.ensure_created(store.project_for_notebook(dir / "gone1.ipynb"));
        store.ensure_created(store.project_for_notebook(dir / "gone2.ipynb"));
        store.ensure_created(store.make("agnostic"));
        store.ensure_created(store.project_for_notebook(std::nullopt));

        CHECK(error_code_of([&] { (void) store.prune(false, false); }) == errc::noninteractive_requires_yes);
        CHECK(store.list_all().size() == 5);

        // Interactive: decline one, accept the other.
        std::vector<std::string> asked;
        const auto partial = store.prune(
            false,
            true,
            [&](const Project& p)
            {
                asked.push_back(p.name);
                return p.name.ends_with("gone1.ipynb");
            }
        );
        CHECK(asked.size() == 2);
        CHECK(partial.deleted.size() == 1);
        CHECK(partial.kept.size() == 1);

        const auto report = store.prune(true, false);
        REQUIRE(report.deleted.size() == 1);
        CHECK(report.deleted[0].name == (dir / "gone2.ipynb").string());

        std::set<std::string> remaining;
        for (const auto& p : store.list_all())
        {
            remaining.insert(p.name);
        }
        CHECK(remaining == std::set<std::string>{live.string(), "agnostic", "davos-fallback"});
        CHECK(store.prune(true, false).deleted.empty());
    }

    TEST_CASE("remove, rename, packages and clean_if_empty", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir / "root");
        const auto p = *store.get_project("work", true);

        fixtures::write_dist(p.dir, {.name = "pkg", .version = "1.0"});
        const auto packages = store.installed_packages(p);
        REQUIRE(packages.size() == 1);
        CHECK(packages[0] == std::pair<std::string, std::string>{"pkg", "1.0"});
        CHECK_FALSE(store.clean_if_empty(p));
        CHECK(p.exists());

        const auto other = *store.get_project("other", true);
        CHECK(error_code_of([&] { (void) store.rename(p, "other"); }) == errc::project_exists);
        const auto renamed = store.rename(p, "renamed");
        CHECK(renamed.dir == store.projects_dir() / "renamed");
        CHECK_FALSE(p.exists());
        CHECK(store.installed_packages(renamed).size() == 1);

        store.remove(renamed);
        CHECK_FALSE(store.get_project("renamed", false).has_value());

        // Empty (or only holding stray files): deleted.
        fixtures::write_file(other.dir / "__pycache__" / "x.pyc", "");
        CHECK(store.clean_if_empty(other));
        CHECK_FALSE(other.exists());
        CHECK_FALSE(store.clean_if_empty(store.make("never-created")));
    }

    TEST_CASE("nothing is written outside the root", "[projects]")
    {
        TempDir dir;
        fixtures::write_file(dir / "sibling" / "f", "x");
        const auto before = fixtures::tree_digest(dir / "sibling");
        const ProjectStore store(dir / "root");
        const auto a = *store.get_project("a", true);
        (void) store.rename(a, "b");
        store.remove(store.make("b"));
        (void) store.prune(true, false);
        (void) store.clean_if_empty(*store.get_project("c", true));
        CHECK(fixtures::tree_digest(dir / "sibling") == before);
        std::set<std::string> top;
        for (const auto& entry : fs::directory_iterator(dir.path()))
        {
            top.insert(entry.path().filename().string());
        }
        CHECK(top == std::set<std::string>{"root", "sibling"});
    }

    TEST_CASE("the project lock excludes a second holder", "[projects]")
    {
        TempDir dir;
        const ProjectStore store(dir.path());
        const auto p = store.make("locked");
        auto first = store.lock(p);
        std::atomic<bool> acquired{false};
        std::thread other(
            [&]
            {
                auto second = store.lock(p);
                acquired = true;
            }
        );
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        CHECK_FALSE(acquired.load());
        {
            auto release = std::move(first);
        }
        other.join();
        CHECK(acquired.load());
    }
}
