#include <optional>
#include <random>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "davos/error.hpp"
#include "davos/notebook.hpp"

#include "fixtures.hpp"

using namespace davos;

namespace
{
    using json = nlohmann::ordered_json;

    json cell(std::string type, json source)
    {
        json c = {{"cell_type", type}, {"metadata", json::object()}, {"source", std::move(source)}};
        if (type == "code")
        {
            c["execution_count"] = nullptr;
            c["outputs"] = json::array();
        }
        return c;
    }

    std::string notebook(json cells, int minor = 5, int indent = 1)
    {
        json doc = {
            {"cells", std::move(cells)},
            {"metadata", {{"kernelspec", {{"name", "python3"}, {"display_name", "Python 3"}}}}},
            {"nbformat", 4},
            {"nbformat_minor", minor},
        };
        return doc.dump(indent) + "\n";
    }

    std::optional<errc> code_of(const std::string& text)
    {
        try
        {
            (void) NotebookDoc::parse(text);
        }
        catch (const error& e)
        {
            return e.code();
        }
        return std::nullopt;
    }

    TEST_CASE("untouched notebooks render byte for byte", "[notebook]")
    {
        const auto text = notebook(json::array({
            cell("markdown", "# Title\n\nSome *text* é"),
            cell("code", json::array({"import os\n", "x = 1"})),
            cell("raw", "raw text"),
        }));
        const auto doc = NotebookDoc::parse(text);
        CHECK(doc.render() == text);
        CHECK(doc.cells().size() == 3);
        CHECK(doc.code_cell_count() == 1);
        CHECK(doc.cells()[1].source == "import os\nx = 1");
        CHECK(doc.cells()[1].source_as_lines);
        CHECK_FALSE(doc.cells()[0].source_as_lines);
        CHECK(doc.format_major() == 4);
        CHECK(doc.format_minor() == 5);

        // Compact and unusual spacing survives too.
        const auto compact = notebook(json::array({cell("code", "a=1")}), 4, -1);
        CHECK(NotebookDoc::parse(compact).render() == compact);
    }

    TEST_CASE("load and save round-trip through files", "[notebook]")
    {
        fixtures::TempDir dir;
        const auto text = notebook(json::array({cell("code", "smuggle numpy as np  # pip: numpy==1.24.3\n")}));
        fixtures::write_file(dir / "a.ipynb", text);
        const auto doc = load_notebook(dir / "a.ipynb");
        save_notebook(doc, dir / "b.ipynb");
        CHECK(fixtures::read_file(dir / "b.ipynb") == text);
        CHECK(load_notebook(dir / "b.ipynb") == doc);
        CHECK_THROWS_AS(load_notebook(dir / "missing.ipynb"), error);
    }

    TEST_CASE("malformed containers", "[notebook]")
    {
        CHECK(code_of("not json") == errc::not_a_notebook);
        CHECK(code_of("[]") == errc::not_a_notebook);
        CHECK(code_of(R"({"nbformat": 4, "nbformat_minor": 2})") == errc::not_a_notebook);
        CHECK(code_of(R"({"cells": [{"cell_type": "code"}], "nbformat": 4, "nbformat_minor": 2})") == errc::not_a_notebook);
        CHECK(code_of(R"({"cells": [{"cell_type": "code", "source": 3}], "nbformat": 4, "nbformat_minor": 2})") == errc::not_a_notebook);
        CHECK(code_of(R"({"cells": [], "nbformat": 3, "nbformat_minor": 0})") == errc::unsupported_format_version);
        CHECK(code_of(R"({"cells": [], "nbformat": 5, "nbformat_minor": 0})") == errc::unsupported_format_version);
        CHECK(code_of(R"({"cells": [], "nbformat": 4, "nbformat_minor": 0})") == std::nullopt);
    }

    TEST_CASE("markdown-only notebooks have no code cells", "[notebook]")
    {
        const auto doc = NotebookDoc::parse(notebook(json::array({cell("markdown", "smuggle numpy")})));
        CHECK(doc.code_cell_count() == 0);
        const auto result = transform_notebook(doc);
        CHECK(result.inventory.empty());
        CHECK(result.doc.render() == doc.render());
    }

    TEST_CASE("transform rewrites code cells only", "[notebook]")
    {
        const auto text = notebook(json::array({
            cell("markdown", "smuggle numpy"),
            cell("code", json::array({"import os\n", "smuggle numpy as np  # pip: numpy==1.24.3\n", "print(np)"})),
            cell("raw", "smuggle raw"),
            cell("code", "from sklearn smuggle svm\nsmuggle pandas as pd"),
            cell("code", "x = 1"),
        }));
        const auto doc = NotebookDoc::parse(text);
        const auto result = transform_notebook(doc);

        REQUIRE(result.inventory.size() == 3);
        CHECK(result.inventory[0].cell_index == 1);
        CHECK(result.inventory[1].cell_index == 3);
        CHECK(result.inventory[2].cell_index == 4);
        CHECK(result.inventory[0].statements.size() == 1);
        CHECK(result.inventory[1].statements.size() == 2);
        CHECK(result.inventory[2].statements.empty());
        CHECK(result.inventory[1].statements[0].form == smuggle_form::from);

        const auto& cells = result.doc.cells();
        REQUIRE(cells.size() == doc.cells().size());
        CHECK(cells[0].source == "smuggle numpy");
        CHECK(cells[2].source == "smuggle raw");
        CHECK(cells[4].source == "x = 1");
        CHECK(cells[1].source.find("smuggle(") != std::string::npos);
        CHECK(cells[1].source.starts_with("import os\n"));
        CHECK(cells[1].source.ends_with("print(np)"));

        // Shapes are kept: line lists stay line lists.
        const auto rendered = json::parse(result.doc.render());
        CHECK(rendered["cells"][1]["source"].is_array());
        CHECK(rendered["cells"][3]["source"].is_string());
        CHECK(rendered["cells"][1]["source"].size() == 3);
        CHECK(rendered["cells"][0] == json::parse(text)["cells"][0]);
        CHECK(rendered["metadata"] == json::parse(text)["metadata"]);

        std::vector<std::string> sources;
        for (const auto& c : cells)
        {
            if (c.kind == cell_kind::code)
            {
                sources.push_back(c.source);
            }
        }
        for (bool ok : fixtures::python_syntax_ok(sources))
        {
            CHECK(ok);
        }
    }

    TEST_CASE("notebooks without smuggles are unchanged", "[notebook]")
    {
        const auto text = notebook(json::array({cell("code", "import numpy as np\nnp.zeros(3)"), cell("markdown", "hi")}));
        const auto doc = NotebookDoc::parse(text);
        const auto result = transform_notebook(doc);
        CHECK(result.doc.render() == text);
        CHECK(result.doc == doc);
    }

    TEST_CASE("magics and shell escapes are left alone", "[notebook]")
    {
        CHECK(transform_cell("%%bash\nsmuggle numpy\n").source == "%%bash\nsmuggle numpy\n");
        const auto mixed = transform_cell("%time smuggle numpy\n!smuggle numpy\nsmuggle numpy\n");
        CHECK(mixed.statements.size() == 1);
        CHECK(mixed.source.starts_with("%time smuggle numpy\n!smuggle numpy\n"));
        CHECK(mixed.source.find("smuggle(") != std::string::npos);
    }

    TEST_CASE("errors name the cell", "[notebook]")
    {
        const auto doc = NotebookDoc::parse(notebook(json::array({cell("code", "x = 1"), cell("code", "smuggle a  # pip: a --help\n")})));
        try
        {
            (void) transform_notebook(doc);
            FAIL("no error");
        }
        catch (const error& e)
        {
            CHECK(e.code() == errc::disallowed_flag);
            CHECK(std::string(e.what()).find("cell 1") != std::string::npos);
        }
    }

    TEST_CASE("split_lines_keep_ends", "[notebook]")
    {
        CHECK(split_lines_keep_ends("").empty());
        CHECK(split_lines_keep_ends("a") == std::vector<std::string>{"a"});
        CHECK(split_lines_keep_ends("a\nb\n") == std::vector<std::string>{"a\n", "b\n"});
        CHECK(split_lines_keep_ends("\n\n") == std::vector<std::string>{"\n", "\n"});
    }

    TEST_CASE("cell count and non-code cells survive transformation", "[notebook][property]")
    {
        std::mt19937 rng(5);
        const std::vector<std::string> lines = {
            "smuggle numpy as np  # pip: numpy==1.24.3",
            "from os smuggle path",
            "x = 'smuggle y'",
            "import sys",
            "    smuggle json",
            "# smuggle nothing",
            "if True:",
        };
        for (int round = 0; round < 100; ++round)
        {
            json cells = json::array();
            const int n = static_cast<int>(rng() % 7);
            for (int i = 0; i < n; ++i)
            {
                const char* kinds[] = {"code", "markdown", "raw"};
                std::string kind = kinds[rng() % 3];
                std::string source;
                const int count = static_cast<int>(rng() % 4);
                for (int j = 0; j < count; ++j)
                {
                    source += lines[rng() % 4] + (j + 1 < count ? "\n" : "");
                }
                cells.push_back(cell(kind, rng() % 2 ? json(source) : json(split_lines_keep_ends(source))));
            }
            const auto doc = NotebookDoc::parse(notebook(cells));
            const auto result = transform_notebook(doc);
            REQUIRE(result.doc.cells().size() == doc.cells().size());
            REQUIRE(result.inventory.size() == doc.code_cell_count());
            for (std::size_t i = 0; i < doc.cells().size(); ++i)
            {
                REQUIRE(result.doc.cells()[i].kind == doc.cells()[i].kind);
                if (doc.cells()[i].kind != cell_kind::code)
                {
                    REQUIRE(result.doc.cells()[i].source == doc.cells()[i].source);
                }
            }
            std::size_t inv = 0;
            for (const auto& c : doc.cells())
            {
                if (c.kind == cell_kind::code)
                {
                    const auto direct = transform_cell(c.source).statements;
                    REQUIRE(result.inventory[inv].statements == direct);
                    ++inv;
                }
            }
            // A reparsed rendering is the same document.
            REQUIRE(NotebookDoc::parse(result.doc.render()).render() == result.doc.render());
        }
    }
}
